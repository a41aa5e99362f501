"""Discrete-time price paths driven by demand/supply noise, and a GBM reference.

Basic mode multiplies the price by ``(D/S) (1 + R) / (1 + Rbar)`` each step,
where ``1 + R`` and ``1 + Rbar`` are the two legs of a :class:`QuotientModel`
(parameterize the legs with ``mu0 = 1`` for the relative-perturbation
reading).  Grid mode draws a ``2N``-dimensional Gaussian of demand and supply
levels attached to ``N`` reference prices and applies ``G`` to the ratio at
the grid price nearest the current price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core_model import (
    PriceFunction,
    QuotientModel,
    model_from_dict,
    model_to_dict,
    price_function_from_dict,
    price_function_to_dict,
)
from .sampler import RngStream, _draw_chunk
from .transforms import g_eps

RETRY_BUDGET = 1000


@dataclass(frozen=True, eq=False)
class PathConfig:
    p0: float
    steps: int
    pf: PriceFunction = field(default_factory=PriceFunction)
    model: QuotientModel | None = None
    grid: np.ndarray | None = None
    means: np.ndarray | None = None
    covariance: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.p0) and self.p0 > 0):
            raise ValueError("p0 must be positive")
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError("steps must be a non-negative integer")
        if self.grid is None:
            if self.model is None:
                raise ValueError("basic mode requires a model")
            return
        grid = np.asarray(self.grid, dtype=float)
        n = grid.size
        if grid.ndim != 1 or n < 1 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly ascending")
        means = np.asarray(self.means, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if means.shape != (2 * n,) or cov.shape != (2 * n, 2 * n):
            raise ValueError("means must have length 2N and covariance shape (2N, 2N)")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-14 * np.abs(cov).max()):
            raise ValueError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance is not positive definite") from exc
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def mode(self) -> str:
        return "basic" if self.grid is None else "grid"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"p0": self.p0, "steps": int(self.steps), "pf": price_function_to_dict(self.pf)}
        if self.model is not None:
            out["model"] = model_to_dict(self.model)
        if self.grid is not None:
            out["grid"] = self.grid.tolist()
            out["means"] = self.means.tolist()
            out["covariance"] = self.covariance.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PathConfig":
        allowed = {"p0", "steps", "pf", "model", "grid", "means", "covariance"}
        extra = set(data) - allowed
        if extra:
            raise ValueError(f"unknown keys for PathConfig: {sorted(extra)}")
        return cls(
            p0=float(data["p0"]),
            steps=int(data["steps"]),
            pf=price_function_from_dict(data.get("pf", {})),
            model=model_from_dict(data["model"]) if "model" in data else None,
            grid=data.get("grid"),
            means=data.get("means"),
            covariance=data.get("covariance"),
        )


@dataclass(frozen=True, eq=False)
class PricePath:
    prices: np.ndarray
    snapped: np.ndarray
    seed: int
    rejections: int = 0
    grid_index: np.ndarray | None = None

    def __post_init__(self) -> None:
        if len(self.snapped) != len(self.prices):
            raise ValueError("snapped flags must align with prices")

    @property
    def relative_changes(self) -> np.ndarray:
        return self.prices[1:] / self.prices[:-1] - 1.0


def simulate_basic(config: PathConfig, rng: RngStream) -> PricePath:
    if config.mode != "basic":
        raise ValueError("simulate_basic needs a basic-mode config")
    model = config.model
    gen = rng.generator(0)
    steps = int(config.steps)
    r1, r2, _, _ = _draw_chunk(model, steps, gen) if steps else (np.empty(0),) * 4
    r1, r2 = np.array(r1, dtype=float), np.array(r2, dtype=float)
    rejections = 0
    for j in np.flatnonzero((r1 <= 0) | (r2 <= 0)):
        for _ in range(RETRY_BUDGET):
            rejections += 1
            a, b, _, _ = _draw_chunk(model, 1, gen)
            if a[0] > 0 and b[0] > 0:
                r1[j], r2[j] = a[0], b[0]
                break
        else:
            raise ArithmeticError(f"step {j}: no positive factor within {RETRY_BUDGET} redraws")
    factors = model.d_over_s * r1 / r2
    prices = config.p0 * np.concatenate([[1.0], np.cumprod(factors)])
    return PricePath(prices, np.zeros(steps + 1, dtype=bool), int(rng.seed), rejections)


def nearest_grid_index(grid: np.ndarray, price: float) -> int:
    """Index of the grid price closest to ``price``; ties go to the lower index."""
    i = int(np.searchsorted(grid, price))
    if i == 0:
        return 0
    if i == len(grid):
        return len(grid) - 1
    return i - 1 if price - grid[i - 1] <= grid[i] - price else i


def simulate_grid(config: PathConfig, rng: RngStream) -> PricePath:
    if config.mode != "grid":
        raise ValueError("simulate_grid needs a grid-mode config")
    grid, n = config.grid, config.grid.size
    gen = rng.generator(0)
    pf = config.pf
    steps = int(config.steps)
    prices = np.empty(steps + 1)
    snapped = np.zeros(steps + 1, dtype=bool)
    index = np.empty(steps + 1, dtype=np.int64)
    prices[0] = config.p0
    rejections = 0
    for j in range(steps + 1):
        p = prices[j]
        k = nearest_grid_index(grid, p)
        index[j], snapped[j] = k, p != grid[k]
        if j == steps:
            break
        for _ in range(RETRY_BUDGET):
            x = config.means + config._chol @ gen.standard_normal(2 * n)
            num, den = x[k], x[n + k]
            if den != 0 and num != 0:
                factor = g_eps(num / den, pf) / pf.tau0 + 1.0
                if factor > 0:
                    break
            rejections += 1
        else:
            raise ArithmeticError(f"step {j}: no positive factor within {RETRY_BUDGET} redraws")
        prices[j + 1] = factor * p
    return PricePath(prices, snapped, int(rng.seed), rejections, index)


def simulate_grid_batch(config: PathConfig, n_paths: int, seed: int) -> list[PricePath]:
    """Independent grid paths; path ``i`` uses stream ``(seed, i)``."""
    return [simulate_grid(config, RngStream(seed, i)) for i in range(n_paths)]


def gbm_baseline(p0: float, mu: float, sigma: float, dt: float, steps: int, rng: RngStream) -> PricePath:
    """Euler scheme ``P_{j+1} = P_j (1 + mu dt + sigma dW)``."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    dw = rng.generator(0).standard_normal(steps) * math.sqrt(dt)
    growth = 1.0 + mu * dt + sigma * dw
    prices = p0 * np.concatenate([[1.0], np.cumprod(growth)])
    return PricePath(prices, np.zeros(steps + 1, dtype=bool), int(rng.seed))


def negative_price_sd_event(sigma: float, dt: float) -> float:
    """Number of standard deviations for ``1 + sigma dW`` to reach zero."""
    if sigma <= 0 or dt <= 0:
        raise ValueError("sigma and dt must be > 0")
    return 1.0 / (sigma * math.sqrt(dt))
