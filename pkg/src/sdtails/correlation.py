"""Total demand/supply correlation when the Gaussian correlation is set per jump-count pair."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core_model import LegParams, QuotientModel, conditional_moments, count_weights
from .density_series import SeriesTruncation, truncation_for


@dataclass(frozen=True, eq=False)
class JumpLevelCorrelation:
    kind: Literal["constant", "table"]
    rho: float = 0.0
    table: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind == "constant":
            if not -1.0 <= self.rho <= 1.0:
                raise ValueError("rho must lie in [-1, 1]")
        elif self.kind == "table":
            t = np.asarray(self.table, dtype=float)
            if t.ndim != 2 or np.any(np.abs(t) > 1) or not np.all(np.isfinite(t)):
                raise ValueError("table must be a 2-D array with entries in [-1, 1]")
            object.__setattr__(self, "table", t)
        else:
            raise ValueError(f"unknown kind {self.kind!r}")

    @classmethod
    def constant(cls, rho: float) -> "JumpLevelCorrelation":
        return cls("constant", rho=rho)

    @classmethod
    def from_table(cls, values) -> "JumpLevelCorrelation":
        return cls("table", table=np.asarray(values, dtype=float))

    def values(self, k_max: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full((k_max + 1, k_max + 1), self.rho)
        if min(self.table.shape) < k_max + 1:
            raise ValueError(f"correlation table must cover counts up to {k_max}")
        return self.table[: k_max + 1, : k_max + 1]


def leg_variance(leg: LegParams, lam: float, dt: float) -> float:
    """Variance of one leg for zero-mean jumps: ``(sigma0/2)^2 dt + jump_sigma^2 lam dt``."""
    return (leg.sigma0 / 2.0) ** 2 * dt + leg.jump_sigma**2 * lam * dt


def _truncation(model: QuotientModel, trunc: SeriesTruncation | None) -> SeriesTruncation:
    trunc = trunc or truncation_for(model, tail=1e-14)
    if trunc.tail_mass_bound >= 1e-12:
        raise ValueError("truncation must leave less than 1e-12 Poisson mass")
    return trunc


def total_correlation(
    model: QuotientModel, jlc: JumpLevelCorrelation | None = None, trunc: SeriesTruncation | None = None
) -> float:
    """rho_T = sum p(k1,k2) rho(k1,k2) sR1(k1) sR2(k2) / sqrt(Var R1 Var R2).

    This is the correlation of the Gaussian parts; it is the full correlation
    of (R1, R2) when both jump means are zero.
    """
    jlc = jlc or JumpLevelCorrelation.constant(model.rho)
    trunc = _truncation(model, trunc)
    k = np.arange(trunc.k_max + 1)
    p = count_weights(model, trunc.k_max)
    _, _, s1, s2 = conditional_moments(model, k[:, None], k[None, :])
    cov = float(np.sum(p * jlc.values(trunc.k_max) * s1 * s2))
    l1, l2 = model.jumps.marginal_rates
    v1 = leg_variance(model.demand, l1, model.dt)
    v2 = leg_variance(model.supply, l2, model.dt)
    return cov / math.sqrt(v1 * v2)


def rho_t_range_report(model: QuotientModel, trunc: SeriesTruncation | None = None) -> tuple[float, float]:
    """Attainable band of rho_T: constant jump-level correlation -1 and +1."""
    lo = total_correlation(model, JumpLevelCorrelation.constant(-1.0), trunc)
    hi = total_correlation(model, JumpLevelCorrelation.constant(1.0), trunc)
    return lo, hi
