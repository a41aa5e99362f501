"""Tail-exponent estimators.

``zeta`` is the survival exponent, ``P(|X| > x) ~ x**-zeta``, equivalently
``f(x) ~ x**-(zeta + 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

Side = Literal["both", "upper", "lower"]


@dataclass(frozen=True)
class TailFit:
    zeta_hat: float
    std_err: float
    estimator: Literal["hill", "loglog_survival", "loglog_density"]
    cutoff: float
    n_used: int

    def __post_init__(self) -> None:
        if not self.zeta_hat > 0:
            raise ValueError(f"non-positive tail exponent {self.zeta_hat}; no power-law tail in range")

    def to_dict(self) -> dict:
        return {
            "zeta_hat": self.zeta_hat,
            "std_err": self.std_err,
            "estimator": self.estimator,
            "cutoff": self.cutoff,
            "n_used": self.n_used,
        }


def _magnitudes(samples, side: Side) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if side == "upper":
        x = x[x > 0]
    elif side == "lower":
        x = -x[x < 0]
    elif side != "both":
        raise ValueError(f"unknown side {side!r}")
    return np.abs(x)


def default_top_k(n: int) -> int:
    return max(50, n // 1000)


def hill_estimator(samples, top_k: int | None = None, side: Side = "both") -> TailFit:
    x = _magnitudes(samples, side)
    n = x.size
    top_k = default_top_k(n) if top_k is None else int(top_k)
    if top_k < 50 or top_k > n / 10:
        raise ValueError(f"top_k={top_k} needs 50 <= top_k <= n/10 with n={n}")
    # Only the top_k + 1 largest values matter; partition avoids a full sort.
    top = np.partition(x, n - top_k - 1)[n - top_k - 1 :]
    threshold = top.min()
    if threshold <= 0:
        raise ValueError("threshold order statistic is zero")
    # The threshold itself contributes log(1) = 0.
    spacing = np.log(top / threshold).sum()
    if spacing <= 0:
        raise ValueError("degenerate sample: zero log-spacings")
    zeta = top_k / spacing
    zeta = float(zeta)
    return TailFit(zeta, zeta / math.sqrt(top_k), "hill", float(threshold), top_k)


def _ols(x: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = len(x) - 2
    sxx = np.sum((x - x.mean()) ** 2)
    se = math.sqrt(np.sum(resid**2) / dof / sxx) if dof > 0 else float("nan")
    return float(slope), se


def _check_range(lo: float, hi: float) -> None:
    if not (lo > 0 and hi / lo >= 10):
        raise ValueError("fit range needs x_min > 0 and x_max / x_min >= 10")


def loglog_survival_fit(samples, x_min: float, x_max: float, side: Side = "both", n_points: int = 50) -> TailFit:
    """Slope of the log empirical survival function on log-spaced points in ``[x_min, x_max]``.

    The standard error is the Hill-type ``zeta / sqrt(n_tail)`` with ``n_tail``
    the number of samples above ``x_min``; regression residuals of a survival
    curve are strongly correlated, so the OLS error would be optimistic.
    """
    _check_range(x_min, x_max)
    x = np.sort(_magnitudes(samples, side))
    n = x.size
    grid = np.geomspace(x_min, x_max, n_points)
    surv = (n - np.searchsorted(x, grid, side="right")) / n
    ok = surv > 0
    if ok.sum() < 20:
        raise ValueError("fewer than 20 populated points in range")
    slope, _ = _ols(np.log(grid[ok]), np.log(surv[ok]))
    n_tail = int(n - np.searchsorted(x, x_min, side="left"))
    zeta = float(-slope)
    return TailFit(zeta, abs(zeta) / math.sqrt(max(n_tail, 1)), "loglog_survival", float(x_min), n_tail)


def loglog_density_fit(
    density: Callable[[np.ndarray], np.ndarray], y_min: float, y_max: float, n_points: int = 50
) -> TailFit:
    _check_range(y_min, y_max)
    if n_points < 20:
        raise ValueError("need at least 20 points")
    y = np.geomspace(y_min, y_max, n_points)
    f = np.asarray(density(y), dtype=float)
    if np.any(f <= 0):
        raise ValueError("density must be positive throughout the fit range")
    slope, se = _ols(np.log(y), np.log(f))
    return TailFit(float(-slope - 1.0), se, "loglog_density", float(y_min), n_points)
