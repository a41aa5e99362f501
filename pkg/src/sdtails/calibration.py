"""Fit the price-adjustment function to observed (demand, supply, relative change) triples.

The fitted relation is ``rel = scale * G(D/S)`` with ``G`` the odd power law in
``u = D/S - S/D``.  ``scale`` absorbs the reaction time and any amplitude of
``G``; the two are not separately identifiable from these observations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .core_model import Bivariate, Conditional, Independent, LegParams, PriceFunction, QuotientModel
from .density_series import SeriesTruncation, density_of_rc, truncation_for
from .transforms import g_of_u

MIN_OBSERVATIONS = 30
MIN_U = 1e-6
MIN_DECADES = 0.5
SCALE_NOTE = "scale_hat is the product of the reaction time and the amplitude of G"


@dataclass(frozen=True)
class Observation:
    demand: float
    supply: float
    rel_price_change: float

    def __post_init__(self) -> None:
        if not (self.demand > 0 and self.supply > 0):
            raise ValueError("demand and supply must be > 0")
        if not math.isfinite(self.rel_price_change):
            raise ValueError("rel_price_change must be finite")

    @property
    def u(self) -> float:
        x = self.demand / self.supply
        return x - 1.0 / x


@dataclass(frozen=True)
class CalibrationResult:
    q_hat: float
    scale_hat: float
    r2: float
    predicted_zeta: float
    n: int
    sign_consistency: float
    epsilon: float = 0.0
    note: str = SCALE_NOTE

    def __post_init__(self) -> None:
        if not self.q_hat > 0:
            raise ValueError("q_hat must be > 0")
        if not self.scale_hat > 0:
            raise ValueError("scale_hat must be > 0")
        if self.n < MIN_OBSERVATIONS:
            raise ValueError(f"n must be >= {MIN_OBSERVATIONS}")

    @property
    def price_function(self) -> PriceFunction:
        return PriceFunction(q=self.q_hat, epsilon=self.epsilon)

    def to_dict(self) -> dict:
        return {
            "q_hat": self.q_hat,
            "scale_hat": self.scale_hat,
            "r2": self.r2,
            "predicted_zeta": self.predicted_zeta,
            "n": self.n,
            "sign_consistency": self.sign_consistency,
            "epsilon": self.epsilon,
            "note": self.note,
        }


def _arrays(obs) -> tuple[np.ndarray, np.ndarray]:
    u = np.array([o.u for o in obs], dtype=float)
    rel = np.array([o.rel_price_change for o in obs], dtype=float)
    return u, rel


def fit_price_function(obs, epsilon: float = 0.0) -> CalibrationResult:
    """Least-squares fit of ``log|rel| = log(scale) + log|G_u(u)|``.

    With ``epsilon = 0`` this is the straight line ``log(scale) + log|u| / q``.
    A positive ``epsilon`` is held fixed and the two parameters are found by
    nonlinear least squares on the same log residuals.
    """
    u, rel = _arrays(obs)
    keep = (np.abs(u) > MIN_U) & (rel != 0)
    u, rel = u[keep], rel[keep]
    n = u.size
    if n < MIN_OBSERVATIONS:
        raise ValueError(f"need at least {MIN_OBSERVATIONS} observations with |u| > {MIN_U} and rel != 0, got {n}")
    lu, lr = np.log(np.abs(u)), np.log(np.abs(rel))
    if (lu.max() - lu.min()) / math.log(10.0) < MIN_DECADES:
        raise ValueError("|u| spans less than half a decade; q is not identifiable")

    if epsilon == 0:
        slope, intercept = np.polyfit(lu, lr, 1)
    else:
        def resid(p):
            log_scale, inv_q = p
            return log_scale + np.log(np.abs(g_of_u(u, 1.0 / inv_q, epsilon))) - lr

        start = np.polyfit(lu, lr, 1)
        fit = least_squares(resid, [start[1], max(start[0], 1e-3)], bounds=([-np.inf, 1e-6], [np.inf, np.inf]))
        intercept, slope = fit.x
    if slope <= 0:
        raise ValueError("fitted exponent is not positive; data show no increasing relation")
    q_hat = 1.0 / slope
    pred = intercept + np.log(np.abs(g_of_u(u, q_hat, epsilon)))
    ss_res = float(np.sum((lr - pred) ** 2))
    ss_tot = float(np.sum((lr - lr.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    signs = float(np.mean(np.sign(rel) == np.sign(u)))
    return CalibrationResult(
        q_hat=float(q_hat),
        scale_hat=float(math.exp(intercept)),
        r2=float(min(max(r2, 0.0), 1.0)),
        predicted_zeta=float(q_hat),
        n=int(n),
        sign_consistency=signs,
        epsilon=float(epsilon),
    )


def bootstrap_q_se(obs, n_boot: int = 200, seed: int = 0, epsilon: float = 0.0) -> float:
    """Bootstrap standard error of ``q_hat`` with a fixed seed."""
    obs = list(obs)
    gen = np.random.default_rng(seed)
    qs = [fit_price_function([obs[i] for i in gen.integers(0, len(obs), len(obs))], epsilon).q_hat for _ in range(n_boot)]
    return float(np.std(qs, ddof=1))


def estimate_leg_moments(d_samples, s_samples) -> tuple[float, float, float, float, float]:
    """Sample means, unbiased variances and correlation of demand and supply.

    The correlation is reported as 0 when either leg is constant.
    """
    d = np.asarray(d_samples, dtype=float)
    s = np.asarray(s_samples, dtype=float)
    if d.shape != s.shape or d.ndim != 1:
        raise ValueError("demand and supply samples must be 1-D and of equal length")
    if d.size < MIN_OBSERVATIONS:
        raise ValueError(f"need at least {MIN_OBSERVATIONS} samples")
    vd, vs = float(np.var(d, ddof=1)), float(np.var(s, ddof=1))
    if vd == 0 or vs == 0:
        corr = 0.0
    else:
        corr = float(np.clip(np.cov(d, s, ddof=1)[0, 1] / math.sqrt(vd * vs), -1.0, 1.0))
    return float(d.mean()), vd, float(s.mean()), vs, corr


def model_from_moments(moments, dt: float = 1.0) -> QuotientModel:
    """Jump-free Gaussian model with the given leg means, variances and correlation."""
    mean_d, var_d, mean_s, var_s, corr = moments
    if var_d <= 0 or var_s <= 0:
        raise ValueError("a Gaussian model needs positive variances")
    scale = 2.0 / math.sqrt(dt)
    return QuotientModel(
        demand=LegParams(mean_d, scale * math.sqrt(var_d)),
        supply=LegParams(mean_s, scale * math.sqrt(var_s)),
        jumps=Independent(0.0, 0.0),
        corr=Conditional(corr),
        dt=dt,
    )


def _tail_mass(model, pf, trunc, y: float, window: float, panels: int = 64) -> float:
    """``P(G(W) <= y)`` for ``y < 0``: log-spaced quadrature on ``[-window, y]`` plus a power tail."""
    a, b = math.log(-y), math.log(window)
    nodes, weights = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(a, b, panels + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes[None, :]
    t = np.exp(s)
    f = np.asarray(density_of_rc(-t.ravel(), model, pf, trunc)).reshape(t.shape)
    body = float(np.sum(0.5 * (hi - lo).ravel() * ((f * t) @ weights)))
    # Beyond the window the density decays as |y|^-(q+1).
    f_edge = float(density_of_rc(-window, model, pf, trunc))
    return body + f_edge * window / pf.q


def drawdown_probability(
    result: CalibrationResult,
    model: QuotientModel,
    threshold: float,
    trunc: SeriesTruncation | None = None,
    window_factor: float = 100.0,
) -> float:
    """``P(scale * G(W) <= threshold)`` for a negative threshold."""
    if not threshold < 0:
        raise ValueError("threshold must be < 0")
    if threshold == -math.inf:
        return 0.0
    trunc = trunc or truncation_for(model)
    y = threshold / result.scale_hat
    return _tail_mass(model, result.price_function, trunc, y, window_factor * max(1.0, -y))


def rise_probability(
    result: CalibrationResult,
    model: QuotientModel,
    threshold: float,
    trunc: SeriesTruncation | None = None,
    window_factor: float = 100.0,
) -> float:
    """``P(scale * G(W) >= threshold)`` for a positive threshold.

    Uses the identity ``G(1/x) = -G(x)``: the event is ``G(1/W) <= -y`` and
    ``1/W`` is the quotient with the legs swapped.
    """
    if not threshold > 0:
        raise ValueError("threshold must be > 0")
    if threshold == math.inf:
        return 0.0
    swapped = QuotientModel(
        demand=model.supply,
        supply=model.demand,
        jumps=_swap_jumps(model.jumps),
        corr=model.corr,
        dt=model.dt,
        d_over_s=1.0 / model.d_over_s,
    )
    trunc = trunc or truncation_for(swapped)
    y = -threshold / result.scale_hat
    return _tail_mass(swapped, result.price_function, trunc, y, window_factor * max(1.0, -y))


def _swap_jumps(jumps):
    if isinstance(jumps, Independent):
        return Independent(jumps.lambda2, jumps.lambda1)
    if isinstance(jumps, Bivariate):
        return Bivariate(jumps.lambda02, jumps.lambda01, jumps.lambda12)
    return jumps
