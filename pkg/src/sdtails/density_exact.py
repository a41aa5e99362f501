"""Closed-form densities for the anti-correlated (shared-noise) quotient.

With ``X = mu1 + s1 Z`` and ``Y = mu2 - s2 Z`` for a single standard normal
``Z``, the map ``Z -> X / Y`` is a Moebius transformation, so ``X / Y`` has an
explicit density and CDF.  The shared-noise model conditioned on ``k`` jumps
is of this form with ``mu1 = dt + k mu``, ``mu2 = dt - k mu`` and
``s1 = s2 = sqrt(sigma0^2 dt / 4 + k delta^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.special import log_ndtr, ndtr
from scipy.stats import poisson

from .core_model import AntiCorrelated, QuotientModel, poisson_pmf

TAIL_QUANTILE = 1e-12
SMALL_DT_GATE = 1e-2
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class AntiCorrParams:
    sigma0: float
    jump_mu: float
    jump_sigma: float
    lam: float
    dt: float
    d_over_s: float = 1.0

    def __post_init__(self) -> None:
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"{f.name} must be finite")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be > 0")
        if self.jump_sigma < 0 or self.lam < 0:
            raise ValueError("jump_sigma and lam must be >= 0")
        if self.dt <= 0 or self.d_over_s <= 0:
            raise ValueError("dt and d_over_s must be > 0")

    @classmethod
    def from_model(cls, model: QuotientModel) -> "AntiCorrParams":
        """Read the shared-noise parameters off a model whose legs drift by ``dt``."""
        if not isinstance(model.corr, AntiCorrelated):
            raise TypeError("model is not anti-correlated")
        d, s = model.demand, model.supply
        if d.mu0 != model.dt or s.mu0 != model.dt:
            raise ValueError("closed form assumes both legs have drift mu0 == dt")
        return cls(d.sigma0, d.jump_mu, d.jump_sigma, model.jumps.lambda1, model.dt, model.d_over_s)

    def moments(self, k):
        """``(mu1, mu2, sigma)`` of the numerator and denominator given ``k`` jumps."""
        k = np.asarray(k, dtype=float)
        sigma = np.sqrt(self.sigma0**2 * self.dt / 4.0 + k * self.jump_sigma**2)
        return self.dt + k * self.jump_mu, self.dt - k * self.jump_mu, sigma

    def k_max(self) -> int:
        m = self.lam * self.dt
        return int(poisson.isf(TAIL_QUANTILE, m)) if m > 0 else 0


def anticorr_quotient_density(x, mu1, sigma1, mu2, sigma2):
    """Density of ``(mu1 + sigma1 Z) / (mu2 - sigma2 Z)``.

    Evaluated in log space; at the pole ``x = -sigma1/sigma2`` the value is 0.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.asarray(sigma1) <= 0) or np.any(np.asarray(sigma2) <= 0):
        raise ValueError("sigma1 and sigma2 must be > 0")
    den = sigma2 * x + sigma1
    coef = np.abs(mu1 * sigma2 + mu2 * sigma1)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (mu2 * x - mu1) / den
        logf = np.log(coef) - _LOG_SQRT_2PI - 0.5 * z * z - 2.0 * np.log(np.abs(den))
        out = np.where(den == 0, 0.0, np.exp(logf))
    return out if out.ndim else float(out)


def anticorr_quotient_cdf(x, mu1, sigma1, mu2, sigma2):
    """CDF of the same quotient; assumes ``mu1 sigma2 + mu2 sigma1 > 0`` (increasing map)."""
    x = np.asarray(x, dtype=float)
    pole = -sigma1 / sigma2
    zp = mu2 / sigma2
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (mu2 * x - mu1) / (sigma2 * x + sigma1)
    base = np.where(x == pole, 1.0 - ndtr(zp), ndtr(z))
    out = np.where(x >= pole, base + 1.0 - ndtr(zp), base - ndtr(zp))
    return out if out.ndim else float(out)


def _rescaled(fn, x, params: AntiCorrParams, k):
    mu1, mu2, sigma = params.moments(k)
    ds = params.d_over_s
    return fn(np.asarray(x, dtype=float) / ds, mu1, sigma, mu2, sigma)


def per_jump_density(x, params: AntiCorrParams, k: int):
    if k < 0:
        raise ValueError("k must be >= 0")
    out = _rescaled(anticorr_quotient_density, x, params, k) / params.d_over_s
    return out if np.ndim(out) else float(out)


def per_jump_cdf(x, params: AntiCorrParams, k: int):
    return _rescaled(anticorr_quotient_cdf, x, params, k)


def _mixture(fn, x, params: AntiCorrParams):
    x = np.asarray(x, dtype=float)
    ks = np.arange(params.k_max() + 1)
    weights = np.atleast_1d(poisson_pmf(ks, params.lam * params.dt))
    total = np.zeros_like(x)
    for k, w in zip(ks, weights):
        total = total + w * fn(x, params, int(k))
    return total if total.ndim else float(total)


def full_mixture_density(x, params: AntiCorrParams):
    """Poisson mixture of the per-jump densities, truncated at tail mass 1e-12."""
    return _mixture(per_jump_density, x, params)


def full_mixture_cdf(x, params: AntiCorrParams):
    return _mixture(per_jump_cdf, x, params)


def positive_mass(mu1, sigma1, mu2, sigma2) -> float:
    """``Q = P(X > 0, Y > 0) = Phi(mu2/sigma2) - Phi(-mu1/sigma1)``."""
    a, b = -mu1 / sigma1, mu2 / sigma2
    if b <= a:
        return 0.0
    # Difference of CDFs taken on whichever side keeps both terms away from 1.
    if a > 0:
        return float(ndtr(-a) - ndtr(-b))
    if b < 0:
        return float(ndtr(b) - ndtr(a))
    return float(1.0 - np.exp(log_ndtr(a)) - np.exp(log_ndtr(-b)))


def conditional_positive_density(x, mu1, sigma1, mu2, sigma2):
    """Density of the quotient given numerator and denominator both positive."""
    q = positive_mass(mu1, sigma1, mu2, sigma2)
    if q <= 1e-12:
        raise ValueError(f"positive-quadrant mass {q:.3g} too small")
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, anticorr_quotient_density(x, mu1, sigma1, mu2, sigma2) / q, 0.0)
    return out if out.ndim else float(out)


def small_dt_term(x, params: AntiCorrParams, k: int):
    """Large-x, small-dt form of the ``k``-jump density (``k >= 1``)."""
    if params.jump_mu == 0:
        raise ValueError("small-dt form requires jump_mu != 0")
    if k < 1:
        raise ValueError("small-dt form is defined for k >= 1")
    if params.jump_sigma <= 0:
        raise ValueError("small-dt form requires jump_sigma > 0")
    d = params.jump_sigma
    amp = 2.0 * params.dt * params.d_over_s / (math.sqrt(2.0 * math.pi) * math.sqrt(k) * d)
    x = np.asarray(x, dtype=float)
    out = amp * math.exp(-0.5 * k * params.jump_mu**2 / d**2) / x**2
    return out if out.ndim else float(out)


def small_dt_series(x, params: AntiCorrParams, k_max: int | None = None):
    """``sum_{k >= 1} p_k * small_dt_term(x, k)`` with Poisson weights of mean ``lam dt``."""
    k_max = max(1, params.k_max()) if k_max is None else k_max
    m = params.lam * params.dt
    return sum(poisson_pmf(k, m) * small_dt_term(x, params, k) for k in range(1, k_max + 1))


def small_dt_bounds(x, params: AntiCorrParams, enforce_gate: bool = True):
    """Lower and upper bounds ``C a / 2`` and ``C (e^a - 1)`` on :func:`small_dt_series`."""
    if params.jump_mu <= 0:
        raise ValueError("bounds require jump_mu > 0")
    if enforce_gate and params.dt > SMALL_DT_GATE:
        raise ValueError(f"bounds are checked only for dt <= {SMALL_DT_GATE}")
    d = params.jump_sigma
    m = params.lam * params.dt
    x = np.asarray(x, dtype=float)
    c = 2.0 / math.sqrt(2.0 * math.pi) * params.dt / d * params.d_over_s / x**2 * math.exp(-m)
    a = m * math.exp(-params.jump_mu**2 / (2.0 * d * d))
    lower, upper = c * a / 2.0, c * math.expm1(a)
    if lower.ndim == 0:
        return float(lower), float(upper)
    return lower, upper
