"""Density of the quotient ``W = (D/S) R1 / R2`` as a Poisson mixture over jump counts.

Given counts ``(k1, k2)`` the pair ``(R1, R2)`` is bivariate normal, so

    f(w) = sum_{k1,k2} p(k1, k2) * int |y| f_{k1 k2}(w y, y) dy.

Along the ray ``(w y, y)`` the bivariate normal is itself a Gaussian in ``y``
with centre ``m(w)`` and width ``s(w)``; after the substitution
``y = m + s t`` the integrand ``|m + s t| exp(-t^2 / 2)`` is integrated on
either side of its kink at ``y = 0`` with a batched Gauss-Kronrod rule.  The
prefactor ``exp(-E) / (2 pi sqrt(V))`` involves ``V = Var(R1 - w R2)`` and
``E = (mu1 - w mu2)^2 / (2 V)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import ndtr
from scipy.stats import poisson

from . import _quadrature
from .core_model import (
    AntiCorrelated,
    PriceFunction,
    QuotientModel,
    conditional_moments,
    count_weights,
)
from .transforms import pushforward_density

TAIL_QUANTILE = 1e-12
# Half-width of the standardized integration window; exp(-L^2/2) ~ 5e-32.
_L = 12.0
_PRUNE = 1e-14
_CHUNK = 256


@dataclass(frozen=True)
class SeriesTruncation:
    k_max: int
    tail_mass_bound: float

    def __post_init__(self) -> None:
        if self.k_max < 1:
            raise ValueError("k_max must be a positive integer")
        if not self.tail_mass_bound >= 0:
            raise ValueError("tail_mass_bound must be >= 0")


@dataclass(frozen=True)
class DensityEvaluation:
    w: float | np.ndarray
    value: float | np.ndarray
    abs_error_estimate: float | np.ndarray
    method: Literal["quadrature", "asymptotic", "exact"]

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.value) < 0):
            raise ValueError("density value must be >= 0")
        if np.any(np.asarray(self.abs_error_estimate) < 0):
            raise ValueError("error estimate must be >= 0")


def truncation_for(model: QuotientModel, tail: float = TAIL_QUANTILE, extra: int = 0) -> SeriesTruncation:
    """Smallest ``k_max`` whose marginal Poisson tails are each below ``tail``."""
    means = model.count_means
    k_max = max(1, *(int(poisson.isf(tail, m)) if m > 0 else 0 for m in means)) + extra
    bound = float(sum(poisson.sf(k_max, m) for m in means if m > 0))
    return SeriesTruncation(k_max=k_max, tail_mass_bound=bound)


def _require_gaussian(model: QuotientModel) -> None:
    if isinstance(model.corr, AntiCorrelated):
        raise TypeError("anti-correlated model has a singular joint law; use density_exact")


@dataclass(frozen=True)
class _Terms:
    weight: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    pruned_mass: float


def _terms(model: QuotientModel, trunc: SeriesTruncation) -> _Terms:
    table = count_weights(model, trunc.k_max)
    keep = table >= _PRUNE * table.max()
    k1, k2 = np.nonzero(keep)  # row-major: sorted by (k1, k2)
    mu1, mu2, s1, s2 = conditional_moments(model, k1, k2)
    return _Terms(
        weight=table[k1, k2],
        mu1=np.atleast_1d(mu1),
        mu2=np.atleast_1d(mu2),
        s1=np.atleast_1d(s1),
        s2=np.atleast_1d(s2),
        pruned_mass=float(table[~keep].sum()),
    )


def joint_conditional_density(x1, x2, model: QuotientModel, k1: int, k2: int):
    _require_gaussian(model)
    rho = model.rho
    mu1, mu2, s1, s2 = conditional_moments(model, k1, k2)
    z1 = (np.asarray(x1, dtype=float) - mu1) / s1
    z2 = (np.asarray(x2, dtype=float) - mu2) / s2
    one_m = 1.0 - rho * rho
    quad = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / (2.0 * one_m)
    out = np.exp(-quad) / (2.0 * math.pi * s1 * s2 * math.sqrt(one_m))
    return out if out.ndim else float(out)


def _abs_linear_gauss(t, m, s, inv_scale):
    return np.abs(m + s * t) * inv_scale * np.exp(-0.5 * t * t)


def _ray_integrals(w, t: _Terms, rho: float, half: bool):
    """Per-(w, term) values of ``int |y| f_k(w y, y) dy`` (or the ``y > 0`` half).

    Returns arrays of shape ``(len(w), n_terms)`` for values and error estimates.
    """
    w = w[:, None]
    s1, s2, mu1, mu2 = t.s1[None, :], t.s2[None, :], t.mu1[None, :], t.mu2[None, :]
    v = s1 * s1 - 2.0 * rho * w * s1 * s2 + w * w * s2 * s2
    expo = (mu1 - w * mu2) ** 2 / (2.0 * v)
    m = (w * mu1 * s2 * s2 - rho * s1 * s2 * (w * mu2 + mu1) + mu2 * s1 * s1) / v
    s = s1 * s2 * math.sqrt(1.0 - rho * rho) / np.sqrt(v)
    pref = np.exp(-expo) / (2.0 * math.pi * np.sqrt(v))
    scale = np.maximum(np.abs(m), s)
    t0 = np.clip(-m / s, -_L, _L)

    shape = m.shape
    m_, s_, sc_, t0_ = (x.ravel() for x in np.broadcast_arrays(m, s, scale, t0))
    upper, upper_err = _quadrature.integrate(
        _abs_linear_gauss, t0_, np.full_like(t0_, _L), args=(m_, s_, 1.0 / sc_)
    )
    total, err = upper, upper_err
    if not half:
        lower, lower_err = _quadrature.integrate(
            _abs_linear_gauss, np.full_like(t0_, -_L), t0_, args=(m_, s_, 1.0 / sc_)
        )
        total, err = total + lower, err + lower_err
    factor = (pref * scale).ravel()
    return (total * factor).reshape(shape), (err * factor).reshape(shape)


def _mixture(w, model, trunc, half):
    t = _terms(model, trunc)
    values = np.empty(len(w))
    errors = np.empty(len(w))
    max_term = np.empty(len(w))
    for start in range(0, len(w), _CHUNK):
        sl = slice(start, start + _CHUNK)
        vals, errs = _ray_integrals(w[sl], t, model.rho, half)
        values[sl] = vals @ t.weight
        errors[sl] = errs @ t.weight
        max_term[sl] = vals.max(axis=1)
    errors += (trunc.tail_mass_bound + t.pruned_mass) * max_term
    return values, errors


def quotient_density_values(w, model: QuotientModel, trunc: SeriesTruncation | None = None, conditioned=False):
    """Vectorized density (and error estimate) of ``(D/S) R1/R2`` at points ``w``."""
    _require_gaussian(model)
    trunc = trunc or truncation_for(model)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    ds = model.d_over_s
    x = w / ds
    if not conditioned:
        v, e = _mixture(x, model, trunc, half=False)
        return v / ds, e / ds
    q1 = positive_probability(model, trunc)
    v = np.zeros_like(x)
    e = np.zeros_like(x)
    pos = x > 0
    if np.any(pos):
        v[pos], e[pos] = _mixture(x[pos], model, trunc, half=True)
    return v / (ds * q1), e / (ds * q1)


def _evaluation(w, values, errors, method) -> DensityEvaluation:
    if np.ndim(w) == 0:
        return DensityEvaluation(float(w), float(values[0]), float(errors[0]), method)
    return DensityEvaluation(np.asarray(w, dtype=float), values, errors, method)


def quotient_density(w, model: QuotientModel, trunc: SeriesTruncation | None = None) -> DensityEvaluation:
    v, e = quotient_density_values(w, model, trunc)
    return _evaluation(w, v, e, "quadrature")


def quotient_density_conditional(w, model: QuotientModel, trunc: SeriesTruncation | None = None) -> DensityEvaluation:
    """Density of the quotient given ``R1 > 0`` and ``R2 > 0``."""
    v, e = quotient_density_values(w, model, trunc, conditioned=True)
    return _evaluation(w, v, e, "quadrature")


def _orthant_integrand(t, a, rho_c):
    return np.exp(-0.5 * t * t) * ndtr(a + rho_c * t)


def positive_probability(model: QuotientModel, trunc: SeriesTruncation | None = None) -> float:
    """``Q1 = P(R1 > 0, R2 > 0)`` for the jump-count mixture.

    Each bivariate-normal orthant is integrated over the supply leg with the
    demand leg's conditional normal CDF as the inner integral.
    """
    _require_gaussian(model)
    trunc = trunc or truncation_for(model)
    t = _terms(model, trunc)
    rho = model.rho
    c = math.sqrt(1.0 - rho * rho)
    lo = np.clip(-t.mu2 / t.s2, -_L, _L)
    vals, _ = _quadrature.integrate(
        _orthant_integrand,
        lo,
        np.full_like(lo, _L),
        args=(t.mu1 / (t.s1 * c), np.full_like(lo, rho / c)),
        atol=1e-15,
    )
    q1 = float(vals @ t.weight) / math.sqrt(2.0 * math.pi)
    if q1 <= 1e-12:
        raise ValueError(f"P(R1 > 0, R2 > 0) = {q1:.3g} is too small to condition on")
    return q1


def quotient_density_asymptotic(
    w, model: QuotientModel, trunc: SeriesTruncation | None = None, w_min: float = 10.0
) -> DensityEvaluation:
    """Large-|w| Laplace form ``sum p * sqrt(pi/2) (muR1/sR1) exp(-c2 (muR2/sR2)^2) / w^2``."""
    _require_gaussian(model)
    trunc = trunc or truncation_for(model)
    wa = np.atleast_1d(np.asarray(w, dtype=float))
    if np.any(np.abs(wa) < w_min):
        raise ValueError(f"asymptotic form requires |w| >= {w_min}")
    t = _terms(model, trunc)
    c2 = 1.0 / (2.0 * (1.0 - model.rho**2))
    per_term = math.sqrt(math.pi / 2.0) * (t.mu1 / t.s1) * np.exp(-c2 * (t.mu2 / t.s2) ** 2)
    const = float(per_term @ t.weight) * model.d_over_s
    values = const / wa**2
    errors = (trunc.tail_mass_bound + t.pruned_mass) * np.abs(per_term).max() * model.d_over_s / wa**2
    return _evaluation(w, values, errors, "asymptotic")


def _folded_normal_mean(m, s):
    return s * math.sqrt(2.0 / math.pi) * np.exp(-0.5 * (m / s) ** 2) + m * (1.0 - 2.0 * ndtr(-m / s))


def quotient_tail_constant(model: QuotientModel, trunc: SeriesTruncation | None = None) -> float:
    """``lim w^2 f(w)``: density of ``R2`` at zero times ``E[|R1| | R2 = 0]``, mixed over counts."""
    _require_gaussian(model)
    trunc = trunc or truncation_for(model)
    t = _terms(model, trunc)
    rho = model.rho
    f2 = np.exp(-0.5 * (t.mu2 / t.s2) ** 2) / (math.sqrt(2.0 * math.pi) * t.s2)
    cond = _folded_normal_mean(t.mu1 - rho * t.s1 * t.mu2 / t.s2, t.s1 * math.sqrt(1.0 - rho * rho))
    return float((f2 * cond) @ t.weight) * model.d_over_s


def _density_callable(model, trunc, conditioned):
    trunc = trunc or truncation_for(model)
    return lambda x: quotient_density_values(np.ravel(x), model, trunc, conditioned)[0].reshape(np.shape(x))


def density_of_rb(y, model: QuotientModel, trunc: SeriesTruncation | None = None, conditioned: bool = False):
    """Density of ``r(W) = W - 1/W``."""
    return pushforward_density(_density_callable(model, trunc, conditioned), y, None, right_only=conditioned)


def density_of_rc(
    y,
    model: QuotientModel,
    pf: PriceFunction,
    trunc: SeriesTruncation | None = None,
    conditioned: bool = False,
):
    """Density of ``G_eps(W)``."""
    return pushforward_density(_density_callable(model, trunc, conditioned), y, pf, right_only=conditioned)


def cdf_from_density(density, points, support: Literal["real", "positive"] = "real", panels: int = 200):
    """CDF at ``points`` by integrating a vectorized density after ``x = tan(theta)``.

    The substitution maps the line onto a bounded interval on which
    ``f(tan theta) sec^2 theta`` stays bounded for densities with at least
    ``|x|^-2`` decay.  Gauss-Legendre panels are accumulated cumulatively.
    """
    points = np.atleast_1d(np.asarray(points, dtype=float))
    lo = 0.0 if support == "positive" else -math.pi / 2
    theta_pts = np.arctan(points)
    edges = np.union1d(np.linspace(lo, math.pi / 2, panels + 1), theta_pts[theta_pts > lo])
    nodes, weights = np.polynomial.legendre.leggauss(8)
    a, b = edges[:-1], edges[1:]
    th = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * nodes[None, :]
    inner = np.abs(th) < math.pi / 2
    x = np.tan(np.where(inner, th, 0.0))
    with np.errstate(over="ignore"):
        fx = np.asarray(density(x.ravel())).reshape(x.shape)
        integrand = np.where(inner, fx / np.cos(th) ** 2, 0.0)
    mass = 0.5 * (b - a) * (integrand @ weights)
    cum = np.concatenate([[0.0], np.cumsum(mass)])
    return np.interp(theta_pts, edges, cum)
