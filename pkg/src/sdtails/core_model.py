"""Parameter types and jump-count laws for the demand/supply quotient model.

Each leg of the pair is a jump-diffusion increment over an interval ``dt``::

    R = mu0 + (sigma0 / 2) * dW + sum_{i <= K} Y_i,    Y_i ~ N(jump_mu, jump_sigma**2)

with ``dW ~ N(0, dt)`` and ``K`` a Poisson count.  Conditioned on the two
counts, the pair is bivariate normal (or, for the anti-correlated model, the
two legs share a single noise source).  Brownian variance scales with ``dt``
while the variance of a single jump does not.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import MISSING, asdict, dataclass, fields
from typing import Any, Union

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy


def _finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class LegParams:
    mu0: float
    sigma0: float
    jump_mu: float = 0.0
    jump_sigma: float = 0.0

    def __post_init__(self) -> None:
        for f in fields(self):
            _finite(f.name, getattr(self, f.name))
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be > 0, got {self.sigma0}")
        if self.jump_sigma < 0:
            raise ValueError(f"jump_sigma must be >= 0, got {self.jump_sigma}")


@dataclass(frozen=True)
class Independent:
    """Two independent Poisson counts with rates ``lambda1`` and ``lambda2``."""

    lambda1: float
    lambda2: float

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            _finite(f.name, v)
            if v < 0:
                raise ValueError(f"{f.name} must be >= 0, got {v}")

    @property
    def marginal_rates(self) -> tuple[float, float]:
        return self.lambda1, self.lambda2


@dataclass(frozen=True)
class Bivariate:
    """Bivariate Poisson built from three independent Poissons.

    ``N = N01 + N12`` and ``Ntilde = N02 + N12``.
    """

    lambda01: float
    lambda02: float
    lambda12: float

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            _finite(f.name, v)
            if v < 0:
                raise ValueError(f"{f.name} must be >= 0, got {v}")

    @property
    def marginal_rates(self) -> tuple[float, float]:
        return self.lambda01 + self.lambda12, self.lambda02 + self.lambda12

    def scaled(self, factor: float) -> "Bivariate":
        return Bivariate(self.lambda01 * factor, self.lambda02 * factor, self.lambda12 * factor)


JumpCountModel = Union[Independent, Bivariate]


@dataclass(frozen=True)
class Conditional:
    """Gaussian correlation ``rho`` between the legs given the jump counts."""

    rho: float

    def __post_init__(self) -> None:
        _finite("rho", self.rho)
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie strictly inside (-1, 1), got {self.rho}")


@dataclass(frozen=True)
class AntiCorrelated:
    """Both legs driven by one Brownian increment and one compound-Poisson sum, with opposite signs."""


CorrelationSpec = Union[Conditional, AntiCorrelated]


@dataclass(frozen=True)
class QuotientModel:
    demand: LegParams
    supply: LegParams
    jumps: JumpCountModel
    corr: CorrelationSpec
    dt: float = 1.0
    d_over_s: float = 1.0

    def __post_init__(self) -> None:
        _finite("dt", self.dt)
        _finite("d_over_s", self.d_over_s)
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.d_over_s <= 0:
            raise ValueError(f"d_over_s must be > 0, got {self.d_over_s}")
        if isinstance(self.corr, AntiCorrelated):
            d, s = self.demand, self.supply
            if d.sigma0 != s.sigma0 or d.jump_sigma != s.jump_sigma:
                raise ValueError("AntiCorrelated legs must share sigma0 and jump_sigma")
            if d.jump_mu != -s.jump_mu:
                raise ValueError("AntiCorrelated requires supply.jump_mu == -demand.jump_mu")
            if not isinstance(self.jumps, Independent) or self.jumps.lambda1 != self.jumps.lambda2:
                raise ValueError("AntiCorrelated requires Independent jumps with lambda1 == lambda2")

    @property
    def count_means(self) -> tuple[float, float]:
        """Expected number of jumps per leg over one interval."""
        l1, l2 = self.jumps.marginal_rates
        return l1 * self.dt, l2 * self.dt

    @property
    def rho(self) -> float:
        if isinstance(self.corr, AntiCorrelated):
            raise TypeError("AntiCorrelated model has no Gaussian correlation parameter")
        return self.corr.rho


@dataclass(frozen=True)
class PriceFunction:
    q: float = 3.0
    epsilon: float = 1e-3
    tau0: float = 1.0

    def __post_init__(self) -> None:
        for f in fields(self):
            _finite(f.name, getattr(self, f.name))
        if self.q <= 0:
            raise ValueError(f"q must be > 0, got {self.q}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.tau0 <= 0:
            raise ValueError(f"tau0 must be > 0, got {self.tau0}")


# ---------------------------------------------------------------------------
# Jump-count laws


def poisson_pmf(k, mean: float):
    """Poisson probability of ``k`` events, evaluated in log space."""
    if not mean >= 0:
        raise ValueError(f"Poisson mean must be >= 0, got {mean}")
    _finite("mean", mean)
    k = np.asarray(k)
    if np.any(k < 0):
        raise ValueError("k must be non-negative")
    out = np.exp(xlogy(k, mean) - mean - gammaln(k + 1.0))
    return out if out.ndim else float(out)


def _bivariate_log_table(model: Bivariate, k_max: int, l_max: int) -> np.ndarray:
    k = np.arange(k_max + 1)[:, None, None]
    l = np.arange(l_max + 1)[None, :, None]
    j = np.arange(min(k_max, l_max) + 1)[None, None, :]
    valid = (j <= k) & (j <= l)
    kj = np.where(valid, k - j, 0)
    lj = np.where(valid, l - j, 0)
    terms = (
        xlogy(kj, model.lambda01)
        + xlogy(lj, model.lambda02)
        + xlogy(j, model.lambda12)
        - gammaln(kj + 1.0)
        - gammaln(lj + 1.0)
        - gammaln(j + 1.0)
    )
    terms = np.where(valid, terms, -np.inf)
    total = model.lambda01 + model.lambda02 + model.lambda12
    return logsumexp(terms, axis=2) - total


def bivariate_pmf(k: int, l: int, model: Bivariate) -> float:
    """P(N = k, Ntilde = l) for a bivariate Poisson with the given rates."""
    if not isinstance(model, Bivariate):
        raise TypeError("bivariate_pmf requires a Bivariate jump-count model")
    if k < 0 or l < 0:
        raise ValueError("counts must be non-negative")
    return float(np.exp(_bivariate_log_table(model, int(k), int(l))[k, l]))


def bivariate_pmf_table(model: Bivariate, k_max: int, l_max: int | None = None) -> np.ndarray:
    """Array ``P[k, l]`` for ``0 <= k <= k_max``, ``0 <= l <= l_max``."""
    if not isinstance(model, Bivariate):
        raise TypeError("bivariate_pmf_table requires a Bivariate jump-count model")
    l_max = k_max if l_max is None else l_max
    return np.exp(_bivariate_log_table(model, k_max, l_max))


def jump_correlation(model: JumpCountModel) -> float:
    l1, l2 = model.marginal_rates
    if l1 <= 0 and l2 <= 0:
        raise ValueError("jump correlation undefined when both marginal rates are zero")
    if isinstance(model, Independent):
        return 0.0
    if l1 <= 0 or l2 <= 0:
        return 0.0
    return model.lambda12 / (math.sqrt(l1) * math.sqrt(l2))


def count_weights(model: QuotientModel, k_max: int) -> np.ndarray:
    """Joint weights ``p(k1, k2)`` on ``[0, k_max]^2`` with means scaled by ``dt``.

    For the anti-correlated model the two legs share one count, so the table
    is diagonal.
    """
    dt = model.dt
    ks = np.arange(k_max + 1)
    jumps = model.jumps
    if isinstance(model.corr, AntiCorrelated):
        return np.diag(poisson_pmf(ks, jumps.lambda1 * dt))
    if isinstance(jumps, Independent):
        return np.outer(poisson_pmf(ks, jumps.lambda1 * dt), poisson_pmf(ks, jumps.lambda2 * dt))
    return bivariate_pmf_table(jumps.scaled(dt), k_max)


def conditional_moments(model: QuotientModel, k1, k2):
    """Mean and standard deviation of each leg given the jump counts.

    Accepts scalars or broadcastable integer arrays.
    """
    d, s = model.demand, model.supply
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    mu1 = d.mu0 + k1 * d.jump_mu
    mu2 = s.mu0 + k2 * s.jump_mu
    sd1 = np.sqrt((d.sigma0 / 2.0) ** 2 * model.dt + k1 * d.jump_sigma**2)
    sd2 = np.sqrt((s.sigma0 / 2.0) ** 2 * model.dt + k2 * s.jump_sigma**2)
    if mu1.ndim == 0 and mu2.ndim == 0:
        return float(mu1), float(mu2), float(sd1), float(sd2)
    return mu1, mu2, sd1, sd2


# ---------------------------------------------------------------------------
# JSON round trip


def _strict(cls, data: dict[str, Any], ignore: tuple[str, ...] = ()):
    if not isinstance(data, dict):
        raise ValueError(f"{cls.__name__} expects a JSON object")
    names = {f.name for f in fields(cls)}
    extra = set(data) - names - set(ignore)
    if extra:
        raise ValueError(f"unknown keys for {cls.__name__}: {sorted(extra)}")
    required = {f.name for f in fields(cls) if f.default is MISSING}
    missing = required - set(data)
    if missing:
        raise ValueError(f"missing keys for {cls.__name__}: {sorted(missing)}")
    return cls(**{k: float(v) for k, v in data.items() if k in names})


_JUMP_VARIANTS = {"Independent": Independent, "Bivariate": Bivariate}
_CORR_VARIANTS = {"Conditional": Conditional, "AntiCorrelated": AntiCorrelated}


def _variant_from_dict(table, data, what):
    if not isinstance(data, dict) or "variant" not in data:
        raise ValueError(f"{what} requires a 'variant' key")
    cls = table.get(data["variant"])
    if cls is None:
        raise ValueError(f"unknown {what} variant {data['variant']!r}")
    return _strict(cls, data, ignore=("variant",))


def _variant_to_dict(obj) -> dict[str, Any]:
    return {"variant": type(obj).__name__, **asdict(obj)}


def model_to_dict(model: QuotientModel) -> dict[str, Any]:
    return {
        "demand": asdict(model.demand),
        "supply": asdict(model.supply),
        "jumps": _variant_to_dict(model.jumps),
        "corr": _variant_to_dict(model.corr),
        "dt": model.dt,
        "d_over_s": model.d_over_s,
    }


def model_from_dict(data: dict[str, Any]) -> QuotientModel:
    if not isinstance(data, dict):
        raise ValueError("QuotientModel expects a JSON object")
    allowed = {"demand", "supply", "jumps", "corr", "dt", "d_over_s"}
    extra = set(data) - allowed
    if extra:
        raise ValueError(f"unknown keys for QuotientModel: {sorted(extra)}")
    missing = {"demand", "supply", "jumps", "corr"} - set(data)
    if missing:
        raise ValueError(f"missing keys for QuotientModel: {sorted(missing)}")
    return QuotientModel(
        demand=_strict(LegParams, data["demand"]),
        supply=_strict(LegParams, data["supply"]),
        jumps=_variant_from_dict(_JUMP_VARIANTS, data["jumps"], "jumps"),
        corr=_variant_from_dict(_CORR_VARIANTS, data["corr"], "corr"),
        dt=float(data.get("dt", 1.0)),
        d_over_s=float(data.get("d_over_s", 1.0)),
    )


def price_function_to_dict(pf: PriceFunction) -> dict[str, Any]:
    return asdict(pf)


def price_function_from_dict(data: dict[str, Any]) -> PriceFunction:
    if not isinstance(data, dict):
        raise ValueError("PriceFunction expects a JSON object")
    extra = set(data) - {"q", "epsilon", "tau0"}
    if extra:
        raise ValueError(f"unknown keys for PriceFunction: {sorted(extra)}")
    return PriceFunction(**{k: float(v) for k, v in data.items()})


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def digest(data: Any) -> str:
    """SHA-256 of the canonical JSON encoding."""
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


def model_digest(model: QuotientModel) -> str:
    return digest(model_to_dict(model))
