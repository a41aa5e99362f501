"""The maps r(x) = x - 1/x and G_eps, their inverse branches, and density pushforwards.

G is built in two stages: ``u = r(x)`` followed by the odd power law
``u -> sgn(u)|u|**(1/q)``, optionally mollified near ``u = 0`` as
``u * (u**2 + eps**2) ** ((1 - q) / (2 q))``.  Both stages are monotone on
each half-line ``x > 0`` and ``x < 0``, so every ``y`` has exactly one
preimage on the right branch and one on the left.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.optimize import elementwise

from .core_model import PriceFunction

Branch = Literal["right", "left"]


@dataclass(frozen=True)
class BranchInverse:
    branch: Branch
    region: Literal["upper", "lower"]
    value: float
    derivative: float


def _nonzero(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise ValueError("argument must be non-zero")
    return x


def r(x):
    x = _nonzero(x)
    out = x - 1.0 / x
    return out if out.ndim else float(out)


def h_plus(y):
    """Positive root of ``x**2 - y x - 1 = 0``, written without cancellation."""
    y = np.asarray(y, dtype=float)
    root = np.hypot(y, 2.0)
    with np.errstate(divide="ignore"):
        return np.where(y >= 0, 0.5 * (y + root), 2.0 / (root - y))


def h_minus(y):
    y = np.asarray(y, dtype=float)
    return -h_plus(-y)


def _h_derivative(x):
    # dx/dy = 1 / r'(x) = x^2 / (1 + x^2)
    x2 = np.square(x)
    return x2 / (1.0 + x2)


def h_branch(y: float, branch: Branch) -> BranchInverse:
    if branch not in ("right", "left"):
        raise ValueError(f"unknown branch {branch!r}")
    x = h_plus(y) if branch == "right" else h_minus(y)
    return BranchInverse(
        branch=branch,
        region="upper" if y >= 0 else "lower",
        value=float(x),
        derivative=float(_h_derivative(x)),
    )


# ---------------------------------------------------------------------------
# The power-law stage u -> G_eps(u)


def g_of_u(u, q: float, eps: float):
    u = np.asarray(u, dtype=float)
    if eps == 0:
        return np.sign(u) * np.abs(u) ** (1.0 / q)
    return u * (u * u + eps * eps) ** ((1.0 - q) / (2.0 * q))


def g_of_u_derivative(u, q: float, eps: float):
    u = np.asarray(u, dtype=float)
    s = u * u + eps * eps
    with np.errstate(divide="ignore"):
        return (eps * eps + u * u / q) * s ** ((1.0 - 3.0 * q) / (2.0 * q))


def _u_bracket(y, q, eps):
    # For |u| >= eps, u^2 + eps^2 <= 2u^2 sandwiches G_eps against the eps = 0 power law.
    # The closed-form end is nudged outward so rounding cannot invalidate the bracket.
    u0 = y**q
    b = u0 * 2.0 ** ((q - 1.0) / 2.0)
    if q > 1:
        return u0 * (1.0 - 1e-9), np.maximum(b, eps) * (1.0 + 1e-9)
    return np.where(b >= eps, b * (1.0 - 1e-9), 0.0), u0 * (1.0 + 1e-9)


def g_inverse_u(y, q: float, eps: float):
    """Solve ``G_eps(u) = y`` for ``u`` (vectorized, odd in ``y``)."""
    y = np.asarray(y, dtype=float)
    ay = np.abs(y)
    if eps == 0 or q == 1:
        return np.sign(y) * ay**q
    u = np.zeros_like(ay)
    pos = ay > 0
    if np.any(pos):
        lo, hi = _u_bracket(ay[pos], q, eps)
        target = ay[pos]
        res = elementwise.find_root(
            lambda t, yy: g_of_u(t, q, eps) - yy,
            (lo, hi),
            args=(target,),
            tolerances=dict(xatol=1e-12, xrtol=4 * np.finfo(float).eps),
        )
        if not np.all(res.success):
            raise ArithmeticError("G_eps inverse did not converge")
        u[pos] = res.x
    return np.sign(y) * u


def _g_inverse_u_derivative(y, u, q, eps):
    if eps == 0:
        with np.errstate(divide="ignore"):
            return q * np.abs(y) ** (q - 1.0)
    return 1.0 / g_of_u_derivative(u, q, eps)


def g_eps(x, pf: PriceFunction):
    out = g_of_u(r(x), pf.q, pf.epsilon)
    return out if out.ndim else float(out)


def g_eps_derivative(x, pf: PriceFunction):
    """Analytic dG/dx = G'(u) * r'(x)."""
    x = _nonzero(x)
    u = x - 1.0 / x
    return g_of_u_derivative(u, pf.q, pf.epsilon) * (1.0 + 1.0 / (x * x))


def inverse_branches(y, pf: PriceFunction | None = None):
    """Right and left preimages of ``y`` with their derivatives dx/dy.

    ``pf=None`` inverts r alone.  Returns ``(x_right, dx_right, x_left, dx_left)``.
    """
    y = np.asarray(y, dtype=float)
    if pf is None:
        u, du = y, np.ones_like(y)
    else:
        u = g_inverse_u(y, pf.q, pf.epsilon)
        du = _g_inverse_u_derivative(y, u, pf.q, pf.epsilon)
    xr, xl = h_plus(u), h_minus(u)
    return xr, _h_derivative(xr) * du, xl, _h_derivative(xl) * du


def g_inverse_branches(y: float, pf: PriceFunction) -> list[BranchInverse]:
    xr, dr, xl, dl = inverse_branches(y, pf)
    region = "upper" if y >= 0 else "lower"
    return [
        BranchInverse("right", region, float(xr), float(dr)),
        BranchInverse("left", region, float(xl), float(dl)),
    ]


def pushforward_density(
    f_in: Callable[[np.ndarray], np.ndarray],
    y,
    pf: PriceFunction | None = None,
    right_only: bool = False,
):
    """Density of ``T(X)`` where ``X ~ f_in`` and ``T`` is r (``pf=None``) or G_eps.

    With ``right_only`` the left branch is dropped; this is the form used when
    the input law is supported on ``x > 0``.
    """
    y = np.asarray(y, dtype=float)
    xr, dr, xl, dl = inverse_branches(y, pf)
    out = np.asarray(f_in(xr)) * dr
    if not right_only:
        out = out + np.asarray(f_in(xl)) * dl
    return out if out.ndim else float(out)
