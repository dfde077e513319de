"""Deterministic fluid limit and asymptotic final proportions of ignorants.

The final B-ignorant fraction is the root of

    f(x) = y10 + (1+p) x10 [1 - (x/x20)^r] + (x20 - x) + C ln(x/x20),

with ``r = lambda/alpha`` and ``C = ((lambda - alpha) theta + alpha)/alpha``,
taken on the branch where ``f' >= 0``.  Written in ``u = ln(x/x20)`` the
function becomes

    h(u) = y10 - (1+p) x10 expm1(r u) - x20 expm1(u) + C u,

which is strictly concave on ``(-inf, 0]``.  The ascending branch is
therefore ``u <= u*`` with ``h'(u*) = 0`` and the root is unique on it; the
solver works in ``u`` and maps back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .model import InitialFractions, ModelParams

ROOT_XTOL = 1e-15
RESIDUAL_TOL = 1e-12
INV_E = math.exp(-1.0)


class NumericalError(RuntimeError):
    """A root or quadrature could not be brought inside its tolerance."""


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class Diagnostics:
    """Thresholds of the ``lambda < alpha`` case: ``a``, ``b`` and the
    inflection point ``xbar`` of ``f``."""

    a: float
    b: float
    xbar: float


@dataclass(frozen=True)
class AsymptoticSolution:
    x1_inf: float
    x2_inf: float
    tau_inf: float
    y1_prime_at_tau: float
    degenerate: bool = False
    diagnostics: Optional[Diagnostics] = None
    log_ratio: float = 0.0  # ln(x2_inf / x20)

    def to_dict(self) -> dict:
        diag = None
        if self.diagnostics is not None:
            d = self.diagnostics
            diag = {"a": d.a, "b": d.b, "xbar": d.xbar}
        return {
            "x1_inf": self.x1_inf,
            "x2_inf": self.x2_inf,
            "tau_inf": self.tau_inf,
            "y1_prime_at_tau": self.y1_prime_at_tau,
            "degenerate": self.degenerate,
            "diagnostics": diag,
        }


def _log_coefficient(params: ModelParams) -> float:
    if params.ratio == 1.0:
        return 1.0
    return ((params.lam - params.alpha) * params.theta + params.alpha) / params.alpha


def f_eval(params: ModelParams, init: InitialFractions, x: float) -> float:
    if not 0.0 < x <= init.x20:
        raise DomainError(f"x must lie in (0, x20={init.x20}], got {x}")
    q = x / init.x20
    return (
        init.y10
        + (1.0 + params.p) * init.x10 * (1.0 - q ** params.ratio)
        + (init.x20 - x)
        + _log_coefficient(params) * math.log(q)
    )


def f_prime(params: ModelParams, init: InitialFractions, x: float) -> float:
    if not 0.0 < x <= init.x20:
        raise DomainError(f"x must lie in (0, x20={init.x20}], got {x}")
    r = params.ratio
    return (
        -(1.0 + params.p) * init.x10 * r * x ** (r - 1.0) / init.x20 ** r
        - 1.0
        + _log_coefficient(params) / x
    )


def f_second(params: ModelParams, init: InitialFractions, x: float) -> float:
    r = params.ratio
    return (
        -(1.0 + params.p) * init.x10 * r * (r - 1.0) * x ** (r - 2.0) / init.x20 ** r
        - _log_coefficient(params) / x**2
    )


def _h(u: float, r: float, c: float, p: float, init: InitialFractions) -> float:
    return (
        init.y10
        - (1.0 + p) * init.x10 * math.expm1(r * u)
        - init.x20 * math.expm1(u)
        + c * u
    )


def _dh(u: float, r: float, c: float, p: float, init: InitialFractions) -> float:
    return -(1.0 + p) * init.x10 * r * math.exp(r * u) - init.x20 * math.exp(u) + c


def bracket_diagnostics(params: ModelParams, init: InitialFractions) -> Optional[Diagnostics]:
    """The thresholds ``a``, ``b`` and inflection point ``xbar``; only
    defined for ``lambda < alpha``."""
    lam, alpha, p, theta = params.lam, params.alpha, params.p, params.theta
    if not lam < alpha or params.ratio == 1.0:
        return None
    a = (alpha - alpha * init.x20 - lam * init.x10 * (1 + p)) / (alpha - lam)
    b = (alpha**2 - lam * init.x10 * (1 + p) * (alpha - lam)) / (alpha * (alpha - lam))
    base = (alpha + (lam - alpha) * theta) * alpha / (init.x10 * lam * (alpha - lam) * (1 + p))
    xbar = init.x20 * base ** (alpha / lam)
    return Diagnostics(a, b, xbar)


def solve_asymptotics(params: ModelParams, init: InitialFractions) -> AsymptoticSolution:
    """Final ignorant fractions, deterministic absorption time and the slope
    of the spreader density there.

    With ``y10 = 0`` and ``f'(x20) >= 0`` no outbreak occurs; the
    degenerate solution ``(x10, x20, tau=0)`` is returned and flagged.
    """
    r = params.ratio
    c = _log_coefficient(params)
    p = params.p

    def h(u):
        return _h(u, r, c, p, init)

    def dh(u):
        return _dh(u, r, c, p, init)

    diagnostics = bracket_diagnostics(params, init)

    # upper end of the ascending branch
    if dh(0.0) >= 0.0:
        u_hi = 0.0
    else:
        u_pos = -1.0
        while dh(u_pos) <= 0.0:
            u_pos *= 2.0
            if u_pos < -1e6:
                raise NumericalError("could not bracket the maximiser of f")
        u_hi = brentq(dh, u_pos, 0.0, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)

    h_hi = h(u_hi)
    if h_hi == 0.0 or (u_hi == 0.0 and init.y10 == 0.0):
        u = u_hi
    else:
        if h_hi < 0.0:
            raise NumericalError(
                f"f is negative at its maximiser (u={u_hi}, h={h_hi}); diagnostics={diagnostics}"
            )
        # h(u) <= y10 + (1+p) x10 + x20 + c u, negative below this point
        u_lo = -(init.y10 + (1.0 + p) * init.x10 + init.x20) / c - 1.0
        while h(u_lo) >= 0.0:
            u_lo *= 2.0
            if u_lo < -1e6:
                raise NumericalError(f"could not bracket the root of f; diagnostics={diagnostics}")
        u = brentq(h, u_lo, u_hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)
        if abs(h(u)) > RESIDUAL_TOL:
            raise NumericalError(f"root residual {h(u)} above {RESIDUAL_TOL}")

    x2_inf = init.x20 * math.exp(u)
    x1_inf = init.x10 * math.exp(r * u)
    tau = -u / params.alpha + 0.0  # no negative zero
    slope = params.lam * ((1.0 + p) * x1_inf - params.theta) - params.alpha * (
        1.0 - params.theta - x2_inf
    )
    return AsymptoticSolution(
        x1_inf=x1_inf,
        x2_inf=x2_inf,
        tau_inf=tau,
        y1_prime_at_tau=slope,
        degenerate=(u == 0.0),
        diagnostics=diagnostics,
        log_ratio=u,
    )


def lambert_w0(x: float, *, max_iter: int = 10) -> float:
    """Principal branch of the Lambert W function for real ``x >= -1/e``.

    Halley iteration from a branch-point series (near ``-1/e``) or a
    logarithmic guess.  Arguments below ``-1/e`` by no more than a few ulps,
    as produced by rounding ``-c*exp(-c)`` at ``c = 1``, are mapped to -1.
    """
    if x < -INV_E:
        if x >= -INV_E * (1.0 + 8 * np.finfo(float).eps):
            return -1.0
        raise DomainError(f"lambert_w0 needs x >= -1/e, got {x!r}")
    if x == 0.0:
        return 0.0
    if x == -INV_E:
        return -1.0
    if x < -0.25:
        q = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + q - q * q / 3.0 + 11.0 / 72.0 * q**3
    elif x < 3.0:
        w = math.log1p(x) * (1.0 - math.log1p(math.log1p(x)) / (2.0 + math.log1p(x)))
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(max_iter):
        ew = math.exp(w)
        fw = w * ew - x
        if fw == 0.0:
            break
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        dw = fw / (ew * wp1 - (w + 2.0) * fw / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 1e-16 * (1.0 + abs(w)):
            break
    return max(w, -1.0)


def lambert_solution(params: ModelParams, init: InitialFractions) -> Tuple[float, float]:
    """Closed-form final fractions for ``alpha == lambda`` and ``p == 1``."""
    if params.ratio != 1.0 or params.p != 1.0:
        raise DomainError("closed form needs alpha == lambda and p == 1")
    c = 2.0 * init.x10 + init.x20
    w = lambert_w0(-c * math.exp(-(init.y10 + c)))
    return (-init.x10 / c * w, -init.x20 / c * w)


@dataclass(frozen=True)
class DeterministicPath:
    """Closed-form solution of the fluid-limit ODE from ``init``."""

    params: ModelParams
    init: InitialFractions

    def x1(self, t):
        return self.init.x10 * np.exp(-self.params.lam * t)

    def x2(self, t):
        return self.init.x20 * np.exp(-self.params.alpha * t)

    def y1(self, t):
        prm, ini = self.params, self.init
        return (
            ini.y10
            + (1.0 + prm.p) * (ini.x10 - self.x1(t))
            + (ini.x20 - self.x2(t))
            + (prm.theta * (prm.alpha - prm.lam) - prm.alpha) * t
        )

    def __call__(self, t):
        return self.x1(t), self.x2(t), self.y1(t)


def path_eval(path: DeterministicPath, t):
    if np.any(np.asarray(t) < 0):
        raise DomainError("time must be >= 0")
    return path(t)


def y1_prime_at(params: ModelParams, init: InitialFractions, t):
    path = DeterministicPath(params, init)
    return params.lam * ((1.0 + params.p) * path.x1(t) - params.theta) - params.alpha * (
        1.0 - params.theta - path.x2(t)
    )
