"""Gaussian fluctuations of the final ignorant fractions.

The covariance of the limiting Gaussian process ``U`` of the time-changed
chain is

    Cov(U(t), U(t)) = int_0^t phi(t, s) G(v(s)) phi(t, s)^T ds,

evaluated here by adaptive quadrature.  The 2x2 limit covariance of the
scaled final fractions is the covariance of
``(U_x1 + k1 U_y1, U_x2 + k2 U_y1)`` at the deterministic absorption time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy import stats
from scipy.integrate import quad_vec

from .limits import AsymptoticSolution, DeterministicPath, NumericalError, solve_asymptotics
from .model import INCREMENT_MATRIX, InitialFractions, ModelParams, beta

QUAD_EPSABS = 1e-10
QUAD_LIMIT = 10_000
CLOSED_FORM_ENTRIES = ("c11", "c13", "c22", "c23", "c33")
_ENTRY_INDEX = {"c11": (0, 0), "c13": (0, 2), "c22": (1, 1), "c23": (1, 2), "c33": (2, 2)}


def drift(params: ModelParams, v) -> np.ndarray:
    """``F(v) = sum_i l_i beta_i(v)``, summed in transition order."""
    b = beta(params, v)
    out = np.zeros(3)
    for li, bi in zip(INCREMENT_MATRIX, b):
        out = out + li * bi
    return out


def drift_jacobian(params: ModelParams) -> np.ndarray:
    lam, alpha, p = params.lam, params.alpha, params.p
    return np.array(
        [
            [-lam, 0.0, 0.0],
            [0.0, -alpha, 0.0],
            [lam * (1.0 + p), alpha, 0.0],
        ]
    )


def diffusion(params: ModelParams, v) -> np.ndarray:
    """``G(v) = sum_i l_i l_i^T beta_i(v)``."""
    b = beta(params, v)
    out = np.zeros((3, 3))
    for li, bi in zip(INCREMENT_MATRIX, b):
        out = out + np.outer(li, li) * bi
    return out


def fundamental_matrix(params: ModelParams, t: float, s: float) -> np.ndarray:
    if t < s:
        raise ValueError(f"need t >= s, got t={t}, s={s}")
    d = t - s
    e1 = math.exp(-params.lam * d)
    e2 = math.exp(-params.alpha * d)
    return np.array(
        [
            [e1, 0.0, 0.0],
            [0.0, e2, 0.0],
            [(1.0 + params.p) * -math.expm1(-params.lam * d), -math.expm1(-params.alpha * d), 1.0],
        ]
    )


def covariance_integrand(params: ModelParams, init: InitialFractions, t: float, s: float) -> np.ndarray:
    path = DeterministicPath(params, init)
    v = (path.x1(s), path.x2(s), 0.0)  # G does not depend on y1
    phi = fundamental_matrix(params, t, s)
    return phi @ diffusion(params, v) @ phi.T


def _fast_integrand(params: ModelParams, init: InitialFractions, t: float):
    """``covariance_integrand`` flattened, written out entry by entry.

    Only ``G11 = b1 + b4``, ``G13 = -b1``, ``G22 = b2`` and ``G33 = b1 + b3``
    are nonzero, and the last row of ``phi`` is ``(a, b, 1)``; spelling the
    product out avoids the small-matrix overhead inside the quadrature loop.
    """
    lam, alpha, p, theta = params.lam, params.alpha, params.p, params.theta
    x10, x20 = init.x10, init.x20
    exp, expm1 = math.exp, math.expm1

    def g(s):
        x1 = x10 * exp(-lam * s)
        x2 = x20 * exp(-alpha * s)
        b1 = lam * p * x1
        g11 = b1 + lam * (1.0 - p) * x1
        g22 = alpha * x2
        g33 = b1 + alpha * (1.0 - theta - x2) + lam * (theta - x1)
        d = t - s
        e1 = exp(-lam * d)
        e2 = exp(-alpha * d)
        a = (1.0 + p) * -expm1(-lam * d)
        b = -expm1(-alpha * d)
        m13 = e1 * (a * g11 - b1)
        m23 = e2 * b * g22
        m33 = a * a * g11 + b * b * g22 + g33 - 2.0 * a * b1
        return np.array([e1 * e1 * g11, 0.0, m13, 0.0, e2 * e2 * g22, m23, m13, m23, m33])

    return g


def covariance_quadrature(
    params: ModelParams, init: InitialFractions, t: float, *, epsabs: float = QUAD_EPSABS
) -> np.ndarray:
    """``Cov(U(t), U(t))`` by adaptive Gauss-Kronrod quadrature on all nine
    entries at once (max-norm error control)."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return np.zeros((3, 3))
    res, err, info = quad_vec(
        _fast_integrand(params, init, t),
        0.0,
        t,
        epsabs=epsabs,
        epsrel=0.0,
        norm="max",
        limit=QUAD_LIMIT,
        full_output=True,
    )
    if not info.success or err > epsabs:
        raise NumericalError(f"covariance quadrature did not converge (err={err}, status={info.status})")
    c = res.reshape(3, 3)
    return 0.5 * (c + c.T)


def covariance_closed_form(params: ModelParams, init: InitialFractions, t: float) -> np.ndarray:
    """The published closed-form entries of ``Cov(U(t), U(t))``, verbatim.

    ``c13`` and ``c33`` do not agree with the defining integral; use
    ``closed_form_deviation`` to see by how much.
    """
    lam, alpha, p, theta = params.lam, params.alpha, params.p, params.theta
    x10, x20 = init.x10, init.x20
    if t == 0:
        return np.zeros((3, 3))
    x1 = x10 * math.exp(-lam * t)
    x2 = x20 * math.exp(-alpha * t)
    c11 = (x1 / x10) * (x10 - x1)
    c13 = x1 * (lam * t + (1.0 + p) * (1.0 - x1 / x10))
    c22 = (x2 / x20) * (x20 - x2)
    c23 = x2 * (alpha * t - 1.0 + math.exp(-alpha * t))
    c33 = (
        x2 * (1.0 + 2.0 * alpha - math.exp(-alpha * t))
        - p * (1.0 + p) * x1 * (math.exp(lam * t) - lam * t - 1.0)
        + (p - 1.0) * (x10 - x1)
        + t * ((lam - alpha) * theta + alpha)
    )
    return np.array([[c11, 0.0, c13], [0.0, c22, c23], [c13, c23, c33]])


def closed_form_deviation(
    params: ModelParams,
    init: InitialFractions,
    t: float,
    quadrature: Optional[np.ndarray] = None,
) -> Dict[str, float]:
    """Signed ``closed_form - quadrature`` for the five published entries."""
    if quadrature is None:
        quadrature = covariance_quadrature(params, init, t)
    closed = covariance_closed_form(params, init, t)
    return {k: float(closed[ij] - quadrature[ij]) for k, ij in _ENTRY_INDEX.items()}


def linear_map(k1: float, k2: float) -> np.ndarray:
    return np.array([[1.0, 0.0, k1], [0.0, 1.0, k2]])


@dataclass
class FluctuationResult:
    tau_inf: float
    c: np.ndarray
    k1: float
    k2: float
    sigma: np.ndarray
    degenerate: bool = False
    method: str = "quadrature"
    closed_form_deviation: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tau_inf": self.tau_inf,
            "c": self.c.tolist(),
            "k1": self.k1,
            "k2": self.k2,
            "sigma": self.sigma.tolist(),
            "degenerate": self.degenerate,
            "method": self.method,
            "closed_form_deviation": dict(self.closed_form_deviation),
        }


def fluctuations(
    params: ModelParams,
    init: InitialFractions,
    asym: Optional[AsymptoticSolution] = None,
    *,
    method: str = "quadrature",
) -> FluctuationResult:
    """Covariance at the absorption time, coefficients ``k1, k2`` and Sigma.

    ``method="closed_form"`` builds Sigma from the published entries
    instead; it is only there for comparison.
    """
    if asym is None:
        asym = solve_asymptotics(params, init)
    tau = asym.tau_inf
    if asym.degenerate or not asym.y1_prime_at_tau < 0.0:
        return FluctuationResult(
            tau, np.zeros((3, 3)), 0.0, 0.0, np.zeros((2, 2)), degenerate=True, method=method
        )
    quad = covariance_quadrature(params, init, tau)
    deviation = closed_form_deviation(params, init, tau, quadrature=quad)
    if method == "quadrature":
        c = quad
    elif method == "closed_form":
        c = covariance_closed_form(params, init, tau)
    else:
        raise ValueError(f"unknown method {method!r}")
    k1 = params.lam * asym.x1_inf / asym.y1_prime_at_tau
    k2 = params.alpha * asym.x2_inf / asym.y1_prime_at_tau
    a = linear_map(k1, k2)
    s = a @ c @ a.T
    return FluctuationResult(tau, c, k1, k2, 0.5 * (s + s.T), method=method, closed_form_deviation=deviation)


def sigma(
    params: ModelParams, init: InitialFractions, asym: Optional[AsymptoticSolution] = None
) -> np.ndarray:
    """Limit covariance of ``sqrt(N) (X1(tau)/N - x1_inf, X2(tau)/N - x2_inf)``.

    Zero for the degenerate (no-outbreak) solution.
    """
    return fluctuations(params, init, asym).sigma


@dataclass
class GofReport:
    m: int
    mean: np.ndarray
    mean_se: np.ndarray
    cov: np.ndarray
    cov_rel_err: np.ndarray
    chi2_stat: float
    dof: int
    p_value: float
    ks_stat: float
    ks_p_value: float

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "mean": self.mean.tolist(),
            "mean_se": self.mean_se.tolist(),
            "cov": self.cov.tolist(),
            "cov_rel_err": self.cov_rel_err.tolist(),
            "chi2_stat": self.chi2_stat,
            "dof": self.dof,
            "p_value": self.p_value,
            "ks_stat": self.ks_stat,
            "ks_p_value": self.ks_p_value,
        }


def gof_test(fluct, sigma: np.ndarray) -> GofReport:
    """Test zero-mean bivariate normality with covariance ``sigma``.

    The squared Mahalanobis distances ``d_i^2 = z_i^T sigma^-1 z_i`` are
    chi-square(2) under the null, so their sum is chi-square(2m); the
    reported ``p_value`` is two-sided on that sum.  A Kolmogorov-Smirnov test
    of the individual ``d_i^2`` against chi-square(2) is reported alongside.
    """
    z = np.asarray(fluct, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if z.ndim != 2 or z.shape[1] != 2:
        raise ValueError(f"fluctuations must have shape (m, 2), got {z.shape}")
    m = z.shape[0]
    if m < 30:
        raise ValueError(f"need at least 30 samples, got {m}")
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("sigma is singular or not positive definite") from None
    w = np.linalg.solve(chol, z.T)
    d2 = np.sum(w * w, axis=0)
    stat = float(d2.sum())
    dof = 2 * m
    lower = stats.chi2.cdf(stat, dof)
    upper = stats.chi2.sf(stat, dof)
    p_value = float(min(1.0, 2.0 * min(lower, upper)))
    ks = stats.kstest(d2, stats.chi2(2).cdf)
    cov = np.cov(z, rowvar=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = (cov - sigma) / np.abs(sigma)
    return GofReport(
        m=m,
        mean=z.mean(axis=0),
        mean_se=z.std(axis=0, ddof=1) / math.sqrt(m),
        cov=cov,
        cov_rel_err=rel,
        chi2_stat=stat,
        dof=dof,
        p_value=p_value,
        ks_stat=float(ks.statistic),
        ks_p_value=float(ks.pvalue),
    )
