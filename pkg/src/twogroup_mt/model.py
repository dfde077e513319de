"""Parameters, population states and transition rates of the two-group
Maki-Thompson chain.

The chain acts on ``(X1, X2, Y1)``: A-ignorants, B-ignorants and
A-spreaders.  Stiflers ``Z`` are carried along so that every state can be
checked for conservation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

FRACTION_SUM_TOL = 1e-12


class ValidationError(ValueError):
    """Base class for rejected parameter / initial-condition combinations."""


class RateError(ValidationError):
    """A contact rate is not strictly positive."""


class FractionRangeError(ValidationError):
    """A probability or fraction lies outside its admissible range."""


class FractionSumError(ValidationError):
    """Initial fractions do not add up to one."""


class GroupConsistencyError(ValidationError):
    """Initial fractions (or counts) do not fit inside the two groups."""


class AbsorbedStateError(ValueError):
    """Operation needs at least one spreader."""


class Transition(enum.IntEnum):
    """The four transitions of the chain, acting on ``(X1, X2, Y1)``."""

    SPREAD = 0  # A-ignorant told by a spreader, becomes a spreader
    B_CONTACT = 1  # B-ignorant told, becomes a stifler
    STIFLE = 2  # spreader meets an informed individual, becomes a stifler
    A_REJECT = 3  # A-ignorant told, becomes a stifler directly

    @property
    def increment(self) -> Tuple[int, int, int]:
        return INCREMENTS[self]

    @property
    def label(self) -> str:
        return f"l{int(self) + 1}"

    @classmethod
    def from_label(cls, label: str) -> "Transition":
        return cls(int(label.lstrip("l")) - 1)


INCREMENTS = ((-1, 0, 1), (0, -1, 0), (0, 0, -1), (-1, 0, 0))
INCREMENT_MATRIX = np.array(INCREMENTS, dtype=float)


@dataclass(frozen=True)
class ModelParams:
    theta: float  # share of group A
    lam: float  # A -> A contact rate
    alpha: float  # A -> B contact rate
    p: float  # probability an A-ignorant becomes a spreader

    @property
    def ratio(self) -> float:
        """lambda/alpha, snapped to exactly 1 when the rates agree to 1e-12."""
        if math.isclose(self.lam, self.alpha, rel_tol=1e-12, abs_tol=0.0):
            return 1.0
        return self.lam / self.alpha


@dataclass(frozen=True)
class InitialFractions:
    x10: float
    x20: float
    y10: float
    z0: float

    @classmethod
    def from_ignorants(cls, x10: float, x20: float, y10: float) -> "InitialFractions":
        return cls(x10, x20, y10, 1.0 - x10 - x20 - y10)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x10, self.x20, self.y10, self.z0)


@dataclass(frozen=True)
class PopulationState:
    x1: int
    x2: int
    y1: int
    z: int
    n: int
    n1: int
    n2: int

    def check(self) -> None:
        """Raise ``GroupConsistencyError`` if any count invariant fails."""
        counts = (self.x1, self.x2, self.y1, self.z, self.n1, self.n2)
        if min(counts) < 0:
            raise GroupConsistencyError(f"negative count in {self}")
        if self.x1 + self.x2 + self.y1 + self.z != self.n:
            raise GroupConsistencyError(f"counts do not sum to n in {self}")
        if self.n1 + self.n2 != self.n:
            raise GroupConsistencyError(f"group sizes do not sum to n in {self}")
        if self.x1 + self.y1 > self.n1 or self.x2 > self.n2:
            raise GroupConsistencyError(f"counts exceed group sizes in {self}")

    @property
    def absorbed(self) -> bool:
        return self.y1 == 0

    def apply(self, kind: Transition) -> "PopulationState":
        d1, d2, d3 = INCREMENTS[kind]
        # every transition moves exactly one individual into the stifler class
        # except SPREAD, which moves an A-ignorant to the spreaders
        dz = 0 if kind == Transition.SPREAD else 1
        return PopulationState(
            self.x1 + d1, self.x2 + d2, self.y1 + d3, self.z + dz, self.n, self.n1, self.n2
        )

    def fractions(self) -> Tuple[float, float, float]:
        return (self.x1 / self.n, self.x2 / self.n, self.y1 / self.n)


def validate(
    params: ModelParams, init: InitialFractions
) -> Tuple[ModelParams, InitialFractions]:
    """Check every parameter and initial-fraction invariant.

    Returns the pair unchanged; raises a specific ``ValidationError``
    subclass for the first violated invariant.
    """
    if not (params.lam > 0 and math.isfinite(params.lam)):
        raise RateError(f"lambda must be > 0, got {params.lam}")
    if not (params.alpha > 0 and math.isfinite(params.alpha)):
        raise RateError(f"alpha must be > 0, got {params.alpha}")
    if not 0.0 <= params.p <= 1.0:
        raise FractionRangeError(f"p must lie in [0, 1], got {params.p}")
    if not 0.0 <= params.theta <= 1.0:
        raise FractionRangeError(f"theta must lie in [0, 1], got {params.theta}")
    if not (init.x10 > 0 and init.x20 > 0):
        raise FractionRangeError(
            f"x10 and x20 must be > 0, got x10={init.x10}, x20={init.x20}"
        )
    if init.y10 < 0 or init.z0 < 0:
        raise FractionRangeError(
            f"y10 and z0 must be >= 0, got y10={init.y10}, z0={init.z0}"
        )
    total = math.fsum(init.as_tuple())
    if abs(total - 1.0) > FRACTION_SUM_TOL:
        raise FractionSumError(f"initial fractions sum to {total!r}, not 1")
    if init.x10 + init.y10 > params.theta + FRACTION_SUM_TOL:
        raise GroupConsistencyError(
            f"x10 + y10 = {init.x10 + init.y10} exceeds theta = {params.theta}"
        )
    if init.x20 > 1.0 - params.theta + FRACTION_SUM_TOL:
        raise GroupConsistencyError(
            f"x20 = {init.x20} exceeds 1 - theta = {1.0 - params.theta}"
        )
    return params, init


def _largest_remainder(shares, n: int) -> list:
    exact = [s * n for s in shares]
    counts = [math.floor(e) for e in exact]
    left = n - sum(counts)
    # stable sort keeps declaration order among equal remainders
    order = sorted(range(len(exact)), key=lambda i: -(exact[i] - counts[i]))
    for i in order[:left]:
        counts[i] += 1
    return counts


def discretize(params: ModelParams, init: InitialFractions, n: int) -> PopulationState:
    """Round the initial fractions to integer counts for a population of ``n``.

    Both the class counts and the group sizes use largest-remainder rounding,
    ties going to the earlier field, so the counts sum to ``n`` exactly.
    """
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")
    x1, x2, y1, z = _largest_remainder(init.as_tuple(), n)
    n1, n2 = _largest_remainder((params.theta, 1.0 - params.theta), n)
    state = PopulationState(x1, x2, y1, z, n, n1, n2)
    try:
        state.check()
    except GroupConsistencyError as exc:
        raise GroupConsistencyError(
            f"rounding to n={n} cannot respect the group sizes: {exc}"
        ) from None
    return state


def rates(params: ModelParams, s: PopulationState) -> Tuple[float, float, float, float]:
    """Transition rates of the original chain, indexed by ``Transition``.

    Every rate carries the factor ``Y1``; it is applied last so that the
    per-spreader part is computed exactly as in ``time_changed_rates``.
    """
    y = s.y1
    return tuple(b * y for b in time_changed_rates(params, s))


def time_changed_rates(
    params: ModelParams, s: PopulationState
) -> Tuple[float, float, float, float]:
    """Rates of the chain run with its clock slowed by the spreader count."""
    lam, alpha, p = params.lam, params.alpha, params.p
    return (
        lam * p * s.x1,
        alpha * s.x2,
        alpha * (s.n2 - s.x2) + lam * (s.n1 - s.x1),
        lam * (1.0 - p) * s.x1,
    )


def beta(params: ModelParams, v) -> np.ndarray:
    """Rate densities of the time-changed family at density ``v = (x1, x2, y1)``.

    ``N * beta(counts / N)`` reproduces ``time_changed_rates`` when the group
    share ``theta`` equals ``n1 / n``.
    """
    x1, x2, _ = v
    lam, alpha, p, theta = params.lam, params.alpha, params.p, params.theta
    return np.array(
        [
            lam * p * x1,
            alpha * x2,
            alpha * (1.0 - theta - x2) + lam * (theta - x1),
            lam * (1.0 - p) * x1,
        ]
    )


def normalize(r) -> Tuple[float, ...]:
    total = math.fsum(r)
    if total <= 0.0:
        raise AbsorbedStateError("all rates vanish")
    return tuple(ri / total for ri in r)


def jump_probabilities(params: ModelParams, s: PopulationState) -> Tuple[float, ...]:
    """Probabilities of the next transition from ``s`` (embedded jump chain)."""
    if s.y1 <= 0:
        raise AbsorbedStateError(f"state has no spreaders: {s}")
    return normalize(time_changed_rates(params, s))


def potential(s: PopulationState) -> int:
    """``2*X1 + X2 + Y1``; drops by at least one at every transition."""
    return 2 * s.x1 + s.x2 + s.y1
