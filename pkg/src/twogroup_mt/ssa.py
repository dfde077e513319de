"""Exact simulation of the two-group chain and a reproducible ensemble runner.

Each run uses the direct method: the total rate is ``Y1 * (lambda*N1 +
alpha*N2)`` and the next transition is drawn from the jump probabilities.
Random numbers for a run come from a Philox (counter-based) generator keyed
by ``run_seed(master_seed, run_index)``, so an ensemble is a pure function of
``(inputs, master seed, m)`` whatever the number of worker threads.
"""
from __future__ import annotations

import enum
import math
import secrets
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .limits import AsymptoticSolution
from .model import InitialFractions, ModelParams, PopulationState, Transition, discretize, potential

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """The SplitMix64 finalizer."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def run_seed(master_seed: int, index: int) -> int:
    """Seed of run ``index``: ``splitmix64(master + (index + 1) * golden_gamma)``."""
    return splitmix64((master_seed + (index + 1) * GOLDEN_GAMMA) & MASK64)


def new_master_seed() -> int:
    return secrets.randbits(64)


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


class RecordMode(str, enum.Enum):
    FINAL_ONLY = "final_only"
    EVENT_LOG = "event_log"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class SimConfig:
    n: int
    seed: int
    record_mode: RecordMode = RecordMode.FINAL_ONLY
    dt: Optional[float] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"population size must be >= 1, got {self.n}")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.record_mode == RecordMode.SAMPLED and not (self.dt is not None and self.dt > 0):
            raise ValueError("sampled recording needs dt > 0")


@njit(cache=True, nogil=True)
def _direct_method(x1, x2, y1, n1, n2, lam, alpha, p, uniforms, waits, times, kinds, record):
    t = 0.0
    k = 0
    b_total = lam * n1 + alpha * n2
    while y1 > 0:
        b1 = lam * p * x1
        b2 = alpha * x2
        b3 = alpha * (n2 - x2) + lam * (n1 - x1)
        b4 = lam * (1.0 - p) * x1
        t += waits[k] / (y1 * b_total)
        target = uniforms[k] * (b1 + b2 + b3 + b4)
        if target < b1:
            kind = 0
        elif target < b1 + b2:
            kind = 1
        elif target < b1 + b2 + b3:
            kind = 2
        elif b4 > 0.0:
            kind = 3
        else:
            # target rounded onto the total; take the last live channel
            kind = 2 if b3 > 0.0 else (1 if b2 > 0.0 else 0)
        if kind == 0:
            x1 -= 1
            y1 += 1
        elif kind == 1:
            x2 -= 1
        elif kind == 2:
            y1 -= 1
        else:
            x1 -= 1
        if record:
            times[k] = t
            kinds[k] = kind
        k += 1
    return x1, x2, y1, t, k


@dataclass
class TrajectoryRecord:
    initial_state: PopulationState
    final_state: PopulationState
    absorption_time: float
    n_events: int
    record_mode: RecordMode = RecordMode.FINAL_ONLY
    event_times: Optional[np.ndarray] = None
    event_kinds: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None  # rows (t, x1, x2, y1, z)

    def states(self) -> np.ndarray:
        """Rows ``(t, kind, x1, x2, y1, z)`` for the initial state and after
        every event; ``kind`` is -1 on the initial row."""
        if self.event_kinds is None:
            raise ValueError("trajectory was recorded without an event log")
        return reconstruct(self.initial_state, self.event_times, self.event_kinds)


def reconstruct(init: PopulationState, times: np.ndarray, kinds: np.ndarray) -> np.ndarray:
    inc = np.array([[-1, 0, 1, 0], [0, -1, 0, 1], [0, 0, -1, 1], [-1, 0, 0, 1]], dtype=np.int64)
    steps = np.vstack([np.zeros((1, 4), dtype=np.int64), inc[kinds.astype(np.int64)]])
    counts = np.array([init.x1, init.x2, init.y1, init.z], dtype=np.int64) + np.cumsum(steps, axis=0)
    out = np.empty((len(kinds) + 1, 6))
    out[0, 0] = 0.0
    out[1:, 0] = times
    out[0, 1] = -1
    out[1:, 1] = kinds
    out[:, 2:] = counts
    return out


def sample_grid(states: np.ndarray, absorption_time: float, dt: float) -> np.ndarray:
    """Left-constant values at ``k*dt`` up to the first grid time past absorption."""
    k_max = int(math.floor(absorption_time / dt)) + 1
    grid = np.arange(k_max + 1) * dt
    idx = np.searchsorted(states[:, 0], grid, side="right") - 1
    out = np.empty((len(grid), 5))
    out[:, 0] = grid
    out[:, 1:] = states[idx, 2:]
    return out


def _simulate_state(
    params: ModelParams, start: PopulationState, seed: int, record_mode: RecordMode, dt=None
) -> TrajectoryRecord:
    cap = potential(start)
    rng = _generator(seed)
    uniforms = rng.random(cap)
    waits = rng.standard_exponential(cap)
    record = record_mode != RecordMode.FINAL_ONLY
    times = np.empty(cap if record else 0)
    kinds = np.empty(cap if record else 0, dtype=np.int8)
    x1, x2, y1, t, k = _direct_method(
        start.x1, start.x2, start.y1, start.n1, start.n2,
        float(params.lam), float(params.alpha), float(params.p),
        uniforms, waits, times, kinds, record,
    )
    final = PopulationState(
        int(x1), int(x2), int(y1), start.n - int(x1) - int(x2) - int(y1), start.n, start.n1, start.n2
    )
    rec = TrajectoryRecord(start, final, float(t), int(k), record_mode)
    if record:
        rec.event_times = times[:k].copy()
        rec.event_kinds = kinds[:k].copy()
    if record_mode == RecordMode.SAMPLED:
        rec.samples = sample_grid(rec.states(), rec.absorption_time, dt)
    return rec


def simulate(params: ModelParams, init: InitialFractions, cfg: SimConfig) -> TrajectoryRecord:
    """One exact realisation from the discretised initial state, run to
    absorption (``Y1 = 0``)."""
    start = discretize(params, init, cfg.n)
    return _simulate_state(params, start, run_seed(cfg.seed, 0), cfg.record_mode, cfg.dt)


def simulate_from_state(
    params: ModelParams, start: PopulationState, seed: int, record_mode=RecordMode.FINAL_ONLY, dt=None
) -> TrajectoryRecord:
    return _simulate_state(params, start, seed, RecordMode(record_mode), dt)


@dataclass
class EnsembleSummary:
    m: int
    n: int
    seed: int
    mean_x1_frac: float
    mean_x2_frac: float
    cov: np.ndarray
    tau_mean: float
    tau_var: float
    events_mean: float
    events_var: float
    final_x1: Optional[np.ndarray] = field(default=None, repr=False)
    final_x2: Optional[np.ndarray] = field(default=None, repr=False)
    taus: Optional[np.ndarray] = field(default=None, repr=False)
    events: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "mean_x1_frac": self.mean_x1_frac,
            "mean_x2_frac": self.mean_x2_frac,
            "cov": self.cov.tolist(),
            "tau_mean": self.tau_mean,
            "tau_var": self.tau_var,
            "events_mean": self.events_mean,
            "events_var": self.events_var,
            "seed": self.seed,
        }


def _var(a: np.ndarray) -> float:
    return float(np.var(a, ddof=1)) if len(a) > 1 else 0.0


def summarize(n: int, seed: int, x1, x2, taus, events, keep_runs: bool = True) -> EnsembleSummary:
    x1 = np.asarray(x1, dtype=np.int64)
    x2 = np.asarray(x2, dtype=np.int64)
    taus = np.asarray(taus, dtype=float)
    events = np.asarray(events, dtype=np.int64)
    m = len(x1)
    fr = np.column_stack([x1 / n, x2 / n])
    cov = np.cov(fr, rowvar=False) if m > 1 else np.zeros((2, 2))
    cov = 0.5 * (cov + cov.T)
    return EnsembleSummary(
        m=m,
        n=n,
        seed=seed,
        mean_x1_frac=float(fr[:, 0].mean()),
        mean_x2_frac=float(fr[:, 1].mean()),
        cov=cov,
        tau_mean=float(taus.mean()),
        tau_var=_var(taus),
        events_mean=float(events.mean()),
        events_var=_var(events.astype(float)),
        final_x1=x1 if keep_runs else None,
        final_x2=x2 if keep_runs else None,
        taus=taus if keep_runs else None,
        events=events if keep_runs else None,
    )


def run_ensemble(
    params: ModelParams,
    init: InitialFractions,
    cfg: SimConfig,
    m: int,
    *,
    workers: int = 1,
    keep_runs: bool = True,
) -> EnsembleSummary:
    """``m`` independent runs; run ``i`` uses ``run_seed(cfg.seed, i)``.

    Results are gathered by run index before reduction, so the summary does
    not depend on ``workers``.
    """
    if m < 1:
        raise ValueError(f"need m >= 1 runs, got {m}")
    start = discretize(params, init, cfg.n)

    def one(i):
        rec = _simulate_state(params, start, run_seed(cfg.seed, i), RecordMode.FINAL_ONLY)
        return rec.final_state.x1, rec.final_state.x2, rec.absorption_time, rec.n_events

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(m)))
    else:
        results = [one(i) for i in range(m)]
    x1, x2, taus, events = zip(*results)
    return summarize(cfg.n, cfg.seed, x1, x2, taus, events, keep_runs)


def scaled_fluctuations(summary: EnsembleSummary, asym: AsymptoticSolution) -> np.ndarray:
    """Per-run ``sqrt(N) (X1/N - x1_inf, X2/N - x2_inf)``, shape ``(m, 2)``."""
    if summary.final_x1 is None or summary.final_x2 is None:
        raise ValueError("ensemble was summarised without per-run final states")
    n = summary.n
    root = math.sqrt(n)
    return np.column_stack(
        [
            root * (summary.final_x1 / n - asym.x1_inf),
            root * (summary.final_x2 / n - asym.x2_inf),
        ]
    )
