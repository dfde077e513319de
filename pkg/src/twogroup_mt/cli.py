"""Command-line front end.

Exit codes: 0 success, 1 a verification ran but failed, 2 usage error,
3 invalid parameters, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import itertools
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import io
from .clt import fluctuations, gof_test
from .limits import DeterministicPath, DomainError, NumericalError, solve_asymptotics
from .model import AbsorbedStateError, InitialFractions, ModelParams, ValidationError, validate
from .ssa import RecordMode, SimConfig, new_master_seed, run_ensemble, scaled_fluctuations, simulate

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3, 4

COMMANDS = ("simulate", "ensemble", "limit", "clt", "ode", "verify-wlln", "verify-clt", "sweep")
RANDOMIZED = ("simulate", "ensemble", "verify-wlln", "verify-clt")
PARAM_FLAGS = ("theta", "lambda", "alpha", "p", "x10", "x20", "y10")
DEFAULT_FORMAT = {
    "simulate": "csv",
    "ensemble": "json",
    "limit": "json",
    "clt": "json",
    "ode": "csv",
    "verify-wlln": "json",
    "verify-clt": "json",
    "sweep": "csv",
}
SWEEP_HEADER = (
    "theta", "lambda", "alpha", "p", "x10", "x20", "y10",
    "x1_inf", "x2_inf", "tau_inf", "s11", "s12", "s22", "degenerate",
)

# verification tolerances
WLLN_TOL = 0.005
CLT_COV_RTOL = 0.15
CLT_COV_FLOOR = 0.01
CLT_MEAN_SE = 3.0
CLT_P_MIN = 0.01


@dataclass
class RunSpec:
    command: str
    values: Dict[str, Optional[float]]
    n: int = 1000
    seed: Optional[int] = None
    runs: int = 100
    workers: int = 1
    record: RecordMode = RecordMode.EVENT_LOG
    dt: Optional[float] = None
    out: Optional[str] = None
    format: str = "json"
    grid: List[Tuple[str, List[float]]] = field(default_factory=list)
    tmax: Optional[float] = None
    steps: int = 100
    tol: float = WLLN_TOL

    def model(self, overrides: Optional[Dict[str, float]] = None) -> Tuple[ModelParams, InitialFractions]:
        v = dict(self.values)
        if overrides:
            v.update(overrides)
        params = ModelParams(v["theta"], v["lambda"], v["alpha"], v["p"])
        z0 = v.get("z0")
        if z0 is None:
            z0 = 1.0 - v["x10"] - v["x20"] - v["y10"]
        init = InitialFractions(v["x10"], v["x20"], v["y10"], z0)
        return validate(params, init)

    def grid_points(self) -> List[Dict[str, float]]:
        names = [g[0] for g in self.grid]
        return [dict(zip(names, combo)) for combo in itertools.product(*(g[1] for g in self.grid))]


def _grid_item(text: str) -> Tuple[str, List[float]]:
    name, sep, vals = text.partition("=")
    name = name.strip()
    if not sep or name not in PARAM_FLAGS:
        raise argparse.ArgumentTypeError(
            f"expected <param>=<v1,v2,...> with param one of {', '.join(PARAM_FLAGS)}"
        )
    try:
        values = [float(v) for v in vals.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric value in {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError(f"empty value list in {text!r}")
    return name, values


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--theta", type=float, help="share of group A")
    g.add_argument("--lambda", dest="lambda", type=float, help="A->A contact rate")
    g.add_argument("--alpha", type=float, help="A->B contact rate")
    g.add_argument("--p", type=float, help="probability an A-ignorant becomes a spreader")
    g.add_argument("--x10", type=float, help="initial A-ignorant fraction")
    g.add_argument("--x20", type=float, help="initial B-ignorant fraction")
    g.add_argument("--y10", type=float, help="initial A-spreader fraction")
    g.add_argument("--z0", type=float, help="initial stifler fraction (default: the remainder)")
    s = common.add_argument_group("simulation")
    s.add_argument("--n", type=int, default=1000, help="population size")
    s.add_argument("--seed", type=_seed, help="64-bit master seed (generated and reported if absent)")
    s.add_argument("--runs", type=int, default=100, help="ensemble size")
    s.add_argument("--workers", type=int, default=1, help="worker threads for ensembles")
    s.add_argument("--record", choices=[m.value for m in RecordMode], default="event_log")
    s.add_argument("--dt", type=float, help="grid step for --record sampled")
    o = common.add_argument_group("output")
    o.add_argument("--out", help="output file (default: stdout)")
    o.add_argument("--format", choices=("csv", "json"))
    o.add_argument("--grid", type=_grid_item, action="append", default=[], metavar="PARAM=V1,V2,...")
    o.add_argument("--tmax", type=float, help="ode: final time (default: tau_inf)")
    o.add_argument("--steps", type=int, default=100, help="ode: number of grid intervals")
    o.add_argument("--tol", type=float, default=WLLN_TOL, help="verify-wlln: absolute tolerance")

    parser = argparse.ArgumentParser(
        prog="twogroup-mt",
        description="Two-group Maki-Thompson rumour model: simulation, limits and fluctuations.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for cmd in COMMANDS:
        sub.add_parser(cmd, parents=[common])
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> RunSpec:
    """Parse ``argv`` into a ``RunSpec``.

    Usage errors exit with status 2 through argparse; parameter validation
    errors are raised as ``ValidationError``.
    """
    parser = build_parser()
    ns = parser.parse_args(argv)
    cmd = ns.command
    gridded = {g[0] for g in ns.grid}
    if ns.grid and cmd != "sweep":
        parser.error("--grid is only valid with sweep")
    missing = [f for f in PARAM_FLAGS if getattr(ns, f) is None and f not in gridded]
    if missing:
        parser.error("missing required values: " + ", ".join("--" + m for m in missing))
    if ns.n < 1 or ns.runs < 1 or ns.workers < 1 or ns.steps < 1:
        parser.error("--n, --runs, --workers and --steps must be >= 1")
    if ns.record == "sampled" and not (ns.dt and ns.dt > 0):
        parser.error("--record sampled needs --dt > 0")
    spec = RunSpec(
        command=cmd,
        values={f: getattr(ns, f) for f in PARAM_FLAGS + ("z0",)},
        n=ns.n,
        seed=ns.seed,
        runs=ns.runs,
        workers=ns.workers,
        record=RecordMode(ns.record),
        dt=ns.dt,
        out=ns.out,
        format=ns.format or DEFAULT_FORMAT[cmd],
        grid=list(ns.grid),
        tmax=ns.tmax,
        steps=ns.steps,
        tol=ns.tol,
    )
    if cmd != "sweep":
        spec.model()
    return spec


def _limit_row(sol) -> dict:
    d = sol.diagnostics
    return {
        "x1_inf": sol.x1_inf,
        "x2_inf": sol.x2_inf,
        "tau_inf": sol.tau_inf,
        "y1_prime_at_tau": sol.y1_prime_at_tau,
        "degenerate": sol.degenerate,
        "a": d.a if d else None,
        "b": d.b if d else None,
        "xbar": d.xbar if d else None,
    }


def _emit(spec: RunSpec, payload, header=None, rows=None) -> None:
    if spec.format == "csv":
        if header is None:
            header = list(payload.keys())
            rows = [list(payload.values())]
        io.emit(io.csv_text(header, rows), spec.out)
    else:
        io.emit(io.json_text(payload), spec.out)


def _cmd_limit(spec: RunSpec) -> int:
    params, init = spec.model()
    sol = solve_asymptotics(params, init)
    if spec.format == "csv":
        _emit(spec, _limit_row(sol))
    else:
        _emit(spec, sol.to_dict())
    return EXIT_OK


def _cmd_clt(spec: RunSpec) -> int:
    params, init = spec.model()
    res = fluctuations(params, init)
    if spec.format == "csv":
        s = res.sigma
        _emit(spec, {"tau_inf": res.tau_inf, "k1": res.k1, "k2": res.k2, "s11": s[0, 0],
                     "s12": s[0, 1], "s22": s[1, 1], "degenerate": res.degenerate})
    else:
        _emit(spec, res.to_dict())
    return EXIT_OK


def _cmd_ode(spec: RunSpec) -> int:
    params, init = spec.model()
    tmax = spec.tmax
    if tmax is None:
        tmax = solve_asymptotics(params, init).tau_inf
    if not tmax >= 0:
        raise ValidationError(f"--tmax must be >= 0, got {tmax}")
    t = np.arange(spec.steps + 1) * (tmax / spec.steps)
    x1, x2, y1 = DeterministicPath(params, init)(t)
    rows = np.column_stack([t, x1, x2, y1])
    header = ("t", "x1", "x2", "y1")
    if spec.format == "csv":
        _emit(spec, None, header, rows.tolist())
    else:
        _emit(spec, {"columns": list(header), "rows": rows})
    return EXIT_OK


def _cmd_simulate(spec: RunSpec) -> int:
    params, init = spec.model()
    rec = simulate(params, init, SimConfig(spec.n, spec.seed, spec.record, spec.dt))
    if spec.record == RecordMode.EVENT_LOG:
        header = ("t", "kind", "x1", "x2", "y1", "z")
        rows = [
            [r[0], "" if r[1] < 0 else f"l{int(r[1]) + 1}", int(r[2]), int(r[3]), int(r[4]), int(r[5])]
            for r in rec.states()
        ]
    elif spec.record == RecordMode.SAMPLED:
        header = ("t", "x1", "x2", "y1", "z")
        rows = [[r[0], *map(int, r[1:])] for r in rec.samples]
    else:
        header = ("t", "x1", "x2", "y1", "z")
        i, f = rec.initial_state, rec.final_state
        rows = [[0.0, i.x1, i.x2, i.y1, i.z], [rec.absorption_time, f.x1, f.x2, f.y1, f.z]]
    if spec.format == "csv":
        _emit(spec, None, header, rows)
    else:
        _emit(spec, {
            "seed": spec.seed,
            "n": spec.n,
            "absorption_time": rec.absorption_time,
            "n_events": rec.n_events,
            "columns": list(header),
            "rows": rows,
        })
    return EXIT_OK


def _ensemble(spec: RunSpec, keep_runs=False):
    params, init = spec.model()
    cfg = SimConfig(spec.n, spec.seed)
    return params, init, run_ensemble(params, init, cfg, spec.runs, workers=spec.workers, keep_runs=keep_runs)


def _cmd_ensemble(spec: RunSpec) -> int:
    _, _, summary = _ensemble(spec)
    d = summary.to_dict()
    if spec.format == "csv":
        cov = d.pop("cov")
        d.update(cov11=cov[0][0], cov12=cov[0][1], cov22=cov[1][1])
    _emit(spec, d)
    return EXIT_OK


def verify_wlln(params, init, summary, tol: float = WLLN_TOL) -> dict:
    sol = solve_asymptotics(params, init)
    err1 = abs(summary.mean_x1_frac - sol.x1_inf)
    err2 = abs(summary.mean_x2_frac - sol.x2_inf)
    return {
        "ensemble": summary.to_dict(),
        "limit": sol.to_dict(),
        "tolerance": tol,
        "abs_err_x1": err1,
        "abs_err_x2": err2,
        "pass": bool(err1 <= tol and err2 <= tol),
    }


def verify_clt(params, init, summary, *, cov_rtol=CLT_COV_RTOL, cov_floor=CLT_COV_FLOOR,
               mean_se=CLT_MEAN_SE, p_min=CLT_P_MIN) -> dict:
    sol = solve_asymptotics(params, init)
    res = fluctuations(params, init, sol)
    if res.degenerate:
        raise NumericalError("limit covariance is undefined for a degenerate (no-outbreak) solution")
    z = scaled_fluctuations(summary, sol)
    rep = gof_test(z, res.sigma)
    gated = np.abs(res.sigma) > cov_floor
    cov_ok = bool(np.all(np.abs(rep.cov_rel_err[gated]) <= cov_rtol))
    mean_ok = bool(np.all(np.abs(rep.mean) <= mean_se * rep.mean_se))
    p_ok = bool(rep.p_value > p_min)
    return {
        "ensemble": summary.to_dict(),
        "limit": sol.to_dict(),
        "clt": res.to_dict(),
        "gof": rep.to_dict(),
        "tolerances": {"cov_rtol": cov_rtol, "cov_floor": cov_floor, "mean_se": mean_se, "p_min": p_min},
        "checks": {"covariance": cov_ok, "mean": mean_ok, "gof": p_ok},
        "pass": cov_ok and mean_ok and p_ok,
    }


def _cmd_verify_wlln(spec: RunSpec) -> int:
    params, init, summary = _ensemble(spec)
    report = verify_wlln(params, init, summary, spec.tol)
    _emit(spec, report if spec.format == "json" else _flat(report))
    return EXIT_OK if report["pass"] else EXIT_FAILED


def _cmd_verify_clt(spec: RunSpec) -> int:
    params, init, summary = _ensemble(spec, keep_runs=True)
    report = verify_clt(params, init, summary)
    _emit(spec, report if spec.format == "json" else _flat(report))
    return EXIT_OK if report["pass"] else EXIT_FAILED


def _flat(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flat(v, key + "."))
        elif isinstance(v, (list, np.ndarray)):
            for idx, x in np.ndenumerate(np.asarray(v, dtype=object)):
                out[key + "." + ".".join(map(str, idx))] = x
        else:
            out[key] = v
    return out


def sweep_rows(spec: RunSpec) -> List[list]:
    rows = []
    for point in spec.grid_points():
        params, init = spec.model(point)
        sol = solve_asymptotics(params, init)
        s = fluctuations(params, init, sol).sigma
        rows.append([
            params.theta, params.lam, params.alpha, params.p, init.x10, init.x20, init.y10,
            sol.x1_inf, sol.x2_inf, sol.tau_inf, s[0, 0], s[0, 1], s[1, 1], sol.degenerate,
        ])
    return rows


def _cmd_sweep(spec: RunSpec) -> int:
    rows = sweep_rows(spec)
    if spec.format == "csv":
        _emit(spec, None, SWEEP_HEADER, rows)
    else:
        _emit(spec, [dict(zip(SWEEP_HEADER, r)) for r in rows])
    return EXIT_OK


HANDLERS = {
    "simulate": _cmd_simulate,
    "ensemble": _cmd_ensemble,
    "limit": _cmd_limit,
    "clt": _cmd_clt,
    "ode": _cmd_ode,
    "verify-wlln": _cmd_verify_wlln,
    "verify-clt": _cmd_verify_clt,
    "sweep": _cmd_sweep,
}


def execute(spec: RunSpec) -> int:
    if spec.command in RANDOMIZED and spec.seed is None:
        spec.seed = new_master_seed()
        print(f"seed: {spec.seed}", file=sys.stderr)
    try:
        return HANDLERS[spec.command](spec)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, DomainError, AbsorbedStateError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        spec = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return execute(spec)


if __name__ == "__main__":
    sys.exit(main())
