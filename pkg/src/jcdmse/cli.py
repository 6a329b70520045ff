"""Command-line front end.

Subcommands:

* ``solve``       fixed points of one scenario, JSON on stdout
* ``sweep``       solve along a parameter grid, CSV (+ optional figure)
* ``transition``  bisect a jump of the selected MSE, JSON on stdout
* ``mc``          finite-size Monte Carlo runs, CSV (+ optional figure)

Exit codes: 0 success, 1 input error, 2 non-convergence.  Output files are
written via a temporary file and an atomic rename, so failures never leave
partial files behind.  Floating-point fields carry 17 significant digits.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import montecarlo
from .replica import N_PHASES
from .scenarios import PRESETS, example2_pilot_only, load_scenario, make_prior, scenario_to_dict
from .solver import (
    FixedPointResult,
    SolverConfig,
    locate_transition,
    select_result,
    set_axis,
    solve,
    sweep,
)

_SCHEME_ALIASES = {
    "perfectcsilmmse": "perfect_csi_lmmse",
    "pilotmmsechannel": "pilot_mmse_channel",
    "pilotthenlmmsedata": "pilot_then_lmmse_data",
    "svdblind": "svd_blind",
}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def _jsonable(obj):
    """Recursively convert to JSON-safe values (inf/nan become strings)."""
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return _fmt(obj)
        return obj
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(float(obj))
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".jcdmse-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_pin(spec: str):
    try:
        target, value = spec.split("=", 1)
        value = float(value)
        name, idx = target.split(":", 1)
        if name == "mseH":
            return ("H", int(idx)), value
        if name == "mseX":
            c, t = idx.split(",")
            return ("X", int(c), int(t)), value
    except ValueError:
        pass
    raise ValueError(f"bad --pin {spec!r}; expected mseH:<cell>=<value> or mseX:<cell>,<phase>=<value>")


def _parse_grid(spec: str):
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"bad grid {spec!r}; expected start:stop:linN or start:stop:logN")
    start, stop = float(parts[0]), float(parts[1])
    tail = parts[2]
    if tail.startswith("lin"):
        kind, n = "lin", tail[3:]
    elif tail.startswith("log"):
        kind, n = "log", tail[3:]
    else:
        raise ValueError(f"bad grid {spec!r}; third field must be linN or logN")
    try:
        n = int(n)
    except ValueError:
        raise ValueError(f"bad grid {spec!r}; point count {n!r} is not an integer")
    if n < 1:
        raise ValueError(f"grid {spec!r} is empty")
    if n == 1:
        return [start]
    if kind == "lin":
        return list(np.linspace(start, stop, n))
    if start <= 0 or stop <= 0:
        raise ValueError(f"log grid {spec!r} needs positive endpoints")
    return list(np.geomspace(start, stop, n))


def _build_scenario(args):
    """(scenario, pins) from --scenario/--preset plus --set/--pin overrides."""
    if bool(args.scenario) == bool(args.preset):
        raise ValueError("exactly one of --scenario or --preset is required")
    if args.scenario:
        scenario, pins = load_scenario(args.scenario)
    else:
        name = args.preset
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; valid: {sorted(PRESETS)}")
        kwargs = {"alpha": 1.0}
        if args.data_prior != "gaussian":
            key = "prior" if name == "example1" else "data_prior"
            kwargs[key] = make_prior(args.data_prior, 1.0)
        scenario, pins = PRESETS[name](**kwargs)
    for spec in args.set or []:
        if "=" not in spec:
            raise ValueError(f"bad --set {spec!r}; expected axis=value")
        axis, value = spec.split("=", 1)
        scenario = set_axis(scenario, axis, float(value))
    pins = dict(pins)
    for spec in args.pin or []:
        key, value = _parse_pin(spec)
        pins[key] = value
    return scenario, pins


def _solver_config(args) -> SolverConfig:
    return SolverConfig(damping=args.damping, tol=args.tol, max_iter=args.max_iter)


def _result_doc(r: FixedPointResult, selected: bool) -> dict:
    return {
        "init_label": r.init_label,
        "converged": r.converged,
        "iterations": r.iterations,
        "residual": r.residual,
        "degenerate": r.degenerate,
        "phi": r.phi,
        "mse_H": r.params.mse_H,
        "mse_X": r.params.mse_X,
        "qtilde_H": r.params.qtilde_H,
        "qtilde_X": r.params.qtilde_X,
        "selected": selected,
    }


def cmd_solve(args) -> int:
    if args.preset == "example2_pilot_only":
        staged = example2_pilot_only(alpha=args.pilot_alpha, config=_solver_config(args))
        doc = {
            "scheme": "example2_pilot_only",
            "mse_H": staged.mse_H,
            "mse_X2": staged.mse_X2,
            "stages": [_result_doc(staged.stage1, True), _result_doc(staged.stage2, True)],
        }
        print(json.dumps(_jsonable(doc), indent=2))
        return 0
    scenario, pins = _build_scenario(args)
    results = solve(scenario, _solver_config(args), pins)
    selected = select_result(results, scenario)
    doc = {
        "scenario": scenario_to_dict(scenario, pins),
        "selection_rule": "free_entropy" if scenario.sigma2 > 0 else "min_total_mse",
        "multiple_fixed_points": len(results) > 1,
        "fixed_points": [_result_doc(r, r is selected) for r in results],
    }
    if scenario.sigma2 == 0.0:
        doc["warning"] = "sigma2 = 0: ranking by total MSE, free entropy unavailable"
    print(json.dumps(_jsonable(doc), indent=2))
    return 0 if selected is not None and selected.converged else 2


def _sweep_header(n_cells: int) -> list:
    cols = ["axis", "value"]
    cols += [f"mse_H_{c}" for c in range(n_cells)]
    cols += [f"mse_X_{c}_{t}" for c in range(n_cells) for t in range(N_PHASES)]
    cols += ["phi", "converged", "init_label", "n_fixed_points"]
    return cols


def _sweep_row(axis: str, value: float, point) -> list:
    r = point.selected
    if r is None:  # fall back to the closest run so the row is still informative
        r = min(point.results, key=lambda q: q.residual)
    row = [axis, _fmt(float(value))]
    row += [_fmt(float(v)) for v in r.params.mse_H]
    row += [_fmt(float(v)) for v in r.params.mse_X.ravel()]
    row += [_fmt(r.phi if r.phi is not None else float("nan")),
            str(r.converged), r.init_label, str(len(point.results))]
    return row


def cmd_sweep(args) -> int:
    scenario, pins = _build_scenario(args)
    grid = _parse_grid(args.grid)
    points = sweep(scenario, args.axis, grid, _solver_config(args), pins,
                   warm_start=args.warm_start)
    header = _sweep_header(scenario.n_cells)
    lines = [",".join(header)]
    for p in points:
        lines.append(",".join(_sweep_row(args.axis, p.value, p)))
    _atomic_write(args.output, "\n".join(lines) + "\n")
    if args.figure:
        from .plotting import render_sweep_figure
        render_sweep_figure(args.output, args.figure)
    ok = all(p.selected is not None and p.selected.converged for p in points)
    return 0 if ok else 2


def cmd_transition(args) -> int:
    scenario, pins = _build_scenario(args)
    lo, hi = args.bracket
    report = locate_transition(scenario, args.axis, (lo, hi), _solver_config(args),
                               pins, jump_threshold=args.jump_threshold,
                               width_target=args.width_target)
    if report is None:
        print(json.dumps({"found": False, "axis": args.axis, "bracket": [lo, hi]}))
        return 0
    doc = {
        "found": True,
        "axis": report.sweep_axis,
        "bracket": list(report.bracket),
        "jump_size": report.jump_size,
        "resolved_to": report.resolved_to,
        "mse_low": report.mse_low,
        "mse_high": report.mse_high,
    }
    print(json.dumps(_jsonable(doc), indent=2))
    return 0


def _mc_header(n_cells: int) -> list:
    cols = _sweep_header(n_cells)
    for prefix in ("stderr", "pred"):
        cols += [f"{prefix}_mse_H_{c}" for c in range(n_cells)]
        cols += [f"{prefix}_mse_X_{c}_{t}" for c in range(n_cells) for t in range(N_PHASES)]
    cols += ["trials", "seed", "flagged_trials"]
    return cols


def _mc_row(report, n_cells: int) -> list:
    nan = float("nan")
    mse_H = [nan] * n_cells
    mse_X = [nan] * (n_cells * N_PHASES)
    std_H = [nan] * n_cells
    std_X = [nan] * (n_cells * N_PHASES)
    prd_H = [nan] * n_cells
    prd_X = [nan] * (n_cells * N_PHASES)
    if report.mse_H is not None:
        mse_H[0] = report.mse_H
        std_H[0] = report.stderr_H
    if report.mse_X is not None:
        mse_X[N_PHASES - 1] = report.mse_X  # target cell, data phase
        std_X[N_PHASES - 1] = report.stderr_X
    if report.predicted_mse_H is not None:
        prd_H[0] = report.predicted_mse_H
    if report.predicted_mse_X is not None:
        prd_X[N_PHASES - 1] = report.predicted_mse_X
    row = ["K", _fmt(float(report.K))]
    row += [_fmt(v) for v in mse_H + mse_X]
    row += [_fmt(nan), "", report.scheme, ""]
    row += [_fmt(v) for v in std_H + std_X + prd_H + prd_X]
    row += [str(report.trials), str(report.seed), str(report.flagged_trials)]
    return row


def cmd_mc(args) -> int:
    scenario, _ = _build_scenario(args)
    raw = args.scheme.replace("_", "").lower()
    scheme = _SCHEME_ALIASES.get(raw)
    if scheme is None:
        raise ValueError(f"unknown scheme {args.scheme!r}; valid: {sorted(montecarlo.SCHEMES)}")
    header = _mc_header(scenario.n_cells)
    lines = [",".join(header)]
    for K in args.K:
        config = montecarlo.McConfig(K=K, trials=args.trials, seed=args.seed, scheme=scheme)
        report = montecarlo.run_mc(scenario, config)
        lines.append(",".join(_mc_row(report, scenario.n_cells)))
    _atomic_write(args.output, "\n".join(lines) + "\n")
    if args.figure:
        from .plotting import render_mc_figure
        render_mc_figure(args.output, args.figure)
    return 0


def _add_scenario_args(p, presets_extra=()):
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--preset", choices=sorted(PRESETS) + sorted(presets_extra),
                   help="named scenario construction")
    p.add_argument("--data-prior", default="gaussian", choices=["gaussian", "qpsk"],
                   help="data prior family for presets (default gaussian)")
    p.add_argument("--set", action="append", metavar="AXIS=VALUE",
                   help="override a parameter (alpha, sigma2, beta, beta1, beta2, G.<c>, Gamma.<t>)")
    p.add_argument("--pin", action="append", metavar="SPEC",
                   help="pin an MSE entry, e.g. mseH:0=0.0 or mseX:0,1=0.25")


def _add_solver_args(p):
    p.add_argument("--damping", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=10_000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jcdmse",
        description="Asymptotic MSE analysis of joint channel-and-data estimation "
                    "for multi-cell massive MIMO, with Monte Carlo cross-checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="fixed points of one scenario (JSON)")
    _add_scenario_args(p, presets_extra=("example2_pilot_only",))
    _add_solver_args(p)
    p.add_argument("--pilot-alpha", type=float, default=1.0,
                   help="antenna ratio for the example2_pilot_only preset")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("sweep", help="fixed points along a parameter grid (CSV)")
    _add_scenario_args(p)
    _add_solver_args(p)
    p.add_argument("--axis", required=True)
    p.add_argument("--grid", required=True, metavar="START:STOP:linN|logN")
    p.add_argument("--output", required=True)
    p.add_argument("--figure", help="also render the curves to this image file")
    p.add_argument("--warm-start", action="store_true",
                   help="seed each grid point with the previous selected solution")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("transition", help="bisect a jump of the selected MSE (JSON)")
    _add_scenario_args(p)
    _add_solver_args(p)
    p.add_argument("--axis", required=True)
    p.add_argument("--bracket", nargs=2, type=float, required=True, metavar=("LO", "HI"))
    p.add_argument("--jump-threshold", type=float, default=0.1)
    p.add_argument("--width-target", type=float, default=1e-4)
    p.set_defaults(fn=cmd_transition)

    p = sub.add_parser("mc", help="finite-size Monte Carlo cross-check (CSV)")
    _add_scenario_args(p)
    p.add_argument("--scheme", required=True,
                   help="perfect_csi_lmmse | pilot_mmse_channel | pilot_then_lmmse_data | svd_blind")
    p.add_argument("--K", type=int, nargs="+", required=True,
                   help="total user count(s); one CSV row per value")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--figure", help="also render empirical vs predicted MSEs")
    p.set_defaults(fn=cmd_mc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})",
              file=sys.stderr)
        return 1
    except (ValueError, IndexError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
