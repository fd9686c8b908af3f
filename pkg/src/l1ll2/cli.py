"""Command-line interface: ``simulate``, ``invert`` and ``report``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .fista import DivergenceError
from .formats import (
    MapFile,
    ParseError,
    RunConfig,
    SignalFile,
    contour_rows,
    projection_rows,
    read_map,
    read_signal,
    write_csv,
    write_map,
    write_signal,
)
from .kernels import (
    RelaxGrid,
    SeparableOperator,
    TimeGrid,
    build_cpmg_kernel,
    build_ir_kernel,
    linear_time_grid,
    log_time_grid,
    relax_grid,
)
from .metrics import aggregate, erel2, pal, peg, rmsd
from .phantoms import PRESETS, PeakSpec, make_phantom, preset_peaks, simulate
from .solver import SolverOptions, solve
from .upen import UpenConfig

log = logging.getLogger("l1ll2")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


# -- configuration --------------------------------------------------------

def _parse_seeds(text: str) -> list[int]:
    seeds = []
    for part in text.split(","):
        if "-" in part.strip("-"):
            lo, hi = part.split("-")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def _opt_float(text: str):
    return None if text.lower() in ("none", "auto") else float(text)


# flag name -> (RunConfig field, parser)
_OVERRIDES = {
    "preset": str, "width": float, "n1": int, "n2": int, "Tmin": float, "Tmax": float,
    "kernel": str, "m1": int, "m2": int, "t1_min": float, "t1_max": float,
    "t1_spacing": str, "echo_spacing": float, "delta": float, "seeds": _parse_seeds,
    "method": str, "tau_outer": float, "tau_inner": float, "max_outer": int,
    "max_inner": int, "gp_iters": int, "alpha": _opt_float, "beta0": _opt_float,
    "beta0_mode": str, "beta0_rel": _opt_float, "beta_p": float, "beta_c": float, "rho": float,
    "radius": int, "lambda_rule": str,
}


def _add_config_flags(p: argparse.ArgumentParser, names) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration; flags override it")
    for name in names:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=_OVERRIDES[name], default=None)


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    changes = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k, None) is not None}
    return replace(cfg, **changes)


def solver_options(cfg: RunConfig) -> SolverOptions:
    upen_kw = dict(beta0=cfg.beta0, beta_p=cfg.beta_p, beta_c=cfg.beta_c, rho=cfg.rho,
                   neighborhood_radius=cfg.radius, rule=cfg.lambda_rule,
                   beta0_mode=cfg.beta0_mode, beta0_rel=cfg.beta0_rel)
    return SolverOptions(
        method=cfg.method, tau_outer=cfg.tau_outer, tau_inner=cfg.tau_inner,
        max_outer=cfg.max_outer, max_inner=cfg.max_inner, gp_iters=cfg.gp_iters,
        alpha=cfg.alpha, upen=UpenConfig(**upen_kw),
    )


def relax_grids(cfg: RunConfig) -> tuple[RelaxGrid, RelaxGrid]:
    default = PRESETS.get(cfg.preset.lower(), {"shape": (80, 80)})["shape"]
    n1 = cfg.n1 or default[0]
    n2 = cfg.n2 or default[1]
    return relax_grid(cfg.Tmin, cfg.Tmax, n1), relax_grid(cfg.Tmin, cfg.Tmax, n2)


def time_grids(cfg: RunConfig) -> tuple[TimeGrid, TimeGrid]:
    if cfg.t1_spacing == "logarithmic":
        t1 = log_time_grid(cfg.t1_min, cfg.t1_max, cfg.m1)
    elif cfg.t1_spacing == "linear":
        t1 = linear_time_grid(cfg.t1_min, cfg.m1)
    else:
        raise ValueError(f"unknown t1 spacing {cfg.t1_spacing!r}")
    return t1, linear_time_grid(cfg.echo_spacing, cfg.m2)


def build_operator(kind: str, t1, T1, t2, T2) -> SeparableOperator:
    if kind == "IR_CPMG":
        return SeparableOperator(build_ir_kernel(t1, T1), build_cpmg_kernel(t2, T2), kind)
    if kind == "CPMG_CPMG":
        return SeparableOperator(build_cpmg_kernel(t1, T1), build_cpmg_kernel(t2, T2), kind)
    if kind == "IDENTITY":
        # test fixture: K = I, relaxation grids must match the time grids in length
        if len(t1) != len(T1) or len(t2) != len(T2):
            raise ValueError("IDENTITY kernel needs as many relaxation nodes as time samples")
        return SeparableOperator(np.eye(len(t1)), np.eye(len(t2)), kind)
    raise ValueError(f"unknown kernel kind {kind!r}")


def _peaks(cfg: RunConfig):
    if cfg.peaks:
        return [PeakSpec(p[0], p[1], p[2] if len(p) > 2 else 1.0,
                         (p[3], p[4]) if len(p) > 4 else (cfg.width, cfg.width)) for p in cfg.peaks]
    return preset_peaks(cfg.preset, cfg.width)


def _versions() -> dict:
    return {"l1ll2": __version__, "numpy": np.__version__, "format": 1}


# -- commands -------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out: Path) -> list[Path]:
    """Write the ground-truth map and one signal file per seed into ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    g1, g2 = relax_grids(cfg)
    t1, t2 = time_grids(cfg)
    F = make_phantom(_peaks(cfg), (g1, g2))
    op = build_operator(cfg.kernel, t1, g1, t2, g2)
    test = cfg.preset if not cfg.peaks else "custom"
    write_map(out / "truth.map", MapFile(F, g1.values, g2.values, {"test": test}))
    cfg.save(out / "config.json")
    paths = []
    for seed in cfg.seeds:
        sig = simulate(F, op, cfg.delta, seed)
        path = out / f"signal_seed{seed}.sig"
        write_signal(path, SignalFile(
            S=sig.s.reshape(op.data_shape, order="F"), t1=t1.values, t2=t2.values,
            kind=cfg.kernel, t1_spacing=t1.spacing, t2_spacing=t2.spacing,
            delta=cfg.delta, seed=seed,
            extra={"test": test, "truth": "truth.map", "T1": list(map(float, g1.values)),
                   "T2": list(map(float, g2.values))},
        ))
        paths.append(path)
    return paths


def _inversion_grids(cfg: RunConfig, sig: SignalFile, truth: MapFile | None, explicit: bool):
    if explicit:
        g1, g2 = relax_grids(cfg)
        return g1.values, g2.values
    if truth is not None:
        return truth.T1, truth.T2
    if "T1" in sig.extra and "T2" in sig.extra:
        return np.array(sig.extra["T1"]), np.array(sig.extra["T2"])
    g1, g2 = relax_grids(cfg)
    return g1.values, g2.values


def cmd_invert(signal_path: Path, cfg: RunConfig, out: Path, truth_path: Path | None = None,
               explicit_grid: bool = False) -> dict:
    """Invert one signal file; writes map, report and diagnostics into ``out``."""
    sig = read_signal(signal_path)
    truth = None
    if truth_path is None and sig.extra.get("truth"):
        candidate = Path(signal_path).parent / sig.extra["truth"]
        truth_path = candidate if candidate.exists() else None
    if truth_path is not None:
        truth = read_map(truth_path)
    T1, T2 = _inversion_grids(cfg, sig, truth, explicit_grid)
    op = build_operator(sig.kind, sig.t1, T1, sig.t2, T2)
    rep = solve(op, sig.s, solver_options(cfg))

    out.mkdir(parents=True, exist_ok=True)
    test = sig.extra.get("test", Path(signal_path).stem)
    write_map(out / "map.bin", MapFile(rep.F, T1, T2, {"test": test, "method": rep.method}))
    cfg.save(out / "config.json")
    metrics = {"rmsd": rmsd(op, rep.f_final, sig.s), "wall_time": rep.wall_time}
    if truth is not None and truth.F.shape == rep.F.shape:
        metrics["erel2"] = erel2(rep.f_final, truth.f)
    report = {
        "version": 1,
        "versions": _versions(),
        "signal": str(signal_path),
        "test": test,
        "seed": sig.seed,
        "delta": sig.delta,
        "method": rep.method,
        "metrics": metrics,
        "outer_iters": rep.outer_iters,
        "inner_iters_total": rep.inner_iters_total,
        "stop_reason": rep.stop_reason,
        "eps2_history": rep.eps2_history,
        "objective_history": rep.objective_history,
        "config": asdict(cfg),
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    write_csv(out / "diagnostics.csv",
              ["k", "eps2", "alpha", "xi", "lambda_min", "lambda_median", "lambda_max", "inner_iters"],
              [(k, p.eps2, p.alpha, p.xi, float(p.lam.min()), float(np.median(p.lam)), float(p.lam.max()), j)
               for k, (p, j) in enumerate(zip(rep.penalty_snapshots, rep.inner_iters))])
    write_csv(out / "objective.csv", ["k", "objective"], enumerate(rep.objective_history))
    return report


def _invert_job(job):
    return cmd_invert(*job)


def _load_runs(run_dirs):
    runs = []
    for d in run_dirs:
        d = Path(d)
        path = d / "report.json"
        if not path.exists():
            raise FileNotFoundError(f"{d} has no report.json")
        rep = json.loads(path.read_text())
        runs.append((d, rep))
    if not runs:
        raise ValueError("no runs to report")
    return runs


def _read_extra_rows(path):
    import csv

    with open(path, newline="") as fh:
        return [
            {"test": r["test"], "method": r["method"], "erel2": float(r["erel2"]),
             "rmsd": float(r["rmsd"]) if r.get("rmsd") else None, "time": float(r["time"])}
            for r in csv.DictReader(fh)
        ]


def efficiency_rows(summary):
    """PAL/PEG per ``(test, method)`` from mean errors and times.

    ``summary`` maps ``(test, method)`` to ``(erel2, time)``; the reference
    is the smallest error and the longest time within each test.
    """
    rows = []
    tests = sorted({t for t, _ in summary})
    for test in tests:
        items = {m: v for (t, m), v in summary.items() if t == test}
        errs = [e for e, _ in items.values() if e is not None]
        err_min = min(errs) if errs else None
        time_max = max(tm for _, tm in items.values())
        for method in sorted(items):
            e, tm = items[method]
            rows.append((test, method,
                         pal(e, err_min) if err_min and e is not None else None,
                         peg(tm, time_max)))
    return rows


def cmd_report(run_dirs, out: Path, extra_rows=None) -> dict:
    """Aggregate runs into accuracy and efficiency CSVs plus per-run plot exports.

    ``accuracy.csv`` holds only deterministic quantities; wall-clock numbers
    go to ``timing.csv`` and ``efficiency.csv``.
    """
    runs = _load_runs(run_dirs)
    out.mkdir(parents=True, exist_ok=True)
    groups: dict = {}
    for d, rep in runs:
        groups.setdefault((rep["test"], rep["method"]), []).append(rep)
    acc, timing, summary = [], [], {}
    for key in sorted(groups):
        reps = groups[key]
        e = [r["metrics"]["erel2"] for r in reps if "erel2" in r["metrics"]]
        row = aggregate(key[1], e, [r["metrics"]["rmsd"] for r in reps],
                        [r["metrics"]["wall_time"] for r in reps])
        acc.append((key[0], key[1], row.n_realizations, row.erel2, row.erel2_std, row.rmsd, row.rmsd_std,
                    float(np.mean([r["outer_iters"] for r in reps]))))
        timing.append((key[0], key[1], row.n_realizations, row.wall_time, row.wall_time_std))
        summary[key] = (row.erel2, row.wall_time)
    for r in extra_rows or []:
        summary[(r["test"], r["method"])] = (r["erel2"], r["time"])
    write_csv(out / "accuracy.csv",
              ["test", "method", "n", "erel2_mean", "erel2_std", "rmsd_mean", "rmsd_std", "outer_iters_mean"], acc)
    write_csv(out / "timing.csv", ["test", "method", "n", "time_mean", "time_std"], timing)
    eff = efficiency_rows(summary)
    write_csv(out / "efficiency.csv", ["test", "method", "pal_percent", "peg_percent"], eff)
    for i, (d, rep) in enumerate(runs):
        m = read_map(d / "map.bin")
        name = f"{i:03d}_{d.name}"
        write_csv(out / f"{name}_contour.csv", ["T1", "T2", "F"], contour_rows(m))
        write_csv(out / f"{name}_projections.csv", ["axis", "T", "value"], projection_rows(m))
    return {"accuracy": acc, "timing": timing, "efficiency": eff}


# -- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="l1ll2", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate synthetic signals and the true map")
    _add_config_flags(sim, ["preset", "width", "n1", "n2", "Tmin", "Tmax", "kernel", "m1", "m2",
                            "t1_min", "t1_max", "t1_spacing", "echo_spacing", "delta", "seeds"])
    sim.add_argument("--out", type=Path, required=True)

    inv = sub.add_parser("invert", help="invert one or more signal files")
    inv.add_argument("signals", type=Path, nargs="+")
    _add_config_flags(inv, ["n1", "n2", "Tmin", "Tmax", "method", "tau_outer", "tau_inner",
                            "max_outer", "max_inner", "gp_iters", "alpha", "beta0", "beta0_mode", "beta0_rel",
                            "beta_p", "beta_c", "rho", "radius", "lambda_rule"])
    inv.add_argument("--truth", type=Path, help="ground-truth map (defaults to the one named in the signal)")
    inv.add_argument("--out", type=Path, required=True)
    inv.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    rep = sub.add_parser("report", help="tabulate completed runs")
    rep.add_argument("runs", type=Path, nargs="+")
    rep.add_argument("--out", type=Path, required=True)
    rep.add_argument("--extra-rows", type=Path,
                     help="CSV (test,method,erel2,rmsd,time) of external results, e.g. reference solvers")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            for p in cmd_simulate(_load_config(args), args.out):
                print(p)
        elif args.command == "invert":
            cfg = _load_config(args)
            explicit = args.n1 is not None or args.n2 is not None or (args.config and (cfg.n1 or cfg.n2))
            many = len(args.signals) > 1
            jobs = [(s, cfg, args.out / s.stem if many else args.out, args.truth, bool(explicit))
                    for s in args.signals]
            if args.jobs > 1 and many:
                with ProcessPoolExecutor(args.jobs) as pool:
                    reports = list(pool.map(_invert_job, jobs))
            else:
                reports = [_invert_job(j) for j in jobs]
            for r in reports:
                print(json.dumps({k: r[k] for k in ("signal", "method", "metrics", "stop_reason")}, sort_keys=True))
        else:
            extra = _read_extra_rows(args.extra_rows) if args.extra_rows else None
            cmd_report(args.runs, args.out, extra)
            print(args.out)
    except (DivergenceError, FloatingPointError, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ParseError, OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
