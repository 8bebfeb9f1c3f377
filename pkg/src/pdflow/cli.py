"""Command-line front end.

    pdflow run      --spec FILE | --preset NAME [preset flags]  [--out DIR] [--charts]
    pdflow validate --spec FILE | --preset NAME [preset flags]
    pdflow sweep    (run source) --grid dotted.path=v1,v2,... [--out DIR] [--charts]
    pdflow compare  --spec FILE | --preset example2-compare    [--out DIR] [--charts]

Exit codes: 0 success, 2 invalid spec, 3 integration/solver failure.
run writes resolved_spec.json, trajectory.csv, metrics.csv, report.json and
optional charts/ into the output directory; rerunning from the emitted
resolved spec reproduces the CSVs byte for byte.  PDFLOW_THREADS caps sweep
parallelism.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import analysis
from ._fmt import dumps, fmt17
from .charts import write_compare_charts, write_run_charts
from .dynamics import SystemKind, simulate
from .integrator import (
    IntegrationBudgetError,
    PoisonedStateError,
    StiffnessError,
    trajectory_csv_text,
)
from .presets import COMPARE_PRESETS, PRESET_NAMES, build_preset, preset_help
from .problem import SolverFailureError, solve_saddle_point
from .runspec import (
    SpecError,
    build_config,
    build_initial,
    build_problem,
    build_samples,
    build_system,
    resolve_compare_spec,
    resolve_spec,
    run_spec_for_member,
)
from .schedules import validate_regimes

_RUNTIME_ERRORS = (
    IntegrationBudgetError,
    StiffnessError,
    PoisonedStateError,
    SolverFailureError,
)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "compare":
            return _cmd_compare(args)
    except (SpecError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: invalid spec: {exc}", file=sys.stderr)
        return 2
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    parser.print_help()
    return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdflow",
        description="Simulate damped primal-dual flows with time scaling and "
                    "Tikhonov regularization, and certify their decay rates.",
        epilog=preset_help(),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "validate", "sweep", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--spec", type=Path, help="run-spec JSON file")
        p.add_argument("--preset", choices=PRESET_NAMES, help="built-in experiment")
        p.add_argument("--r", type=float, default=1.6,
                       help="Tikhonov decay exponent for example1-fig1")
        p.add_argument("--eps", choices=("on", "off"), default="on",
                       help="Tikhonov term toggle for example1-strong")
        p.add_argument("--mned", default="5,1,1,5",
                       help="example1 coefficients m,n,e,d")
        p.add_argument("--system", default=None,
                       help="member name when using a comparison preset with run/validate")
        p.add_argument("--T", type=float, default=None, help="override horizon end")
        p.add_argument("--r2", type=float, default=2.5,
                       help="Tikhonov decay exponent for rate-order")
        if name != "validate":
            p.add_argument("--out", type=Path, default=Path("pdflow_out"),
                           help="output directory")
            p.add_argument("--charts", action="store_true", help="emit SVG charts")
        if name == "sweep":
            p.add_argument("--grid", action="append", default=[],
                           metavar="PATH=V1,V2,...",
                           help="sweep values for a dotted spec path (repeatable)")
    return parser


def _load_spec_file(path: Path) -> dict:
    return json.loads(Path(path).read_text())


def _spec_from_args(args, want_compare: bool) -> dict:
    if (args.spec is None) == (args.preset is None):
        raise SpecError("provide exactly one of --spec or --preset")
    if args.spec is not None:
        spec = _load_spec_file(args.spec)
    else:
        spec = build_preset(args.preset, r=args.r, eps=args.eps, mned=args.mned,
                            T=args.T, system=args.system, r2=args.r2)
    is_compare = "systems" in spec
    if want_compare and not is_compare:
        raise SpecError("compare needs a comparison spec (a 'systems' array or a compare preset)")
    if not want_compare and is_compare:
        raise SpecError(
            "this spec compares several systems; use `pdflow compare`, or pick one "
            "member with --system"
        )
    return spec


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def run_one(resolved: dict, out_dir: Path, charts: bool = False) -> dict:
    """Execute a resolved run spec and write all artifacts into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prob = build_problem(resolved["problem"])
    t0 = float(resolved["horizon"]["t0"])
    T = float(resolved["horizon"]["T"])
    kind, params = build_system(resolved["system"], t0)
    init = build_initial(resolved["initial"], prob, kind)
    cfg = build_config(resolved["integrator"])
    samples = build_samples(resolved["samples"])
    warnings = params.validate(kind)

    regime = None
    if kind == SystemKind.TIKHONOV_PD:
        regime = validate_regimes(params.beta, params.eps, params.gamma, params.delta, t0=t0)
        warnings.extend(regime.notes)

    refs = solve_saddle_point(prob)
    traj = simulate(prob, kind, params, t0, T, init, cfg=cfg, samples=samples)
    mser = analysis.metrics(traj, prob, refs)
    erep = None
    integrals = None
    if kind == SystemKind.TIKHONOV_PD:
        erep = analysis.energies(traj, prob, refs, params)
        integrals = analysis.integral_estimates(traj, prob, refs, params)
        warnings.extend(erep.flags)

    (out_dir / "resolved_spec.json").write_text(dumps(resolved))
    (out_dir / "trajectory.csv").write_text(
        trajectory_csv_text(traj, (prob.n1, prob.n2, prob.m)))
    (out_dir / "metrics.csv").write_text(analysis.metrics_csv_text(mser, erep))

    fit_window = (max(t0, T / 10.0), T)
    fits = {}
    for name in ("lag_gap", "phi_err", "feas", "minnorm_dist"):
        try:
            fits[name] = analysis.fit_rate(mser.times, mser.series(name), fit_window).to_dict()
        except ValueError:
            fits[name] = None

    report = {
        "problem": {"name": prob.name or "inline", "n1": prob.n1, "n2": prob.n2,
                    "m": prob.m, "l1": prob.l1, "l2": prob.l2},
        "system": resolved["system"],
        "horizon": resolved["horizon"],
        "backend": traj.stats["backend"],
        "integration": dict(traj.stats),
        "references": {
            "x_star": refs.x_star.tolist(),
            "y_star": refs.y_star.tolist(),
            "lambda_star": refs.lambda_star.tolist(),
            "phi_star": refs.phi_star,
            "x_bar": refs.x_bar.tolist(),
            "y_bar": refs.y_bar.tolist(),
            "kkt_residual": refs.kkt_residual,
            "unique": refs.unique,
        },
        "regime": regime.to_dict() if regime is not None else None,
        "rate_fits": fits,
        "energy": None if erep is None else {
            "monotonicity_violation": erep.monotonicity_violation,
            "Etilde_initial": float(erep.Etilde[0]),
            "Etilde_final": float(erep.Etilde[-1]),
            "sign_indefinite": erep.sign_indefinite,
        },
        "integral_estimates": None if integrals is None else {
            name: float(arr[-1]) for name, arr in integrals.as_dict().items()
        },
        "final_metrics": {
            "lag_gap": float(mser.lag_gap[-1]),
            "phi_err": float(mser.phi_err[-1]),
            "feas": float(mser.feas[-1]),
            "minnorm_dist": float(mser.minnorm_dist[-1]),
        },
        "warnings": warnings,
    }
    (out_dir / "report.json").write_text(dumps(report))
    if charts or resolved["outputs"].get("charts"):
        write_run_charts(out_dir)
    return report


def _cmd_run(args) -> int:
    spec = _spec_from_args(args, want_compare=False)
    resolved = resolve_spec(spec)
    report = run_one(resolved, args.out, charts=args.charts)
    fm = report["final_metrics"]
    print(f"run complete: backend={report['backend']} "
          f"accepted={report['integration']['n_accepted']} "
          f"rejected={report['integration']['n_rejected']}")
    print(f"final metrics @ T: lag_gap={fm['lag_gap']:.3e} phi_err={fm['phi_err']:.3e} "
          f"feas={fm['feas']:.3e} minnorm_dist={fm['minnorm_dist']:.3e}")
    for w in report["warnings"]:
        print(f"warning: {w}")
    print(f"artifacts in {args.out}")
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def _cmd_validate(args) -> int:
    if args.spec is not None:
        raw = _load_spec_file(args.spec)
    else:
        raw = build_preset(args.preset, r=args.r, eps=args.eps, mned=args.mned,
                           T=args.T, system=args.system, r2=args.r2)
    if "systems" in raw:
        resolved = resolve_compare_spec(raw)
        for entry in resolved["systems"]:
            member = run_spec_for_member(resolved, entry["name"])
            print(f"== system {entry['name']} ==")
            _print_validation(resolve_spec(member))
        return 0
    _print_validation(resolve_spec(raw))
    return 0


def _print_validation(resolved: dict) -> None:
    t0 = float(resolved["horizon"]["t0"])
    kind, params = build_system(resolved["system"], t0)
    warnings = params.validate(kind)
    if kind != SystemKind.TIKHONOV_PD:
        print(f"{kind.value}: no Tikhonov/time-scaling hypotheses to check")
        for w in warnings:
            print(f"warning: {w}")
        return
    report = validate_regimes(params.beta, params.eps, params.gamma, params.delta, t0=t0)
    print(report.summary())
    for w in warnings:
        print(f"warning: {w}")
    if report.earliest_valid_t > t0:
        print(f"warning: growth bound only valid from t = {report.earliest_valid_t:g}")


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _parse_grid(grid_args) -> list[tuple[str, list]]:
    grids = []
    for item in grid_args:
        if "=" not in item:
            raise SpecError(f"--grid expects PATH=V1,V2,..., got {item!r}")
        path, _, values = item.partition("=")
        vals = [v for v in values.split(",") if v.strip()]
        if not path.strip() or not vals:
            raise SpecError(f"--grid expects PATH=V1,V2,..., got {item!r}")
        grids.append((path.strip(), [_parse_scalar(v.strip()) for v in vals]))
    return grids


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _apply_override(spec: dict, path: str, value) -> None:
    keys = path.split(".")
    node = spec
    for key in keys[:-1]:
        if not isinstance(node, dict):
            raise SpecError(f"grid path {path!r} does not address a spec field")
        node = node.setdefault(key, {})
    if not isinstance(node, dict):
        raise SpecError(f"grid path {path!r} does not address a spec field")
    node[keys[-1]] = value


def _cmd_sweep(args) -> int:
    base = _spec_from_args(args, want_compare=False)
    grids = _parse_grid(args.grid)
    if not grids:
        raise SpecError("sweep requires at least one non-empty --grid")
    names = [g[0] for g in grids]
    cells = list(itertools.product(*(g[1] for g in grids)))

    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)

    def run_cell(index_values):
        index, values = index_values
        spec = copy.deepcopy(base)
        for path, value in zip(names, values):
            _apply_override(spec, path, value)
        cell_dir = out_root / f"cell_{index:03d}"
        try:
            resolved = resolve_spec(spec)
            report = run_one(resolved, cell_dir, charts=args.charts)
            return index, values, "ok", report
        except (SpecError, *_RUNTIME_ERRORS) as exc:
            return index, values, f"failed: {exc}", None

    workers = os.environ.get("PDFLOW_THREADS")
    max_workers = int(workers) if workers else (os.cpu_count() or 1)
    max_workers = max(1, min(max_workers, len(cells)))
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(run_cell, enumerate(cells)))
    results.sort(key=lambda r: r[0])

    metric_names = ("lag_gap", "phi_err", "feas", "minnorm_dist")
    header = (["cell"] + names + ["status"]
              + [f"{m}_T" for m in metric_names] + [f"slope_{m}" for m in metric_names])
    lines = [",".join(header)]
    n_ok = 0
    for index, values, status, report in results:
        row = [f"cell_{index:03d}"] + [str(v) for v in values] + [status.split(":")[0]]
        if report is None:
            row.extend(["nan"] * (2 * len(metric_names)))
        else:
            n_ok += 1
            row.extend(fmt17(report["final_metrics"][m]) for m in metric_names)
            for m in metric_names:
                fit = report["rate_fits"][m]
                row.append(fmt17(fit["slope"]) if fit else "nan")
        lines.append(",".join(row))
    (out_root / "sweep.csv").write_text("\n".join(lines) + "\n")

    for index, values, status, _ in results:
        print(f"cell_{index:03d} {dict(zip(names, values))}: {status}")
    print(f"sweep: {n_ok}/{len(cells)} cells succeeded; aggregate in {out_root / 'sweep.csv'}")
    return 0 if n_ok > 0 else 3


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def _cmd_compare(args) -> int:
    spec = _spec_from_args(args, want_compare=True)
    resolved = resolve_compare_spec(spec)
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "resolved_spec.json").write_text(dumps(resolved))

    names = [entry["name"] for entry in resolved["systems"]]
    reports = {}
    for name in names:
        member = resolve_spec(run_spec_for_member(resolved, name))
        reports[name] = run_one(member, out_root / name, charts=False)

    metric_names = ("lag_gap", "phi_err", "feas", "minnorm_dist")
    lines = [",".join(["system"] + [f"{m}_T" for m in metric_names])]
    for name in names:
        fm = reports[name]["final_metrics"]
        lines.append(",".join([name] + [fmt17(fm[m]) for m in metric_names]))
    (out_root / "comparison.csv").write_text("\n".join(lines) + "\n")
    if args.charts:
        write_compare_charts(out_root, names)

    print(f"{'system':>20s} {'phi_err(T)':>12s} {'feas(T)':>12s}")
    for name in names:
        fm = reports[name]["final_metrics"]
        print(f"{name:>20s} {fm['phi_err']:12.3e} {fm['feas']:12.3e}")
    print(f"artifacts in {out_root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
