"""Command-line entry points: evaluate, run, reference, metrics.

Every subcommand is a deterministic function of its inputs and seed;
``run`` writes ``front.csv``, ``bcs.csv`` and ``report.json`` whose bytes
reproduce exactly for a fixed configuration, with or without worker
processes.

Exit codes for ``evaluate``: 0 converged and feasible, 2 constraint
violation, 3 power flow did not converge, 1 bad input.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bundled_case_path
from .decision import BcsReport, FcmParams, GrpWeights, select_bcs
from .metrics import build_reference_front, metric_report
from .moea import MoeaParams, run as moea_run
from .network import (
    CaseError,
    ControlVector,
    NetworkCase,
    control_bounds,
    current_controls,
    load_case,
)
from .powerflow import evaluate

PREFERENCE_NAMES = {0: "economy", 1: "security"}


def _fmt(x: float) -> str:
    return repr(float(x))


def _load_any_case(spec: str) -> NetworkCase:
    """Treat ``spec`` as a path first, then as a bundled case name."""
    if Path(spec).exists():
        return load_case(spec)
    try:
        return load_case(bundled_case_path(spec))
    except FileNotFoundError:
        raise CaseError(f"no case file or bundled case named {spec!r}") from None


def parse_physical_controls(case: NetworkCase, values: list[float]) -> ControlVector:
    """Interpret physical units (p.u. volts, tap ratios, Mvar) as controls."""
    ng, nt, nc = len(case.generators), len(case.transformers), len(case.shunts)
    if len(values) != ng + nt + nc:
        raise ValueError(
            f"control vector needs {ng}+{nt}+{nc} values, got {len(values)}"
        )
    gen_v = tuple(values[:ng])
    taps = []
    for tr, ratio in zip(case.transformers, values[ng:ng + nt]):
        step = (ratio - tr.t_min) / tr.step
        if abs(step - round(step)) > 1e-6:
            raise ValueError(f"tap ratio {ratio} is not on the {tr.step} grid")
        taps.append(int(round(step)))
    banks = []
    for s, mvar in zip(case.shunts, values[ng + nt:]):
        b = mvar / s.mvar_per_bank
        if abs(b - round(b)) > 1e-6:
            raise ValueError(f"shunt {mvar} Mvar is not a multiple of {s.mvar_per_bank}")
        banks.append(int(round(b)))
    return ControlVector(gen_v=gen_v, tap_steps=tuple(taps), shunt_banks=tuple(banks))


def _controls_from_args(case: NetworkCase, args) -> ControlVector:
    values: list[float] | None = None
    if args.controls is not None:
        path = Path(args.controls)
        text = path.read_text() if path.exists() else args.controls
        values = [float(tok) for tok in text.replace(",", " ").split()]
    elif args.vg or args.taps or args.shunts:
        def split(s):
            return [float(t) for t in s.replace(",", " ").split()] if s else []
        values = split(args.vg) + split(args.taps) + split(args.shunts)
    if values is None:
        return current_controls(case)
    return parse_physical_controls(case, values)


def decoded_controls(case: NetworkCase, u: ControlVector) -> list[float]:
    """Control vector in physical units, mirroring the CSV column order."""
    out = list(u.gen_v)
    for tr, k in zip(case.transformers, u.tap_steps):
        out.append(tr.t_min + k * tr.step)
    for s, b in zip(case.shunts, u.shunt_banks):
        out.append(b * s.mvar_per_bank)
    return out


def _csv_header(case: NetworkCase) -> list[str]:
    cols = ["ploss_mw", "vd", "violation"]
    cols += [f"vg_{i + 1}" for i in range(len(case.generators))]
    cols += [f"tap_{i + 1}" for i in range(len(case.transformers))]
    cols += [f"shunt_{i + 1}" for i in range(len(case.shunts))]
    return cols


def write_front_csv(path: Path, case: NetworkCase, members) -> None:
    rows = [",".join(_csv_header(case))]
    for m in members:
        vals = [m.objectives.p_loss, m.objectives.vd, m.violation]
        vals += decoded_controls(case, m.u)
        rows.append(",".join(_fmt(v) for v in vals))
    path.write_text("\n".join(rows) + "\n")


def write_bcs_csv(path: Path, case: NetworkCase, members, report: BcsReport) -> None:
    rows = [",".join(["cluster", "preference", "priority"] + _csv_header(case))]
    for c, idx in enumerate(report.bcs_indices):
        m = members[idx]
        vals = [m.objectives.p_loss, m.objectives.vd, m.violation]
        vals += decoded_controls(case, m.u)
        name = PREFERENCE_NAMES.get(c, f"cluster{c + 1}")
        rows.append(",".join([str(c + 1), name, _fmt(report.cluster_priority[idx])]
                             + [_fmt(v) for v in vals]))
    path.write_text("\n".join(rows) + "\n")


def read_front_csv(path: Path) -> np.ndarray:
    """Objective pairs from a front/reference CSV (by header column)."""
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValueError(f"{path}: empty front file")
    header = [h.strip() for h in lines[0].split(",")]
    try:
        ip, iv = header.index("ploss_mw"), header.index("vd")
    except ValueError:
        raise ValueError(f"{path}: header must contain ploss_mw and vd") from None
    pts = []
    for ln in lines[1:]:
        toks = ln.split(",")
        pts.append((float(toks[ip]), float(toks[iv])))
    return np.array(pts)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    case = _load_any_case(args.case)
    u = _controls_from_args(case, args)
    bounds = control_bounds(case)
    if not bounds.contains(u):
        raise ValueError("control vector out of bounds")
    obj, vio = evaluate(case, u)
    if vio.non_convergence:
        print("power flow did not converge")
        return 3
    print(f"Ploss = {obj.p_loss:.4f} MW")
    print(f"VD = {obj.vd:.4f}")
    print(f"violation: total={vio.total:.6f} "
          f"(q_gen={vio.q_gen:.6f}, voltage={vio.voltage:.6f}, branch={vio.branch:.6f})")
    return 0 if vio.feasible else 2


def cmd_run(args) -> int:
    case = _load_any_case(args.case)
    params = MoeaParams(
        n=args.pop, eval_budget=args.evals, f=args.f, cr=args.cr,
        k=args.knn_k, n_cand=args.n_cand, seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        t0 = time.time()
        front, report = moea_run(case, params, jobs=args.jobs)
        elapsed = time.time() - t0

        front_path = out / "front.csv"
        write_front_csv(front_path, case, front.members)
        written.append(front_path)

        payload = {
            "case": case.name,
            "seed": params.seed,
            "params": dataclasses.asdict(params),
            "evaluations": report.evaluations,
            "generations": report.generations,
            "archive_size": len(front),
            "elapsed_seconds": round(elapsed, 3),
            "trace": report.trace,
        }

        if not args.no_decision:
            weights = GrpWeights(tuple(float(t) for t in args.weights.split(",")))
            fcm_params = FcmParams(n_clusters=args.clusters, seed=params.seed)
            decision = select_bcs(front.objectives(), fcm_params, weights)
            bcs_path = out / "bcs.csv"
            write_bcs_csv(bcs_path, case, front.members, decision)
            written.append(bcs_path)
            payload["decision"] = {
                "clusters": args.clusters,
                "weights": list(weights.values),
                "labels": decision.labels.tolist(),
                "priority": [round(p, 9) for p in decision.priority.tolist()],
                "bcs_indices": decision.bcs_indices,
                "warnings": decision.warnings,
            }
            for c, idx in enumerate(decision.bcs_indices):
                m = front.members[idx]
                name = PREFERENCE_NAMES.get(c, f"cluster{c + 1}")
                print(f"BCS {c + 1} ({name}): Ploss = {m.objectives.p_loss:.4f} MW, "
                      f"VD = {m.objectives.vd:.4f}")

        report_path = out / "report.json"
        report_path.write_text(json.dumps(payload, indent=2) + "\n")
        written.append(report_path)
        print(f"front size {len(front)}, {report.evaluations} evaluations, "
              f"{elapsed:.1f} s -> {out}")
        return 0
    except Exception:
        for p in written:
            p.unlink(missing_ok=True)
        raise


def cmd_reference(args) -> int:
    case = _load_any_case(args.case)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    front = build_reference_front(
        case, n_weights=args.n_weights, per_run_budget=args.per_run_budget,
        pop_size=args.pop, seed=args.seed, jobs=args.jobs,
    )
    path = out / "reference.csv"
    rows = ["ploss_mw,vd"] + [f"{_fmt(p)},{_fmt(v)}" for p, v in front]
    path.write_text("\n".join(rows) + "\n")
    print(f"{len(front)} non-dominated reference points -> {path}")
    return 0


def cmd_metrics(args) -> int:
    front = read_front_csv(Path(args.front))
    reference = read_front_csv(Path(args.reference))
    rep = metric_report(front, reference, normalized=args.normalized)
    print(f"GD = {rep.gd:.6f}")
    print(f"spread = {rep.spread:.6f}")
    print(f"IGD = {rep.igd:.6f}")
    print(f"(front {rep.n_approx} points, reference {rep.n_reference} points, "
          f"{'normalized' if rep.normalized else 'raw'} units)")
    return 0


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------

def _add_case_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", required=True,
                   help="case file path or bundled name (ieee30, ieee118)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morpd",
        description="Multi-objective optimal reactive power dispatch toolkit",
    )
    parser.add_argument("--config", help="JSON file with defaults for any flag")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="power flow + objectives for one control vector")
    _add_case_arg(p)
    p.add_argument("--controls", help="file or inline list: volts, tap ratios, Mvar")
    p.add_argument("--vg", help="comma-separated generator voltages (p.u.)")
    p.add_argument("--taps", help="comma-separated tap ratios (p.u.)")
    p.add_argument("--shunts", help="comma-separated shunt injections (Mvar)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="optimize and extract compromise solutions")
    _add_case_arg(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pop", type=int, default=100, help="population size")
    p.add_argument("--evals", type=int, default=10000, help="evaluation budget")
    p.add_argument("--f", type=float, default=0.5, help="DE mutation factor")
    p.add_argument("--cr", type=float, default=1.0, help="DE crossover rate")
    p.add_argument("--knn-k", type=int, default=5, help="KNN neighbor count")
    p.add_argument("--n-cand", type=int, default=3,
                   help="candidate trials screened per parent")
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--weights", default="0.5,0.5",
                   help="comma-separated objective weights for the decision step")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--no-decision", action="store_true",
                   help="skip clustering and compromise extraction")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reference", help="weighted-sum reference front")
    _add_case_arg(p)
    p.add_argument("--n-weights", type=int, default=100)
    p.add_argument("--per-run-budget", type=int, default=2000)
    p.add_argument("--pop", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("metrics", help="GD / spread / IGD between two fronts")
    p.add_argument("--front", required=True, help="front CSV (needs ploss_mw, vd)")
    p.add_argument("--reference", required=True, help="reference CSV")
    p.add_argument("--normalized", action="store_true")
    p.set_defaults(func=cmd_metrics)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse once to find --config, re-parse with its values as defaults."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    config = json.loads(Path(args.config).read_text())
    if not isinstance(config, dict):
        raise ValueError("config file must hold a JSON object")
    sub_actions = [a for a in parser._actions
                   if isinstance(a, argparse._SubParsersAction)]
    subparser = sub_actions[0].choices[args.command]
    known = {a.dest for a in subparser._actions}
    defaults = {k.replace("-", "_"): v for k, v in config.items()}
    unknown = set(defaults) - known
    if unknown:
        raise ValueError(f"config keys not recognized: {sorted(unknown)}")
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, sys.argv[1:] if argv is None else argv)
        return args.func(args)
    except (CaseError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
