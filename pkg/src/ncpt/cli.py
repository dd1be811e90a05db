"""Batch command-line front end.

Subcommands: simulate, estimate, orders, detect, axioms, state-exists.
All inputs are JSON; tables are emitted as UTF-8 CSV with full-precision
cells so that re-parsing reproduces the in-memory values exactly. Exit
codes: 0 success, 1 property failure, 2 input error, 3 data insufficiency.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .detection import (
    DetectionProblem,
    Povm,
    StateExistenceProblem,
    detection_report,
    min_error_over_orders,
    state_exists_for_povm,
)
from .empirics import (
    CountTable,
    OrderedDistribution,
    conditional_table,
    order_effect_report,
    ordered_distribution,
)
from .errors import (
    DegenerateSpec,
    EmptyTable,
    InsufficientData,
    NcptError,
    ZeroDenominator,
)
from .event_state import (
    AxiomCheck,
    AxiomReport,
    ClassicalModel,
    EventSet,
    axiom_suite,
    classical_axiom_suite,
)
from .simulate import (
    SimConfig,
    decision_rates,
    simulate_arrays,
    write_run_records_csv,
)

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_INPUT_ERROR = 2
EXIT_INSUFFICIENT_DATA = 3


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _matrix_from_json(obj) -> np.ndarray:
    if isinstance(obj, dict):
        real = np.asarray(obj["real"], dtype=float)
        imag = np.asarray(obj.get("imag", np.zeros_like(real)), dtype=float)
        return real + 1j * imag
    return np.asarray(obj, dtype=float).astype(np.complex128)


def _fmt(x) -> str:
    return repr(float(x))


def cmd_simulate(args) -> int:
    payload = _load_json(args.config)
    if args.runs is not None:
        payload["runs"] = args.runs
    if args.seed is not None:
        payload["seed"] = args.seed
    config = SimConfig.from_dict(payload)
    out = _out_dir(args)
    h, decisions, stop_times = simulate_arrays(config)
    write_run_records_csv(out / "records.csv", h, decisions, stop_times,
                          config.preference)
    table = CountTable.from_arrays(h, decisions, stop_times, config.preference)
    (out / "counts.json").write_text(table.to_json(), encoding="utf-8")
    rates = decision_rates(h, decisions)
    print(f"simulate: {config.runs} runs, seed {config.seed}")
    for hv in (0, 1):
        if rates[hv] is not None:
            cells = ", ".join(f"P(D{i + 1}=1)={r:.4f}" for i, r in enumerate(rates[hv]))
            print(f"  h={hv}: {cells}")
    return EXIT_OK


def _write_conditionals_csv(path, rows, target):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["operation", f"E{target}'", f"E{target}"])
        for label, est0, est1, _ in rows:
            writer.writerow([
                label,
                "" if est0 is None else _fmt(est0),
                "" if est1 is None else _fmt(est1),
            ])


def cmd_estimate(args) -> int:
    table = CountTable.from_dict(_load_json(args.counts))
    out = _out_dir(args)
    target = 3
    flagged_any = False
    for h in (0, 1):
        rows, flagged = conditional_table(table, h, target=target)
        _write_conditionals_csv(out / f"conditionals_h{h}.csv", rows, target)
        flagged_any = flagged_any or bool(flagged)
        if flagged:
            print(f"estimate: h={h} has {len(flagged)} unobserved branches: "
                  + ", ".join(flagged))
    report = order_effect_report(table, z_threshold=args.z_threshold)
    (out / "order_effect.json").write_text(json.dumps(report, indent=2),
                                           encoding="utf-8")
    print(f"estimate: significant order effect = "
          f"{report['significant_order_effect']} (|z| >= {args.z_threshold})")
    return EXIT_INSUFFICIENT_DATA if flagged_any else EXIT_OK


def _distributions_from_payload(payload):
    if "distributions" in payload:
        return [OrderedDistribution.from_dict(d) for d in payload["distributions"]]
    table = CountTable.from_dict(payload)
    from itertools import permutations

    dists = []
    for perm in permutations((1, 2, 3)):
        dists.append(ordered_distribution(table, perm))
    return dists


def cmd_orders(args) -> int:
    payload = _load_json(args.counts)
    priors = tuple(float(x) for x in args.priors.split(","))
    dists = _distributions_from_payload(payload)
    rows, best = min_error_over_orders(dists, priors)
    out = _out_dir(args)
    with open(out / "order_errors.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["order", "error", "best"])
        for order, err in rows:
            writer.writerow([order, _fmt(err), str(order == best).lower()])
    print(f"orders: best collection order = {best}")
    for order, err in rows:
        print(f"  {order}: {err:.6f}")
    return EXIT_OK


def cmd_detect(args) -> int:
    prob = DetectionProblem.from_dict(_load_json(args.config))
    report = detection_report(prob)
    out = _out_dir(args)
    (out / "detection.json").write_text(json.dumps(report, indent=2),
                                        encoding="utf-8")
    print(f"detect: classical error = {report['classical']['error']:.6f}, "
          f"projective error = {report['projective']['error']:.6f}")
    return EXIT_OK


def _axiom_report_from_spec(payload) -> AxiomReport:
    kind = payload.get("model", "von_neumann")
    if kind == "classical":
        size = int(payload["size"])
        full = (1 << size) - 1
        events = {0, full}
        for e in payload.get("events", []):
            events.add(int(e))
            events.add(full ^ int(e))
        model = ClassicalModel(
            sample_space_size=size,
            events=tuple(sorted(events)),
            measures=tuple(tuple(m) for m in payload["measures"]),
        )
        return classical_axiom_suite(model)

    if "angles_deg" in payload:
        events = EventSet.from_angles([np.deg2rad(a) for a in payload["angles_deg"]])
    else:
        mats = [_matrix_from_json(e) for e in payload["events"]]
        dim = mats[0].shape[0]
        eye = np.eye(dim, dtype=np.complex128)
        closed = [np.zeros((dim, dim), dtype=np.complex128), eye]
        for m in mats:
            closed.extend([m, eye - m])
        try:
            events = EventSet(dim=dim, events=tuple(closed))
        except (ValueError, NcptError) as exc:
            return AxiomReport(checks=[AxiomCheck(
                check_id="event_projection_invariant",
                instance=str(exc),
                max_deviation=float("inf"),
                passed=False,
            )])
    rng = np.random.default_rng(int(payload.get("seed", 0)))
    dim = events.dim
    states = [np.eye(dim, dtype=np.complex128) / dim]
    for _ in range(int(payload.get("num_states", 20))):
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        g = a @ a.conj().T + 1e-6 * np.eye(dim)
        states.append(g / np.trace(g).real)
    return axiom_suite(events, states)


def cmd_axioms(args) -> int:
    report = _axiom_report_from_spec(_load_json(args.config))
    out_path = Path(args.out)
    if out_path.suffix != ".json":
        out_path.mkdir(parents=True, exist_ok=True)
        out_path = out_path / "axiom_report.json"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(report.to_json(), encoding="utf-8")
    if report.passed:
        print(f"axioms: all {len(report.checks)} checks passed")
        return EXIT_OK
    for check in report.failures():
        print(f"axioms: FAILED {check.check_id} ({check.instance}), "
              f"deviation {check.max_deviation:.3e}")
    return EXIT_PROPERTY_FAILURE


def cmd_state_exists(args) -> int:
    payload = _load_json(args.config)
    elements = tuple(_matrix_from_json(m) for m in payload["elements"])
    povm = Povm(elements=elements)
    problem = StateExistenceProblem(povm=povm,
                                    target=tuple(payload["target"]))
    result = state_exists_for_povm(problem)
    out_path = Path(args.out)
    if out_path.suffix != ".json":
        out_path.mkdir(parents=True, exist_ok=True)
        out_path = out_path / "state_existence.json"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(result.to_dict(), indent=2), encoding="utf-8")
    print(f"state-exists: {result.status}"
          + (f" ({result.note})" if result.note else ""))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncpt",
        description="Ordered-measurement simulation, order-effect estimation, "
                    "and minimum-error detection tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a sequential-test campaign")
    p.add_argument("--config", required=True, help="SimConfig JSON path")
    p.add_argument("--runs", type=int, default=None, help="override run count")
    p.add_argument("--seed", type=int, default=None, help="override seed")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("estimate", help="conditional tables and order-effect test")
    p.add_argument("--counts", required=True, help="count-table JSON path")
    p.add_argument("--z-threshold", type=float, default=3.0)
    p.add_argument("--out", default=".")
    p.set_defaults(handler=cmd_estimate)

    p = sub.add_parser("orders", help="minimum error per collection order")
    p.add_argument("--counts", required=True,
                   help="count-table JSON or ordered-distribution list JSON")
    p.add_argument("--priors", default="0.5,0.5")
    p.add_argument("--out", default=".")
    p.set_defaults(handler=cmd_orders)

    p = sub.add_parser("detect", help="solve one binary detection problem")
    p.add_argument("--config", required=True, help="DetectionProblem JSON path")
    p.add_argument("--out", default=".")
    p.set_defaults(handler=cmd_detect)

    p = sub.add_parser("axioms", help="verify conditioning axioms for a model spec")
    p.add_argument("--config", required=True, help="model spec JSON path")
    p.add_argument("--out", default=".", help="output directory or JSON path")
    p.set_defaults(handler=cmd_axioms)

    p = sub.add_parser("state-exists", help="state existence for a measurement")
    p.add_argument("--config", required=True,
                   help="JSON with POVM elements and target distribution")
    p.add_argument("--out", default=".", help="output directory or JSON path")
    p.set_defaults(handler=cmd_state_exists)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ZeroDenominator, InsufficientData, EmptyTable, DegenerateSpec) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError,
            NcptError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
