"""Command-line front end.

    tsqm analyze  (FILE | --builtin NAME) [--format human|machine]
    tsqm simulate (FILE | --builtin NAME) [--trials N] [--seed S] [--efficiency LABEL=ETA ...]
    tsqm scan     (FILE | --builtin NAME) [--contexts file|bipartitions|PATH]
    tsqm builtins [--export DIR]

Exit status: 0 success, 1 statistical inconsistency (some |z| > 5),
2 usage/parse/validation error, 3 empty ensemble.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    EmptyEnsemble,
    InvariantViolation,
    NoPostselectedTrials,
    ParseError,
    TooManyContexts,
    TsqmError,
    UnknownOutcome,
    ValidationError,
)
from .ensemble import Evolve, ExperimentSpec, Measure, compare_to_abl, exact_conditional, run_ensemble
from .experiments import BUILTINS, builtin
from .expfile import dump_experiment, parse_contexts, parse_experiment
from .hilbert import DensityOperator, pure_density
from .measure import MeasurementContext, lueders_mixture, trace_distribution, trace_probability
from .tsvf import CounterfactualVerdict, abl_distribution, bipartition_contexts, element_of_reality_scan

EXIT_OK = 0
EXIT_STATISTICS = 1
EXIT_USAGE = 2
EXIT_EMPTY = 3
Z_LIMIT = 5.0


def _p(x: float) -> str:
    return f"{x:.6f}"


def _emit(doc: dict | None, lines: list[str], fmt: str) -> str:
    if fmt == "machine":
        return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"
    return "\n".join(lines) + "\n"


def _table_lines(table, verdicts: bool = False, indent: str = "  ") -> list[str]:
    width = max((len(k) for k in table), default=0)
    out = []
    for k, v in table.items():
        row = f"{indent}{k:<{width}}  {_p(v)}"
        if verdicts:
            row += f"  {CounterfactualVerdict.from_probability(v).status.value}"
        out.append(row)
    return out


def _rank1_postselection(spec: ExperimentSpec) -> bool:
    return spec.postselects and spec.accept_projector().rank() == 1


# -- analyze ----------------------------------------------------------------------

def cmd_analyze(spec: ExperimentSpec, fmt: str = "human") -> tuple[str, int]:
    """Forward Born tables, ABL table and counterfactual verdicts."""
    lines = [f"experiment: {spec.name} (dim {spec.dim})"]
    doc: dict = {"experiment": spec.name, "dim": spec.dim, "steps": []}

    w: DensityOperator = pure_density(spec.pre_state)
    for k, step in enumerate(spec.steps):
        if isinstance(step, Evolve):
            m = step.unitary.matrix @ w.matrix @ step.unitary.matrix.conj().T
            w = DensityOperator((m + m.conj().T) / 2)
            lines.append(f"step {k}: evolve")
            doc["steps"].append({"step": k, "kind": "evolve"})
            continue
        table = trace_distribution(w, step.context)
        lines.append(f"step {k}: measure {step.context.label} (forward Born, unconditional)")
        lines += _table_lines(table)
        doc["steps"].append({"step": k, "kind": "measure", "context": step.context.label, "born": dict(table)})
        w = lueders_mixture(w, step.context)

    p_post = trace_probability(w, spec.accept_projector())
    doc["postselection"] = {"accept": spec.accept_outcome, "probability": p_post} if spec.postselects else None
    if spec.postselects:
        lines.append(f"postselection: {spec.accept_outcome} with probability {_p(p_post)}")
    empty = spec.postselects and p_post < 1e-12
    doc["empty_ensemble"] = bool(empty)
    doc["abl"] = None
    doc["conditional"] = None
    if empty:
        lines.append("EMPTY ENSEMBLE: no trial survives postselection")
        return _emit(doc, lines, fmt), EXIT_EMPTY

    measures = spec.measure_steps
    if len(measures) == 1 and _rank1_postselection(spec):
        k = measures[0]
        ctx = spec.steps[k].context
        try:
            table = abl_distribution(spec.boundary_conditions(k), ctx)
        except EmptyEnsemble:
            lines.append("EMPTY ENSEMBLE: no trial survives postselection")
            doc["empty_ensemble"] = True
            return _emit(doc, lines, fmt), EXIT_EMPTY
        lines.append(f"ABL at step {k}: {ctx.label}")
        lines += _table_lines(table, verdicts=True)
        doc["abl"] = {
            "step": k,
            "context": ctx.label,
            "table": dict(table),
            "verdicts": {n: CounterfactualVerdict.from_probability(v).status.value for n, v in table.items()},
        }
    elif measures and spec.postselects:
        _, tables = exact_conditional(spec)
        doc["conditional"] = {}
        for k, table in tables.items():
            lines.append(f"step {k}: conditional on postselection (outcome enumeration)")
            lines += _table_lines(table)
            doc["conditional"][str(k)] = dict(table)
    return _emit(doc, lines, fmt), EXIT_OK


# -- simulate ---------------------------------------------------------------------

def _predictions(spec: ExperimentSpec) -> tuple[float, dict[int, dict[str, float]]]:
    """Expected postselection probability and conditional tables per perfect-detector step."""
    total, tables = exact_conditional(spec)
    measures = spec.measure_steps
    out = {k: dict(t) for k, t in tables.items()}
    if len(measures) == 1 and _rank1_postselection(spec) and measures[0] in out:
        k = measures[0]
        out[k] = dict(abl_distribution(spec.boundary_conditions(k), spec.steps[k].context))
    perfect = {k for k in measures if spec.steps[k].detector.is_perfect(spec.steps[k].context.labels)}
    return total, {k: v for k, v in out.items() if k in perfect}


def _z(f: float, p: float, n: int) -> float:
    se = math.sqrt(f * (1 - f) / n)
    if se == 0.0:
        if abs(f - p) < 1e-9:
            return 0.0
        se = math.sqrt(p * (1 - p) / n)
    return (f - p) / se if se > 0 else math.copysign(math.inf, f - p)


def cmd_simulate(spec: ExperimentSpec, trials: int, seed: int, efficiency: dict[str, float] | None = None,
                 fmt: str = "human", backend: str | None = None, threads: int | None = None) -> tuple[str, int]:
    if efficiency:
        spec = spec.with_efficiency(efficiency)
    head = f"experiment: {spec.name}  trials: {trials}  seed: {seed}"
    try:
        stats = run_ensemble(spec, trials, seed, backend=backend, threads=threads)
    except NoPostselectedTrials:
        doc = {"experiment": spec.name, "trials": trials, "seed": seed, "postselected": 0, "error": "NoPostselectedTrials"}
        return _emit(doc, [head, "NO POSTSELECTED TRIALS: empty ensemble"], fmt), EXIT_EMPTY

    expected_rate, predicted = _predictions(spec)
    rate_z = _z(stats.postselection_rate, expected_rate, stats.trials)
    worst = abs(rate_z)
    lines = [
        head,
        f"postselected: {stats.postselected} / {stats.trials}  rate {_p(stats.postselection_rate)}"
        f" ± {_p(stats.postselection_se)}  expected {_p(expected_rate)}  z {rate_z:+.2f}",
    ]
    if stats.no_click_trials:
        lines.append(f"trials with a missed registration: {stats.no_click_trials}")
    doc: dict = {
        "experiment": spec.name,
        "trials": stats.trials,
        "seed": seed,
        "postselected": stats.postselected,
        "postselection_rate": stats.postselection_rate,
        "postselection_se": stats.postselection_se,
        "expected_postselection_rate": expected_rate,
        "postselection_z": rate_z,
        "no_click_trials": stats.no_click_trials,
        "steps": [],
    }
    for k, names in stats.labels.items():
        ctx = spec.steps[k].context
        lines.append(f"step {k}: measure {ctx.label}  registered {stats.clicked[k]}")
        zs = None
        if k in predicted and stats.clicked[k]:
            zs = compare_to_abl(stats, predicted[k], k)
        width = max(len(n) for n in names)
        entries = {}
        for n in names:
            f = stats.conditional_frequencies.get((k, n))
            se = stats.standard_errors.get((k, n))
            row = f"  {n:<{width}}  {stats.counts[(k, n)]:>9}"
            entry = {"count": stats.counts[(k, n)], "frequency": f, "standard_error": se}
            if f is not None:
                row += f"  {_p(f)} ± {_p(se)}"
            if zs is not None:
                z = zs[n]
                entry.update(predicted=predicted[k][n], z=z.z, exact=z.exact)
                row += f"  predicted {_p(predicted[k][n])}  " + ("exact" if z.exact else f"z {z.z:+.2f}")
                worst = max(worst, abs(z.z))
            lines.append(row)
            entries[n] = entry
        doc["steps"].append({"step": k, "context": ctx.label, "registered": stats.clicked[k], "outcomes": entries})
    code = EXIT_STATISTICS if worst > Z_LIMIT else EXIT_OK
    doc["consistent"] = code == EXIT_OK
    lines.append("consistent with prediction" if code == EXIT_OK else f"INCONSISTENT: max |z| = {worst:.2f} > {Z_LIMIT}")
    return _emit(doc, lines, fmt), code


# -- scan ---------------------------------------------------------------------------

def select_contexts(spec: ExperimentSpec, selector: str) -> list[MeasurementContext]:
    if selector == "bipartitions":
        return bipartition_contexts(spec.dim, spec.basis_labels)
    if selector == "file":
        seen, out = set(), []
        for ctx in [*(spec.steps[k].context for k in spec.measure_steps), *spec.scan_contexts]:
            if ctx.label not in seen:
                seen.add(ctx.label)
                out.append(ctx)
        if not out:
            raise ValueError("the experiment names no contexts; use --contexts bipartitions")
        return out
    return parse_contexts(selector, spec.dim, spec.basis_labels)


def cmd_scan(spec: ExperimentSpec, selector: str = "file", fmt: str = "human") -> tuple[str, int]:
    contexts = select_contexts(spec, selector)
    ms = spec.measure_steps
    bc = spec.boundary_conditions(ms[0] if len(ms) == 1 else None)
    report = element_of_reality_scan(bc, contexts)
    lines = [f"experiment: {spec.name}  contexts: {len(contexts)} ({selector})"]
    doc: dict = {"experiment": spec.name, "contexts": {}, "contradiction": report.contradiction}
    width = max(len(c.label) for c in contexts)
    for label, res in report.per_context.items():
        if res.empty:
            lines.append(f"  {label:<{width}}  EMPTY ENSEMBLE")
            doc["contexts"][label] = {"empty": True}
            continue
        cells = "  ".join(f"{n} {_p(v)}" for n, v in res.table.items())
        cert = f"  certain: {res.certain_outcome}" if res.certain_outcome else ""
        lines.append(f"  {label:<{width}}  {cells}{cert}")
        doc["contexts"][label] = {"table": dict(res.table), "certain": res.certain_outcome}
    doc["contradicting_pairs"] = [[list(a), list(b)] for a, b in report.contradicting_pairs]
    if report.contradiction:
        for (c1, o1), (c2, o2) in report.contradicting_pairs:
            lines.append(f"CONTRADICTION: {{{c1}}} -> {o1} and {{{c2}}} -> {o2}: "
                         "mutually exclusive outcomes, both certain")
    else:
        lines.append("no contradiction")
    all_empty = all(r.empty for r in report.per_context.values())
    return _emit(doc, lines, fmt), EXIT_EMPTY if all_empty else EXIT_OK


# -- entry point -----------------------------------------------------------------------

def _efficiency_arg(text: str) -> tuple[str, float]:
    label, sep, value = text.rpartition("=")
    if not sep or not label:
        raise argparse.ArgumentTypeError(f"expected LABEL=ETA, got {text!r}")
    try:
        eta = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"efficiency {value!r} is not a number") from None
    if not 0.0 <= eta <= 1.0:
        raise argparse.ArgumentTypeError(f"efficiency {eta} outside [0, 1]")
    return label, eta


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsqm", description="Born/ABL probabilities and pre/postselected ensembles")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_args(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("file", nargs="?", help="experiment JSON file")
        src.add_argument("--builtin", choices=sorted(BUILTINS), help="canned experiment")
        p.add_argument("--format", choices=["human", "machine"], default="human")

    p = sub.add_parser("analyze", help="Born and ABL tables with counterfactual verdicts")
    experiment_args(p)
    p = sub.add_parser("simulate", help="Monte Carlo run of the pre/postselected ensemble")
    experiment_args(p)
    p.add_argument("--trials", type=_positive, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--efficiency", type=_efficiency_arg, action="append", default=[],
                   metavar="LABEL=ETA", help="detector efficiency for an outcome ('*' for all); repeatable")
    p.add_argument("--threads", type=_positive, default=None, help="numba worker threads")
    p.add_argument("--backend", choices=["numba", "numpy"], default=None)
    p = sub.add_parser("scan", help="element-of-reality scan over several contexts")
    experiment_args(p)
    p.add_argument("--contexts", default="file",
                   help="'file' (contexts named in the experiment), 'bipartitions', or a JSON contexts file")
    p = sub.add_parser("builtins", help="list canned experiments")
    p.add_argument("--export", metavar="DIR", help="write each canned experiment as DIR/NAME.json")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    out = sys.stdout
    try:
        if args.command == "builtins":
            for name in BUILTINS:
                print(name, file=out)
                if args.export:
                    Path(args.export).mkdir(parents=True, exist_ok=True)
                    dump_experiment(builtin(name).spec, Path(args.export) / f"{name}.json")
            return EXIT_OK
        spec = builtin(args.builtin).spec if args.builtin else parse_experiment(args.file)
        if args.command == "analyze":
            text, code = cmd_analyze(spec, args.format)
        elif args.command == "simulate":
            text, code = cmd_simulate(spec, args.trials, args.seed, dict(args.efficiency), args.format,
                                      backend=args.backend, threads=args.threads)
        else:
            text, code = cmd_scan(spec, args.contexts, args.format)
    except (ParseError, ValidationError, TooManyContexts, UnknownOutcome, InvariantViolation, ValueError) as e:
        print(f"tsqm: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except EmptyEnsemble as e:
        print(f"tsqm: EMPTY ENSEMBLE: {e}", file=sys.stderr)
        return EXIT_EMPTY
    except TsqmError as e:
        print(f"tsqm: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    out.write(text)
    out.flush()
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
