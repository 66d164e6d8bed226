"""Seeded Monte Carlo simulation of pre- and postselected ensembles.

Each trial samples every intermediate measurement from its Born weights,
collapses the state by the Lüders rule, and finally samples the
postselection context; only trials landing on ``accept_outcome`` enter the
conditional statistics.  Detector inefficiency hides an outcome from the
record without undoing the collapse.

Trial ``k`` of a run with seed ``s`` draws from the Philox stream addressed
by ``(s, k)``, so results do not depend on how trials are scheduled.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence, Union

import numpy as np

from . import _kernels
from .config import TOL, default_backend
from .errors import (
    DimensionMismatch,
    InvariantViolation,
    NoPostselectedTrials,
    NotNormalized,
    StepNotMeasure,
    UnknownOutcome,
)
from .hilbert import StateVector, UnitaryOperator, identity
from .measure import MeasurementContext, ProbabilityTable
from .rng import TrialStream, split_seed
from .tsvf import BoundaryConditions

NO_CLICK = "NoClick"


@dataclass(frozen=True)
class DetectorModel:
    """Per-outcome registration probability; outcomes not listed use ``default``."""

    efficiency: Mapping[str, float] = field(default_factory=dict)
    default: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "efficiency", dict(self.efficiency))
        for label, eta in [*self.efficiency.items(), ("<default>", self.default)]:
            if not 0.0 <= float(eta) <= 1.0:
                raise InvariantViolation("efficiency-range", f"{label}: {eta}")

    @classmethod
    def uniform(cls, eta: float) -> "DetectorModel":
        return cls({}, eta)

    def for_outcome(self, label: str) -> float:
        return float(self.efficiency.get(label, self.default))

    def is_perfect(self, labels: Sequence[str]) -> bool:
        return all(self.for_outcome(n) == 1.0 for n in labels)


@dataclass(frozen=True)
class Evolve:
    unitary: UnitaryOperator


@dataclass(frozen=True)
class Measure:
    context: MeasurementContext
    detector: DetectorModel = field(default_factory=DetectorModel)


Step = Union[Evolve, Measure]


@dataclass(frozen=True)
class ExperimentSpec:
    """One pre/postselected experiment, as run by the simulator.

    ``post_context`` is sampled last with a perfect detector; a trial is
    postselected when it yields ``accept_outcome``.  A single-outcome
    identity context means no postselection at all.
    """

    name: str
    pre_state: StateVector
    steps: tuple[Step, ...]
    post_context: MeasurementContext
    accept_outcome: str
    basis_labels: tuple[str, ...] | None = None
    scan_contexts: tuple[MeasurementContext, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "scan_contexts", tuple(self.scan_contexts))
        if self.basis_labels is not None:
            object.__setattr__(self, "basis_labels", tuple(self.basis_labels))
            if len(self.basis_labels) != self.dim:
                raise InvariantViolation("basis-labels", f"{len(self.basis_labels)} labels for dim {self.dim}")
        if abs(self.pre_state.norm() - 1.0) > TOL.normalized_input:
            raise NotNormalized(f"pre_state has norm {self.pre_state.norm():.12g}")
        d = self.dim
        for k, step in enumerate(self.steps):
            op_dim = step.unitary.dim if isinstance(step, Evolve) else step.context.dim
            if op_dim != d:
                raise DimensionMismatch(f"step {k} has dim {op_dim}, expected {d}")
        for ctx in (self.post_context, *self.scan_contexts):
            if ctx.dim != d:
                raise DimensionMismatch(f"context {ctx.label!r} has dim {ctx.dim}, expected {d}")
        if self.accept_outcome not in self.post_context:
            raise UnknownOutcome(f"accept outcome {self.accept_outcome!r} not in post context")

    @property
    def dim(self) -> int:
        return self.pre_state.dim

    @property
    def measure_steps(self) -> list[int]:
        return [k for k, s in enumerate(self.steps) if isinstance(s, Measure)]

    @property
    def postselects(self) -> bool:
        return len(self.post_context) > 1

    def accept_projector(self):
        return self.post_context.projector(self.accept_outcome)

    def post_state(self) -> StateVector:
        """The postselected ket, defined when the accepted projector has rank 1."""
        p = self.accept_projector()
        if p.rank() != 1:
            raise InvariantViolation("rank-1-postselection", f"accepted projector has rank {p.rank()}")
        return ray_of(p)

    def boundary_conditions(self, step: int | None = None) -> BoundaryConditions:
        """Boundary conditions around measure step ``step``.

        Evolution before the step is folded into the forward transport and
        evolution after it into the backward one.  With no measure step, all
        evolution counts as forward transport.
        """
        if step is None:
            ms = self.measure_steps
            if len(ms) > 1:
                raise ValueError("spec has several measure steps; pass one explicitly")
            step = ms[0] if ms else len(self.steps)
        elif not isinstance(self.steps[step], Measure):
            raise StepNotMeasure(f"step {step} is not a measurement")
        before = identity(self.dim)
        after = identity(self.dim)
        for k, s in enumerate(self.steps):
            if isinstance(s, Evolve):
                if k < step:
                    before = s.unitary @ before
                else:
                    after = s.unitary @ after
        return BoundaryConditions(self.pre_state, self.post_state(), before, after)

    def with_efficiency(self, overrides: Mapping[str, float]) -> "ExperimentSpec":
        """Copy with detector efficiencies overridden by outcome label (``"*"`` = all)."""
        steps = []
        for s in self.steps:
            if isinstance(s, Measure):
                eff = dict(s.detector.efficiency)
                default = overrides.get("*", s.detector.default)
                for label in s.context.labels:
                    if label in overrides:
                        eff[label] = overrides[label]
                    elif "*" in overrides:
                        eff[label] = overrides["*"]
                s = Measure(s.context, DetectorModel(eff, default))
            steps.append(s)
        unknown = set(overrides) - {"*"} - {n for s in steps if isinstance(s, Measure) for n in s.context.labels}
        if unknown:
            raise UnknownOutcome(f"no measured outcome named {sorted(unknown)}")
        return ExperimentSpec(self.name, self.pre_state, tuple(steps), self.post_context,
                              self.accept_outcome, self.basis_labels, self.scan_contexts)


def ray_of(p) -> StateVector:
    """Unit ket spanning a rank-1 projector, phased so its largest entry is real positive."""
    m = p.matrix
    k = int(np.argmax(np.diag(m).real))
    return StateVector(m[:, k] / math.sqrt(m[k, k].real))


def pack(spec: ExperimentSpec) -> _kernels.PackedSpec:
    mats, eff, kinds, starts, counts, columns = [], [], [], [], [], []
    col = 0
    for step in spec.steps:
        starts.append(len(mats))
        if isinstance(step, Evolve):
            kinds.append(_kernels.EVOLVE)
            mats.append(step.unitary.matrix)
            eff.append(1.0)
            counts.append(1)
            columns.append(-1)
        else:
            kinds.append(_kernels.MEASURE)
            for label, p in step.context:
                mats.append(p.matrix)
                eff.append(step.detector.for_outcome(label))
            counts.append(len(step.context))
            columns.append(col)
            col += 1
    starts.append(len(mats))
    kinds.append(_kernels.POST)
    for _, p in spec.post_context:
        mats.append(p.matrix)
        eff.append(1.0)
    counts.append(len(spec.post_context))
    columns.append(-1)
    m = np.array(mats)
    i64 = lambda a: np.array(a, dtype=np.int64)  # noqa: E731
    return _kernels.PackedSpec(
        kinds=i64(kinds), starts=i64(starts), counts=i64(counts), columns=i64(columns),
        mats_re=np.ascontiguousarray(m.real), mats_im=np.ascontiguousarray(m.imag),
        efficiency=np.array(eff, dtype=np.float64),
        pre_re=np.ascontiguousarray(spec.pre_state.amplitudes.real),
        pre_im=np.ascontiguousarray(spec.pre_state.amplitudes.imag),
        n_measure=col,
    )


@contextlib.contextmanager
def _numba_threads(threads: int | None):
    if threads is None:
        yield
        return
    import numba

    old = numba.get_num_threads()
    numba.set_num_threads(threads)
    try:
        yield
    finally:
        numba.set_num_threads(old)


@dataclass(frozen=True)
class RawTrials:
    """Per-trial outcome indices straight from the kernel."""

    outcomes: np.ndarray  # (n, n_measure) int32 index into the step's context
    clicks: np.ndarray    # (n, n_measure) uint8
    post: np.ndarray      # (n,) int32 index into post_context


def simulate_raw(spec: ExperimentSpec, n_trials: int, seed: int, *, trial_start: int = 0,
                 backend: str | None = None, threads: int | None = None) -> RawTrials:
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    backend = backend or default_backend()
    try:
        runner = _kernels.BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown backend {backend!r}") from None
    lo, hi = split_seed(seed)
    packed = pack(spec)
    if backend == "numba":
        with _numba_threads(threads):
            out = runner(packed, trial_start, n_trials, lo, hi)
    else:
        out = runner(packed, trial_start, n_trials, lo, hi)
    return RawTrials(*out)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    intermediate_outcomes: tuple[tuple[int, str], ...]
    occurred: tuple[tuple[int, str], ...]
    post_outcome: str
    postselected: bool


def run_trial(spec: ExperimentSpec, rng_stream: TrialStream, backend: str = "numpy") -> TrialRecord:
    """Run one trial on the stream of ``rng_stream.trial``.

    ``intermediate_outcomes`` is what the detectors registered (``NO_CLICK``
    for a miss); ``occurred`` is the alternative that actually obtained.
    """
    raw = simulate_raw(spec, 1, rng_stream.seed, trial_start=rng_stream.trial, backend=backend)
    registered, occurred = [], []
    for col, k in enumerate(spec.measure_steps):
        label = spec.steps[k].context.labels[raw.outcomes[0, col]]
        occurred.append((k, label))
        registered.append((k, label if raw.clicks[0, col] else NO_CLICK))
    post = spec.post_context.labels[raw.post[0]]
    return TrialRecord(rng_stream.trial, tuple(registered), tuple(occurred), post,
                       post == spec.accept_outcome)


@dataclass(frozen=True)
class EnsembleStats:
    trials: int
    postselected: int
    no_click_trials: int
    conditional_frequencies: dict[tuple[int, str], float]
    standard_errors: dict[tuple[int, str], float]
    counts: dict[tuple[int, str], int]
    clicked: dict[int, int]
    labels: dict[int, list[str]]

    @property
    def postselection_rate(self) -> float:
        return self.postselected / self.trials

    @property
    def postselection_se(self) -> float:
        f = self.postselection_rate
        return math.sqrt(f * (1 - f) / self.trials)

    def frequencies(self, step: int) -> dict[str, float]:
        return {n: self.conditional_frequencies[(step, n)] for n in self.labels[step]
                if (step, n) in self.conditional_frequencies}


def aggregate(spec: ExperimentSpec, raw: RawTrials) -> EnsembleStats:
    """Reduce raw trials to integer counts, then frequencies.

    Frequencies at a step are taken over postselected trials whose detector
    registered a click there; with perfect detectors that is every
    postselected trial.
    """
    n = raw.post.shape[0]
    accept = spec.post_context.labels.index(spec.accept_outcome)
    kept = raw.post == accept
    n_post = int(kept.sum())
    no_click = int((raw.clicks == 0).any(axis=1).sum()) if raw.clicks.shape[1] else 0
    freqs, errs, counts, clicked, labels = {}, {}, {}, {}, {}
    for col, k in enumerate(spec.measure_steps):
        names = spec.steps[k].context.labels
        labels[k] = names
        mask = kept & (raw.clicks[:, col] == 1)
        bins = np.bincount(raw.outcomes[mask, col], minlength=len(names))
        denom = int(mask.sum())
        clicked[k] = denom
        for i, name in enumerate(names):
            counts[(k, name)] = int(bins[i])
            if denom:
                f = bins[i] / denom
                freqs[(k, name)] = float(f)
                errs[(k, name)] = math.sqrt(f * (1 - f) / denom)
    return EnsembleStats(n, n_post, no_click, freqs, errs, counts, clicked, labels)


def run_ensemble(spec: ExperimentSpec, n_trials: int, seed: int, *, backend: str | None = None,
                 threads: int | None = None) -> EnsembleStats:
    stats = aggregate(spec, simulate_raw(spec, n_trials, seed, backend=backend, threads=threads))
    if stats.postselected == 0:
        raise NoPostselectedTrials(f"none of {n_trials} trials passed postselection", stats)
    return stats


class ZScore(NamedTuple):
    z: float
    exact: bool


def compare_to_abl(stats: EnsembleStats, predicted: Mapping[str, float], step: int) -> dict[str, ZScore]:
    """Per-outcome z-scores of observed conditional frequencies against ``predicted``.

    Where the binomial error vanishes (observed frequency 0 or 1) and the
    prediction agrees exactly, the entry is an exact match with ``z = 0``;
    otherwise the error falls back to the predicted binomial spread.
    """
    if step not in stats.labels:
        raise StepNotMeasure(f"step {step} is not a measurement")
    if stats.postselected == 0 or stats.clicked[step] == 0:
        raise NoPostselectedTrials(f"no postselected clicks at step {step}")
    n = stats.clicked[step]
    out = {}
    for label in stats.labels[step]:
        if label not in predicted:
            raise UnknownOutcome(f"no prediction for outcome {label!r}")
        f = stats.conditional_frequencies[(step, label)]
        p = float(predicted[label])
        se = stats.standard_errors[(step, label)]
        if se == 0.0:
            if abs(f - p) < TOL.probability:
                out[label] = ZScore(0.0, True)
                continue
            se = math.sqrt(p * (1 - p) / n)
        out[label] = ZScore((f - p) / se if se > 0 else math.copysign(math.inf, f - p), False)
    return out


@dataclass(frozen=True)
class DetectorReport:
    click_rate: float
    conditional_given_click: ProbabilityTable
    no_clicks: bool
    clicks: int
    trials: int


def detector_efficiency_report(spec: ExperimentSpec, n_trials: int, seed: int, **kw) -> DetectorReport:
    """Registration rate and outcome distribution among registered clicks.

    Rates are taken over postselected trials (all trials when the spec does
    not postselect).
    """
    ms = spec.measure_steps
    if len(ms) != 1:
        raise StepNotMeasure(f"need exactly one measure step, spec has {len(ms)}")
    stats = run_ensemble(spec, n_trials, seed, **kw)
    k = ms[0]
    clicks = stats.clicked[k]
    if clicks == 0:
        return DetectorReport(0.0, ProbabilityTable({}), True, 0, stats.postselected)
    table = ProbabilityTable(stats.frequencies(k))
    return DetectorReport(clicks / stats.postselected, table, False, clicks, stats.postselected)


# -- exact references ---------------------------------------------------------

def exact_conditional(spec: ExperimentSpec) -> tuple[float, dict[int, ProbabilityTable]]:
    """Brute-force enumeration of every outcome history.

    Returns the postselection probability and, for every measure step, the
    distribution of occurred outcomes conditional on postselection.  This
    walks the Born/Lüders tree branch by branch and shares no code with the
    ABL formula, so it serves as an independent reference for it.
    """
    branches: list[tuple[float, np.ndarray, tuple[int, ...]]] = [(1.0, spec.pre_state.amplitudes, ())]
    for step in spec.steps:
        if isinstance(step, Evolve):
            branches = [(w, step.unitary.matrix @ psi, h) for w, psi, h in branches]
            continue
        grown = []
        for w, psi, h in branches:
            for i, (_, p) in enumerate(step.context):
                phi = p.matrix @ psi
                q = float(np.vdot(phi, phi).real)
                if q > 0.0:
                    grown.append((w * q, phi / math.sqrt(q), h + (i,)))
        branches = grown
    acc = spec.accept_projector().matrix
    weights = []
    for w, psi, h in branches:
        phi = acc @ psi
        weights.append((w * float(np.vdot(phi, phi).real), h))
    total = sum(w for w, _ in weights)
    tables = {}
    for col, k in enumerate(spec.measure_steps):
        names = spec.steps[k].context.labels
        marg = np.zeros(len(names))
        for w, h in weights:
            marg[h[col]] += w
        if total > TOL.empty_ensemble:
            tables[k] = ProbabilityTable(zip(names, marg / total))
    return total, tables
