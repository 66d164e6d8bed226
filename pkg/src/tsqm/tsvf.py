"""Pre- and postselected systems: ABL probabilities and counterfactuals.

A system prepared in ``pre_state`` and later found in ``post_state`` has,
for an intermediate measurement of context ``{P_i}``, outcome probabilities

    p_i = |<post'|P_i|pre'>|^2 / sum_j |<post'|P_j|pre'>|^2

where ``pre' = U_pre_to_mid pre`` and ``<post'| = <post| U_mid_to_post``.
A counterfactual "the measurement would have yielded i" is true exactly
when ``p_i = 1``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import TOL
from .errors import DimensionMismatch, EmptyEnsemble, NotNormalized, TooManyContexts
from .hilbert import StateVector, UnitaryOperator, identity
from .measure import MeasurementContext, ProbabilityTable, born_distribution, subset_context

MAX_BIPARTITION_DIM = 6


@dataclass(frozen=True)
class BoundaryConditions:
    pre_state: StateVector
    post_state: StateVector
    u_pre_to_mid: UnitaryOperator | None = None
    u_mid_to_post: UnitaryOperator | None = None

    def __post_init__(self):
        d = self.pre_state.dim
        if self.post_state.dim != d:
            raise DimensionMismatch(f"pre dim {d} vs post dim {self.post_state.dim}")
        if self.u_pre_to_mid is None:
            object.__setattr__(self, "u_pre_to_mid", identity(d))
        if self.u_mid_to_post is None:
            object.__setattr__(self, "u_mid_to_post", identity(d))
        for name in ("u_pre_to_mid", "u_mid_to_post"):
            if getattr(self, name).dim != d:
                raise DimensionMismatch(f"{name} has dim {getattr(self, name).dim}, expected {d}")

    @property
    def dim(self) -> int:
        return self.pre_state.dim

    def transported(self) -> tuple[np.ndarray, np.ndarray]:
        """Forward-transported ket and backward-transported bra at the intermediate time."""
        ket = self.u_pre_to_mid.matrix @ self.pre_state.amplitudes
        bra = self.post_state.amplitudes.conj() @ self.u_mid_to_post.matrix
        return ket, bra

    def reversed(self) -> "BoundaryConditions":
        """Swap preparation and postselection (time reversal of the transports)."""
        return BoundaryConditions(
            self.post_state,
            self.pre_state,
            self.u_mid_to_post.adjoint(),
            self.u_pre_to_mid.adjoint(),
        )


def abl_weights(bc: BoundaryConditions, ctx: MeasurementContext) -> dict[str, float]:
    """Unnormalized ABL weights ``|<post'|P_i|pre'>|^2`` per outcome."""
    if ctx.dim != bc.dim:
        raise DimensionMismatch(f"context dim {ctx.dim} vs boundary dim {bc.dim}")
    for name, s in (("pre_state", bc.pre_state), ("post_state", bc.post_state)):
        if abs(s.norm() - 1.0) > TOL.normalized_input:
            raise NotNormalized(f"{name} has norm {s.norm():.12g}")
    ket, bra = bc.transported()
    return {n: abs(complex(bra @ (p.matrix @ ket))) ** 2 for n, p in ctx}


def abl_distribution(bc: BoundaryConditions, ctx: MeasurementContext) -> ProbabilityTable:
    weights = abl_weights(bc, ctx)
    total = sum(weights.values())
    if total < TOL.empty_ensemble:
        raise EmptyEnsemble(
            f"context {ctx.label!r}: no trial survives postselection (ABL normalization {total:.3g})"
        )
    return ProbabilityTable((n, w / total) for n, w in weights.items())


class Verdict(enum.Enum):
    TRUE = "TRUE"
    FALSE = "FALSE"
    INDETERMINATE = "INDETERMINATE"


@dataclass(frozen=True)
class CounterfactualVerdict:
    status: Verdict
    abl_probability: float

    @classmethod
    def from_probability(cls, p: float) -> "CounterfactualVerdict":
        if abs(p - 1.0) < TOL.certainty:
            return cls(Verdict.TRUE, p)
        if p < TOL.certainty:
            return cls(Verdict.FALSE, p)
        return cls(Verdict.INDETERMINATE, p)


def evaluate_counterfactual(bc: BoundaryConditions, ctx: MeasurementContext, outcome: str) -> CounterfactualVerdict:
    """Truth value of "measuring ``ctx`` at the intermediate time would have yielded ``outcome``"."""
    ctx.projector(outcome)  # raises UnknownOutcome
    return CounterfactualVerdict.from_probability(abl_distribution(bc, ctx)[outcome])


@dataclass(frozen=True)
class CertaintyCheck:
    holds: bool
    checked: int
    skipped_empty: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.holds


def born_certainty_implies_abl_certainty(
    state: StateVector,
    ctx: MeasurementContext,
    outcome: str,
    post_candidates: Sequence[StateVector],
) -> CertaintyCheck:
    """Check that Born certainty of ``outcome`` survives any postselection.

    Postselections giving an empty ensemble are skipped and their indices
    reported in ``skipped_empty``.
    """
    p = born_distribution(state, ctx)[outcome]
    if abs(p - 1.0) > TOL.certainty:
        raise ValueError(f"outcome {outcome!r} is not Born-certain (p = {p:.12g})")
    holds = True
    skipped = []
    for k, post in enumerate(post_candidates):
        try:
            table = abl_distribution(BoundaryConditions(state, post), ctx)
        except EmptyEnsemble:
            skipped.append(k)
            continue
        if abs(table[outcome] - 1.0) > TOL.certainty:
            holds = False
    return CertaintyCheck(holds, len(post_candidates) - len(skipped), tuple(skipped))


@dataclass(frozen=True)
class ContextResult:
    table: ProbabilityTable | None
    certain_outcome: str | None
    empty: bool = False


@dataclass(frozen=True)
class ElementOfRealityReport:
    per_context: dict[str, ContextResult]
    contradiction: bool
    contradicting_pairs: list[tuple[tuple[str, str], tuple[str, str]]] = field(default_factory=list)

    def certified(self) -> list[tuple[str, str]]:
        return [(c, r.certain_outcome) for c, r in self.per_context.items() if r.certain_outcome is not None]


def element_of_reality_scan(bc: BoundaryConditions, contexts: Sequence[MeasurementContext]) -> ElementOfRealityReport:
    """Collect ABL-certain outcomes across contexts and flag exclusive ones.

    Two certified outcomes from different contexts contradict each other
    when their projectors are orthogonal, i.e. they are mutually exclusive
    alternatives that would both have to be actual.
    """
    if not contexts:
        raise ValueError("need at least one context")
    per_context: dict[str, ContextResult] = {}
    certified: list[tuple[str, str, np.ndarray]] = []
    for ctx in contexts:
        try:
            table = abl_distribution(bc, ctx)
        except EmptyEnsemble:
            per_context[ctx.label] = ContextResult(None, None, empty=True)
            continue
        certain = next((n for n, p in table.items() if abs(p - 1.0) < TOL.certainty), None)
        per_context[ctx.label] = ContextResult(table, certain)
        if certain is not None:
            certified.append((ctx.label, certain, ctx.projector(certain).matrix))
    pairs = []
    for (c1, o1, p1), (c2, o2, p2) in itertools.combinations(certified, 2):
        if c1 == c2:
            continue
        if np.linalg.norm(p1 @ p2, 2) < TOL.orthogonal_product:
            pairs.append(((c1, o1), (c2, o2)))
    return ElementOfRealityReport(per_context, bool(pairs), pairs)


def bipartition_contexts(dim: int, labels: Sequence[str] | None = None) -> list[MeasurementContext]:
    """All two-outcome coarse-grainings ``{S, complement}`` of the computational basis.

    Smaller blocks come first, so three boxes give ``A|B∪C``, ``B|A∪C``,
    ``C|A∪B``. Capped at ``MAX_BIPARTITION_DIM`` (2**(dim-1) - 1 contexts).
    """
    if dim > MAX_BIPARTITION_DIM:
        raise TooManyContexts(f"bipartition scan limited to dim <= {MAX_BIPARTITION_DIM}, got {dim}")
    if dim < 2:
        return []
    labels = list(labels) if labels is not None else [str(i) for i in range(dim)]
    everything = set(range(dim))
    seen: set[frozenset[int]] = set()
    out = []
    for size in range(1, dim // 2 + 1):
        for subset in itertools.combinations(range(dim), size):
            s = frozenset(subset)
            rest = frozenset(everything - s)
            if s in seen or rest in seen:
                continue
            seen.add(s)
            a = "∪".join(labels[i] for i in sorted(s))
            b = "∪".join(labels[i] for i in sorted(rest))
            out.append(subset_context(f"{a}|{b}", dim, [(a, sorted(s)), (b, sorted(rest))]))
    return out
