"""Forward-in-time measurement: contexts, Born rule, trace rule, Lüders update.

Everything here is deterministic; outcome sampling lives in ``ensemble``.
"""

from __future__ import annotations

from collections.abc import Mapping
from typing import Iterable, Iterator, Sequence

import numpy as np

from .config import TOL
from .errors import (
    DimensionMismatch,
    InvariantViolation,
    NotNormalized,
    UnknownOutcome,
    ZeroProbabilityOutcome,
)
from .hilbert import (
    DensityOperator,
    Projector,
    StateVector,
    UnitaryOperator,
    apply,
    normalize,
    projector_onto,
    subspace_projector,
    tensor_operator,
)


class MeasurementContext:
    """A labeled complete family of mutually orthogonal projectors.

    Each outcome is one experimentally distinguishable alternative; a
    coarse-grained measurement such as ``{A, B∪C}`` is simply a context
    with a rank-2 outcome.
    """

    __slots__ = ("label", "outcomes")

    def __init__(self, label: str, outcomes: Iterable[tuple[str, Projector]]):
        self.label = str(label)
        self.outcomes: tuple[tuple[str, Projector], ...] = tuple(
            (str(name), p) for name, p in outcomes
        )
        self._validate()

    def _validate(self) -> None:
        if not self.outcomes:
            raise InvariantViolation("non-empty", f"context {self.label!r} has no outcomes")
        names = [n for n, _ in self.outcomes]
        dup = sorted({n for n in names if names.count(n) > 1})
        if dup:
            raise InvariantViolation("unique-labels", f"repeated outcome labels {dup}")
        for n, p in self.outcomes:
            if not isinstance(p, Projector):
                raise InvariantViolation("projector", f"outcome {n!r} is not a Projector")
        dim = self.outcomes[0][1].dim
        for n, p in self.outcomes:
            if p.dim != dim:
                raise DimensionMismatch(f"outcome {n!r} has dim {p.dim}, expected {dim}")
        tol = TOL.operator
        for i, (ni, pi) in enumerate(self.outcomes):
            for nj, pj in self.outcomes[i + 1:]:
                overlap = float(np.max(np.abs(pi.matrix @ pj.matrix)))
                if overlap > tol:
                    raise InvariantViolation(
                        "mutual-orthogonality",
                        f"outcomes {ni!r} and {nj!r} overlap (max |P_i P_j| = {overlap:.3g})",
                    )
        total = sum(p.matrix for _, p in self.outcomes)
        dev = float(np.max(np.abs(total - np.eye(dim))))
        if dev > tol:
            raise InvariantViolation("completeness", f"max |sum P_i - I| = {dev:.3g}")

    @property
    def dim(self) -> int:
        return self.outcomes[0][1].dim

    @property
    def labels(self) -> list[str]:
        return [n for n, _ in self.outcomes]

    def projector(self, outcome: str) -> Projector:
        for n, p in self.outcomes:
            if n == outcome:
                return p
        raise UnknownOutcome(f"context {self.label!r} has no outcome {outcome!r}")

    def __iter__(self) -> Iterator[tuple[str, Projector]]:
        return iter(self.outcomes)

    def __len__(self) -> int:
        return len(self.outcomes)

    def __contains__(self, outcome: object) -> bool:
        return outcome in self.labels

    def __repr__(self) -> str:
        return f"MeasurementContext({self.label!r}, {self.labels})"

    def allclose(self, other: "MeasurementContext", atol: float = 1e-12) -> bool:
        return (
            self.label == other.label
            and self.labels == other.labels
            and all(p.allclose(q, atol) for (_, p), (_, q) in zip(self.outcomes, other.outcomes))
        )


def basis_context(label: str, vectors: Sequence[StateVector], labels: Sequence[str]) -> MeasurementContext:
    """Nondegenerate context from an orthonormal basis."""
    if len(vectors) != len(labels):
        raise ValueError("one label per basis vector")
    return MeasurementContext(label, [(n, projector_onto(v)) for n, v in zip(labels, vectors)])


def subset_context(label: str, dim: int, groups: Mapping[str, Sequence[int]] | Sequence[tuple[str, Sequence[int]]]) -> MeasurementContext:
    """Coarse-grained context from computational-basis index subsets.

    >>> subset_context("A|B∪C", 3, {"A": [0], "B∪C": [1, 2]}).labels
    ['A', 'B∪C']
    """
    items = groups.items() if isinstance(groups, Mapping) else groups
    return MeasurementContext(label, [(n, subspace_projector(dim, idx)) for n, idx in items])


def computational_context(dim: int, labels: Sequence[str] | None = None, label: str = "basis") -> MeasurementContext:
    labels = list(labels) if labels is not None else [str(i) for i in range(dim)]
    return subset_context(label, dim, [(n, [i]) for i, n in enumerate(labels)])


def trivial_context(dim: int, outcome: str = "all") -> MeasurementContext:
    """Single-outcome context: the identity, i.e. no filtering at all."""
    return subset_context("trivial", dim, [(outcome, range(dim))])


class ProbabilityTable(Mapping):
    """Immutable ordered map ``outcome label -> probability``."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Iterable[tuple[str, float]] | Mapping[str, float]):
        items = entries.items() if isinstance(entries, Mapping) else entries
        data: dict[str, float] = {}
        tol = TOL.probability
        for k, v in items:
            v = float(v)
            if not (-tol <= v <= 1 + tol):
                raise InvariantViolation("probability-range", f"{k!r}: {v}")
            data[str(k)] = v
        self._entries = data

    def __getitem__(self, key: str) -> float:
        return self._entries[key]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def total(self) -> float:
        return sum(self._entries.values())

    def __repr__(self) -> str:
        body = ", ".join(f"{k!r}: {v:.6g}" for k, v in self._entries.items())
        return f"ProbabilityTable({{{body}}})"


# -- probabilities ------------------------------------------------------------

def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def _real_probability(value: complex, what: str) -> float:
    if abs(value.imag) > TOL.probability:
        raise InvariantViolation("real-probability", f"{what} has imaginary part {value.imag:.3g}")
    return _clamp(value.real)


def _require_normalized(state: StateVector) -> None:
    n = state.norm()
    if abs(n - 1.0) > TOL.normalized_input:
        raise NotNormalized(f"state has norm {n:.12g}")


def born(state: StateVector, p: Projector) -> float:
    """Probability ``<psi|P|psi>`` that a measurement finds the alternative ``P``."""
    if state.dim != p.dim:
        raise DimensionMismatch(f"state dim {state.dim} vs projector dim {p.dim}")
    _require_normalized(state)
    psi = state.amplitudes
    return _real_probability(complex(np.vdot(psi, p.matrix @ psi)), "<psi|P|psi>")


def born_distribution(state: StateVector, ctx: MeasurementContext) -> ProbabilityTable:
    return ProbabilityTable((n, born(state, p)) for n, p in ctx)


def born_at(state_at_t0: StateVector, evolution: UnitaryOperator, ctx: MeasurementContext) -> ProbabilityTable:
    """Born table at a later time, after transporting the prepared state by ``evolution``."""
    return born_distribution(normalize(apply(evolution, state_at_t0)), ctx)


def trace_probability(w: DensityOperator, p: Projector) -> float:
    """Trace-rule probability ``Tr(W P)``."""
    if w.dim != p.dim:
        raise DimensionMismatch(f"density dim {w.dim} vs projector dim {p.dim}")
    # Tr(WP) = sum_ij W_ij P_ji without forming the product
    value = complex(np.sum(w.matrix * p.matrix.T))
    return _real_probability(value, "Tr(WP)")


def trace_distribution(w: DensityOperator, ctx: MeasurementContext) -> ProbabilityTable:
    return ProbabilityTable((n, trace_probability(w, p)) for n, p in ctx)


def lueders_update(state: StateVector, p: Projector) -> StateVector:
    """Condition ``state`` on the outcome ``p``: project, then renormalize."""
    prob = born(state, p)
    if prob <= TOL.empty_ensemble:
        raise ZeroProbabilityOutcome(f"outcome has Born probability {prob:.3g}")
    return normalize(apply(p, state))


def lueders_mixture(w: DensityOperator, ctx: MeasurementContext) -> DensityOperator:
    """Non-selective update ``sum_i P_i W P_i`` (outcome recorded but not conditioned on)."""
    m = sum(p.matrix @ w.matrix @ p.matrix for _, p in ctx)
    return DensityOperator((m + m.conj().T) / 2)


def joint_born(state: StateVector, p_first: Projector, p_second: Projector) -> float:
    """Joint probability of ``p_first`` on the first factor and ``p_second`` on the second."""
    if state.dim != p_first.dim * p_second.dim:
        raise DimensionMismatch(
            f"state dim {state.dim} is not {p_first.dim} x {p_second.dim}"
        )
    return born(state, tensor_operator(p_first, p_second))
