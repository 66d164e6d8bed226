"""Canned experiments with their closed-form expectations.

Each builder returns a ``CannedExperiment``: a runnable ``ExperimentSpec``
plus exact probabilities written out by hand (fractions and surds). The
engine never supplies these numbers; tests recompute them and compare.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import ZeroVector
from .hilbert import (
    Projector,
    StateVector,
    UnitaryOperator,
    identity,
    ket,
    normalize,
    projector_onto,
)
from .measure import (
    MeasurementContext,
    basis_context,
    computational_context,
    subset_context,
    trivial_context,
)
from .ensemble import ExperimentSpec, Measure

THREE_BOX_LABELS = ("A", "B", "C")


@dataclass(frozen=True)
class CannedExperiment:
    spec: ExperimentSpec
    # closed-form outcome table for the single intermediate step, conditional
    # on postselection (or unconditional when the spec does not postselect)
    oracle: dict[str, float] | None
    postselection_probability: float
    # alternative final-measurement tables, keyed by mode
    born_tables: dict[str, dict[str, float]] = field(default_factory=dict)


def postselection_context(post: StateVector) -> MeasurementContext:
    """``{post, not_post}``: the rank-1 projector on ``post`` and its complement."""
    p = projector_onto(post)
    return MeasurementContext("postselection", [("post", p), ("not_post", Projector(np.eye(post.dim) - p.matrix))])


def _f(x) -> float:
    return float(Fraction(x))


# -- three boxes ----------------------------------------------------------------

def three_box_contexts() -> dict[str, MeasurementContext]:
    return {
        "ii": subset_context("A|B∪C", 3, {"A": [0], "B∪C": [1, 2]}),
        "iii": subset_context("B|A∪C", 3, {"B": [1], "A∪C": [0, 2]}),
        "iv": computational_context(3, THREE_BOX_LABELS, label="A|B|C"),
    }


_THREE_BOX_ORACLE = {
    "i": (None, Fraction(1, 9)),
    "ii": ({"A": 1, "B∪C": 0}, Fraction(1, 9)),
    "iii": ({"B": 1, "A∪C": 0}, Fraction(1, 9)),
    "iv": ({"A": Fraction(1, 3), "B": Fraction(1, 3), "C": Fraction(1, 3)}, Fraction(1, 3)),
}


def three_box(arrangement: str) -> CannedExperiment:
    """Three holes A, B, C with a pi phase shifter behind C.

    Arrangements: ``i`` no beeper, ``ii`` beeper at A, ``iii`` beeper at B,
    ``iv`` beepers at A and B (which resolves all three holes).
    """
    if arrangement not in _THREE_BOX_ORACLE:
        raise ValueError(f"arrangement must be one of i, ii, iii, iv; got {arrangement!r}")
    ctxs = three_box_contexts()
    steps = () if arrangement == "i" else (Measure(ctxs[arrangement]),)
    spec = ExperimentSpec(
        name=f"three-box-{arrangement}",
        pre_state=ket(1, 1, 1),
        steps=steps,
        post_context=postselection_context(ket(1, 1, -1)),
        accept_outcome="post",
        basis_labels=THREE_BOX_LABELS,
        scan_contexts=tuple(ctxs.values()),
    )
    table, rate = _THREE_BOX_ORACLE[arrangement]
    oracle = None if table is None else {k: _f(v) for k, v in table.items()}
    return CannedExperiment(spec, oracle, _f(rate))


# -- spin -------------------------------------------------------------------------

def spin_states() -> dict[str, StateVector]:
    return {
        "up_x": ket(1, 1),
        "down_x": ket(1, -1),
        "up_y": ket(1, 1j),
        "down_y": ket(1, -1j),
    }


def spin_contexts() -> dict[str, MeasurementContext]:
    s = spin_states()
    return {
        "sigma_x": basis_context("sigma_x", [s["up_x"], s["down_x"]], ["up_x", "down_x"]),
        "sigma_y": basis_context("sigma_y", [s["up_y"], s["down_y"]], ["up_y", "down_y"]),
    }


def spin_sequence(intermediate: str, swapped: bool = False) -> CannedExperiment:
    """sigma_x found up at t1, sigma_y found up at t2, one measurement in between.

    ``swapped`` exchanges the roles of the two boundary states.
    """
    ctxs = spin_contexts()
    if intermediate not in ctxs:
        raise ValueError(f"intermediate must be sigma_x or sigma_y; got {intermediate!r}")
    s = spin_states()
    pre, post = (s["up_y"], s["up_x"]) if swapped else (s["up_x"], s["up_y"])
    spec = ExperimentSpec(
        name=f"spin-{intermediate[-1]}" + ("-swapped" if swapped else ""),
        pre_state=pre,
        steps=(Measure(ctxs[intermediate]),),
        post_context=postselection_context(post),
        accept_outcome="post",
        scan_contexts=tuple(ctxs.values()),
    )
    oracle = {"up_x": 1.0, "down_x": 0.0} if intermediate == "sigma_x" else {"up_y": 1.0, "down_y": 0.0}
    # |<up_y|up_x>|^2 = 1/2 whichever basis is measured in between
    return CannedExperiment(spec, oracle, 0.5)


# -- two slits --------------------------------------------------------------------

def two_slit_contexts() -> dict[str, MeasurementContext]:
    return {
        "which_slit": computational_context(2, ["slit1", "slit2"], label="which_slit"),
        "phase": basis_context("phase", [ket(1, 1), ket(1, -1)], ["in_phase", "out_of_phase"]),
    }


def two_slit_choice(mode: str, pre: Sequence[complex] = (1, 1)) -> CannedExperiment:
    """Atom emerging from two slits; the final registration is either the
    slit taken or the phase relation.

    No intermediate step: ``post_context`` is the chosen final measurement
    and ``accept_outcome`` defaults to its first outcome.  ``born_tables``
    holds the final-measurement tables for both choices.
    """
    ctxs = two_slit_contexts()
    if mode not in ctxs:
        raise ValueError(f"mode must be which_slit or phase; got {mode!r}")
    state = ket(*pre)
    spec = ExperimentSpec(
        name="two-slit-" + ("which" if mode == "which_slit" else "phase"),
        pre_state=state,
        steps=(),
        post_context=ctxs[mode],
        accept_outcome=ctxs[mode].labels[0],
        basis_labels=("slit1", "slit2"),
        scan_contexts=tuple(ctxs.values()),
    )
    a, b = (complex(x) for x in pre)
    n2 = abs(a) ** 2 + abs(b) ** 2
    tables = {
        "which_slit": {"slit1": abs(a) ** 2 / n2, "slit2": abs(b) ** 2 / n2},
        "phase": {"in_phase": abs(a + b) ** 2 / (2 * n2), "out_of_phase": abs(a - b) ** 2 / (2 * n2)},
    }
    return CannedExperiment(spec, tables[mode], tables[mode][spec.accept_outcome], tables)


# -- two detectors ------------------------------------------------------------------

def two_detector(weight_r1: float = 0.5) -> CannedExperiment:
    """Wave function supported on two disjoint detector regions R1 and R2."""
    if not 0.0 <= weight_r1 <= 1.0:
        raise ValueError(f"weight_r1 must lie in [0, 1]; got {weight_r1}")
    ctx = computational_context(2, ["R1", "R2"], label="regions")
    spec = ExperimentSpec(
        name="two-detector",
        pre_state=StateVector([math.sqrt(weight_r1), math.sqrt(1 - weight_r1)]),
        steps=(Measure(ctx),),
        post_context=trivial_context(2),
        accept_outcome="all",
        basis_labels=("R1", "R2"),
    )
    return CannedExperiment(spec, {"R1": weight_r1, "R2": 1 - weight_r1}, 1.0)


# -- entangled pair -------------------------------------------------------------------

@dataclass(frozen=True)
class EntangledPair:
    """``sum_i a_i |b_i> ⊗ |a_i>`` with the projector pairs used to probe it.

    ``matched`` holds ``(i, P_b_i, P_a_i, |a_i|^2)`` and ``mismatched``
    holds ``(i, j, P_b_i, P_a_j)`` for ``i != j``; in both the first
    projector acts on the first tensor factor.
    """

    state: StateVector
    matched: list[tuple[int, Projector, Projector, float]]
    mismatched: list[tuple[int, int, Projector, Projector]]


def entangled_pair(amplitudes: Sequence[complex],
                   bases: tuple[UnitaryOperator, UnitaryOperator] | None = None) -> EntangledPair:
    """Build the entangled state; ``bases`` gives the ``|b_i>`` and ``|a_i>``
    as unitary columns (computational bases by default)."""
    amps = np.asarray(amplitudes, dtype=np.complex128)
    n = amps.size
    if n < 2:
        raise ValueError("need at least two amplitudes")
    norm = float(np.linalg.norm(amps))
    if norm < 1e-12:
        raise ZeroVector("all amplitudes vanish")
    ub, ua = bases if bases is not None else (identity(n), identity(n))
    b = [StateVector(ub.matrix[:, i]) for i in range(n)]
    a = [StateVector(ua.matrix[:, i]) for i in range(n)]
    psi = sum(amps[i] * np.kron(b[i].amplitudes, a[i].amplitudes) for i in range(n))
    state = normalize(StateVector(psi))
    pb = [projector_onto(v) for v in b]
    pa = [projector_onto(v) for v in a]
    matched = [(i, pb[i], pa[i], abs(amps[i]) ** 2 / norm**2) for i in range(n)]
    mismatched = [(i, j, pb[i], pa[j]) for i in range(n) for j in range(n) if i != j]
    return EntangledPair(state, matched, mismatched)


def entangled_pair_experiment(amplitudes: Sequence[complex] = (1, 1)) -> CannedExperiment:
    """Joint product-basis measurement of both factors, no postselection."""
    pair = entangled_pair(amplitudes)
    n = len(amplitudes)
    labels = [f"b{i}a{j}" for i in range(n) for j in range(n)]
    ctx = computational_context(n * n, labels, label="joint")
    spec = ExperimentSpec(
        name="entangled-pair",
        pre_state=pair.state,
        steps=(Measure(ctx),),
        post_context=trivial_context(n * n),
        accept_outcome="all",
    )
    amps = np.asarray(amplitudes, dtype=np.complex128)
    w = np.abs(amps) ** 2 / float(np.sum(np.abs(amps) ** 2))
    oracle = {f"b{i}a{j}": (float(w[i]) if i == j else 0.0) for i in range(n) for j in range(n)}
    return CannedExperiment(spec, oracle, 1.0)


BUILTINS: dict[str, Callable[[], CannedExperiment]] = {
    "three-box-i": lambda: three_box("i"),
    "three-box-ii": lambda: three_box("ii"),
    "three-box-iii": lambda: three_box("iii"),
    "three-box-iv": lambda: three_box("iv"),
    "spin-x": lambda: spin_sequence("sigma_x"),
    "spin-y": lambda: spin_sequence("sigma_y"),
    "two-slit-phase": lambda: two_slit_choice("phase"),
    "two-slit-which": lambda: two_slit_choice("which_slit"),
    "two-detector": lambda: two_detector(0.5),
    "entangled-pair": lambda: entangled_pair_experiment((1, 1)),
}


def builtin(name: str) -> CannedExperiment:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ValueError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}") from None
