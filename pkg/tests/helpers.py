"""Random fixtures and comparison helpers shared across test modules."""

from __future__ import annotations

import numpy as np

from tsqm.ensemble import Evolve, ExperimentSpec, Measure
from tsqm.hilbert import Projector, StateVector, random_state, random_unitary
from tsqm.measure import MeasurementContext


def random_context(rng: np.random.Generator, dim: int, label: str = "ctx", coarse: bool = True) -> MeasurementContext:
    """Random orthonormal basis, optionally coarse-grained into random blocks."""
    u = random_unitary(rng, dim).matrix
    if coarse:
        n_blocks = int(rng.integers(1, dim + 1))
        assign = rng.permutation(np.concatenate([np.arange(n_blocks), rng.integers(0, n_blocks, dim - n_blocks)]))
    else:
        assign = np.arange(dim)
    outcomes = []
    for b in range(int(assign.max()) + 1):
        cols = u[:, assign == b]
        outcomes.append((f"o{b}", Projector(cols @ cols.conj().T)))
    return MeasurementContext(label, outcomes)


def random_projector(rng: np.random.Generator, dim: int) -> Projector:
    u = random_unitary(rng, dim).matrix
    k = int(rng.integers(0, dim + 1))
    cols = u[:, :k]
    return Projector(cols @ cols.conj().T)


def random_operator(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))


def random_complex(rng: np.random.Generator) -> complex:
    while True:
        z = complex(rng.normal(), rng.normal())
        if abs(z) > 1e-3:
            return z


def state_in(rng: np.random.Generator, p: Projector) -> StateVector:
    """Random unit ket inside the range of ``p``."""
    while True:
        v = p.matrix @ random_state(rng, p.dim).amplitudes
        n = np.linalg.norm(v)
        if n > 1e-6:
            return StateVector(v / n)


def specs_allclose(a: ExperimentSpec, b: ExperimentSpec, atol: float = 1e-12) -> bool:
    if a.name != b.name or a.dim != b.dim or a.accept_outcome != b.accept_outcome:
        return False
    if a.basis_labels != b.basis_labels or len(a.steps) != len(b.steps):
        return False
    if not a.pre_state.allclose(b.pre_state, atol):
        return False
    if not a.post_context.allclose(b.post_context, atol):
        return False
    for s, t in zip(a.steps, b.steps):
        if type(s) is not type(t):
            return False
        if isinstance(s, Evolve):
            if not s.unitary.allclose(t.unitary, atol):
                return False
        elif isinstance(s, Measure):
            if not s.context.allclose(t.context, atol):
                return False
            if [s.detector.for_outcome(n) for n in s.context.labels] != [t.detector.for_outcome(n) for n in t.context.labels]:
                return False
    if len(a.scan_contexts) != len(b.scan_contexts):
        return False
    return all(c.allclose(d, atol) for c, d in zip(a.scan_contexts, b.scan_contexts))
