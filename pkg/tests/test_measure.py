import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_context, random_projector
from tsqm.errors import DimensionMismatch, InvariantViolation, NotNormalized, UnknownOutcome, ZeroProbabilityOutcome
from tsqm.hilbert import (
    DensityOperator,
    Projector,
    StateVector,
    UnitaryOperator,
    basis,
    identity,
    ket,
    maximally_mixed,
    projector_onto,
    pure_density,
    random_state,
    random_unitary,
    subspace_projector,
    tensor,
)
from tsqm.measure import (
    MeasurementContext,
    ProbabilityTable,
    born,
    born_at,
    born_distribution,
    computational_context,
    joint_born,
    lueders_mixture,
    lueders_update,
    subset_context,
    trace_distribution,
    trace_probability,
    trivial_context,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 5)
PSI1 = ket(1, 1, 1)
P_A = subspace_projector(3, [0])
P_BC = subspace_projector(3, [1, 2])
A_BC = subset_context("A|B∪C", 3, {"A": [0], "B∪C": [1, 2]})


def test_born_examples():
    assert born(StateVector([1, 0]), projector_onto(basis(2, 0))) == 1.0
    assert born(PSI1, P_A) == pytest.approx(1 / 3, abs=1e-15)
    assert born(ket(1, 1), projector_onto(basis(2, 0))) == pytest.approx(0.5, abs=1e-15)


def test_born_rejects_unnormalized_and_mismatched():
    with pytest.raises(NotNormalized):
        born(StateVector([1, 1]), projector_onto(basis(2, 0)))
    with pytest.raises(DimensionMismatch):
        born(ket(1, 1), P_A)


def test_born_distribution_examples():
    t = born_distribution(PSI1, A_BC)
    assert list(t) == ["A", "B∪C"]
    assert t["A"] == pytest.approx(1 / 3, abs=1e-15)
    assert t["B∪C"] == pytest.approx(2 / 3, abs=1e-15)
    assert dict(born_distribution(PSI1, trivial_context(3))) == {"all": pytest.approx(1.0)}
    t = born_distribution(StateVector([1, 0]), computational_context(2))
    assert dict(t) == {"0": 1.0, "1": 0.0}


def test_born_at_examples(rng):
    ctx = computational_context(2)
    v = random_state(rng, 2)
    assert dict(born_at(v, identity(2), ctx)) == dict(born_distribution(v, ctx))
    x = UnitaryOperator([[0, 1], [1, 0]])
    assert dict(born_at(StateVector([1, 0]), x, ctx)) == {"0": 0.0, "1": 1.0}


@settings(max_examples=200, deadline=None)
@given(seeds, dims)
def test_born_at_sums_to_one(seed, dim):
    rng = np.random.default_rng(seed)
    t = born_at(random_state(rng, dim), random_unitary(rng, dim), random_context(rng, dim))
    assert abs(t.total() - 1) < 1e-9


def test_trace_probability_examples(rng):
    p0, p1 = projector_onto(basis(2, 0)), projector_onto(basis(2, 1))
    assert trace_probability(maximally_mixed(2), p0) == pytest.approx(0.5, abs=1e-15)
    assert trace_probability(pure_density(basis(2, 0)), p1) == 0.0
    with pytest.raises(DimensionMismatch):
        trace_probability(maximally_mixed(3), p0)


@settings(max_examples=200, deadline=None)
@given(seeds, dims)
def test_trace_rule_on_pure_state_is_born(seed, dim):
    rng = np.random.default_rng(seed)
    v = random_state(rng, dim)
    p = random_projector(rng, dim)
    assert abs(trace_probability(pure_density(v), p) - born(v, p)) < 1e-12


def test_lueders_examples(rng):
    out = lueders_update(PSI1, P_BC)
    assert out.allclose(ket(0, 1, 1))
    v = random_state(rng, 3)
    assert lueders_update(v, Projector(np.eye(3))).allclose(v)
    with pytest.raises(ZeroProbabilityOutcome):
        lueders_update(StateVector([1, 0]), projector_onto(basis(2, 1)))


@settings(max_examples=200, deadline=None)
@given(seeds, dims)
def test_lueders_repeatable_and_idempotent(seed, dim):
    rng = np.random.default_rng(seed)
    v = random_state(rng, dim)
    ctx = random_context(rng, dim)
    table = born_distribution(v, ctx)
    for label, p in ctx:
        if table[label] <= 1e-6:
            continue
        once = lueders_update(v, p)
        assert abs(born(once, p) - 1) < 1e-9
        assert once.allclose(lueders_update(once, p), 1e-10)


@settings(max_examples=200, deadline=None)
@given(seeds, dims)
def test_born_distribution_normalized_and_additive(seed, dim):
    rng = np.random.default_rng(seed)
    v = random_state(rng, dim)
    ctx = random_context(rng, dim, coarse=False)
    table = born_distribution(v, ctx)
    assert abs(table.total() - 1) < 1e-9
    (l1, p1), (l2, p2) = ctx.outcomes[0], ctx.outcomes[1]
    merged = Projector(p1.matrix + p2.matrix)
    assert abs(born(v, merged) - (table[l1] + table[l2])) < 1e-9


def test_joint_born_entangled_examples():
    a = np.array([0.6, 0.8j])
    psi = StateVector(sum(a[i] * np.kron(basis(2, i).amplitudes, basis(2, i).amplitudes) for i in range(2)))
    pb = [projector_onto(basis(2, i)) for i in range(2)]
    for i in range(2):
        assert joint_born(psi, pb[i], pb[i]) == pytest.approx(abs(a[i]) ** 2, abs=1e-12)
        assert joint_born(psi, pb[i], pb[1 - i]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DimensionMismatch):
        joint_born(psi, pb[0], subspace_projector(3, [0]))


def test_joint_born_factorizes_on_product_states(rng):
    u, v = random_state(rng, 2), random_state(rng, 3)
    p, q = random_projector(rng, 2), random_projector(rng, 3)
    assert joint_born(tensor(u, v), p, q) == pytest.approx(born(u, p) * born(v, q), abs=1e-12)


# -- contexts ------------------------------------------------------------------------

def test_context_rejects_overlap():
    with pytest.raises(InvariantViolation) as e:
        MeasurementContext("bad", [("x", projector_onto(basis(2, 0))), ("y", projector_onto(ket(1, 1)))])
    assert e.value.invariant == "mutual-orthogonality"


def test_context_rejects_incomplete():
    with pytest.raises(InvariantViolation) as e:
        MeasurementContext("bad", [("x", projector_onto(basis(2, 0)))])
    assert e.value.invariant == "completeness"


def test_context_rejects_duplicate_labels():
    with pytest.raises(InvariantViolation) as e:
        subset_context("bad", 2, [("x", [0]), ("x", [1])])
    assert e.value.invariant == "unique-labels"


def test_context_lookup():
    assert A_BC.labels == ["A", "B∪C"]
    assert A_BC.projector("B∪C").allclose(P_BC)
    with pytest.raises(UnknownOutcome):
        A_BC.projector("C")


def test_probability_table_range_check():
    with pytest.raises(InvariantViolation):
        ProbabilityTable({"x": 1.1})
    assert ProbabilityTable({"x": 1 + 1e-10})["x"] == 1 + 1e-10


def test_nonselective_update_matches_branch_mixture(rng):
    v = random_state(rng, 3)
    ctx = random_context(rng, 3, coarse=False)
    w = lueders_mixture(pure_density(v), ctx)
    table = born_distribution(v, ctx)
    expected = sum(table[n] * pure_density(lueders_update(v, p)).matrix for n, p in ctx if table[n] > 1e-12)
    assert np.allclose(w.matrix, expected, atol=1e-12)
    assert abs(trace_distribution(w, ctx).total() - 1) < 1e-9
