import math
from fractions import Fraction

import numpy as np
import pytest

from tsqm.ensemble import (
    NO_CLICK,
    DetectorModel,
    Evolve,
    ExperimentSpec,
    Measure,
    aggregate,
    compare_to_abl,
    detector_efficiency_report,
    exact_conditional,
    run_ensemble,
    run_trial,
    simulate_raw,
)
from tsqm.errors import (
    DimensionMismatch,
    InvariantViolation,
    NoPostselectedTrials,
    StepNotMeasure,
    UnknownOutcome,
)
from tsqm.experiments import (
    entangled_pair_experiment,
    postselection_context,
    spin_sequence,
    three_box,
    three_box_contexts,
    two_detector,
)
from tsqm.hilbert import basis, ket, random_state, random_unitary
from tsqm.measure import computational_context, trivial_context
from tsqm.rng import TrialStream
from tsqm.tsvf import abl_distribution

N = 100_000
SEED = 42


def within(observed, expected, sigma, k=4.0):
    return abs(observed - expected) <= k * sigma


def binomial_sigma(p, n):
    return math.sqrt(p * (1 - p) / n)


# oracle: |<psi2|psi1>|^2 with psi1 ~ (1,1,1), psi2 ~ (1,1,-1)
OVERLAP_SQ = float(Fraction(1 + 1 - 1, 3) ** 2)


def test_run_trial_three_box_ii_always_a_when_postselected():
    spec = three_box("ii").spec
    seen = 0
    for t in range(3000):
        rec = run_trial(spec, TrialStream(7, t))
        assert len(rec.intermediate_outcomes) == 1
        if rec.postselected:
            seen += 1
            assert rec.intermediate_outcomes == ((0, "A"),)
    assert seen > 0


def test_run_trial_without_steps():
    same = ExperimentSpec("same", ket(1, 2j, 3), (), postselection_context(ket(1, 2j, 3)), "post")
    orth = ExperimentSpec("orth", basis(3, 0), (), postselection_context(basis(3, 1)), "post")
    for t in range(200):
        assert run_trial(same, TrialStream(1, t)).postselected
        assert not run_trial(orth, TrialStream(1, t)).postselected


def test_run_trial_matches_ensemble_rows():
    spec = three_box("iv").spec
    raw = simulate_raw(spec, 500, 3)
    for t in (0, 17, 499):
        rec = run_trial(spec, TrialStream(3, t))
        assert rec.occurred[0][1] == spec.steps[0].context.labels[raw.outcomes[t, 0]]
        assert rec.post_outcome == spec.post_context.labels[raw.post[t]]


def test_no_click_recorded_but_state_collapses():
    spec = three_box("iv").spec.with_efficiency({"*": 0.0})
    recs = [run_trial(spec, TrialStream(5, t)) for t in range(300)]
    assert all(r.intermediate_outcomes[0][1] == NO_CLICK for r in recs)
    # collapse still happened: postselected rate stays near 1/3, not 1/9
    stats = run_ensemble(spec, N, SEED)
    assert within(stats.postselection_rate, 1 / 3, binomial_sigma(1 / 3, N))
    assert stats.clicked[0] == 0 and stats.no_click_trials == N


def test_arrangement_i_postselection_rate():
    stats = run_ensemble(three_box("i").spec, N, SEED)
    assert within(stats.postselection_rate, OVERLAP_SQ, binomial_sigma(OVERLAP_SQ, N))
    assert stats.labels == {}


def test_arrangement_ii_exact_zero_branch():
    stats = run_ensemble(three_box("ii").spec, N, SEED)
    assert stats.conditional_frequencies[(0, "A")] == 1.0
    assert stats.counts[(0, "B∪C")] == 0
    assert within(stats.postselection_rate, 1 / 9, binomial_sigma(1 / 9, N))


def test_arrangement_iv_uniform():
    stats = run_ensemble(three_box("iv").spec, N, SEED)
    assert within(stats.postselection_rate, 1 / 3, binomial_sigma(1 / 3, N))
    for label in "ABC":
        f = stats.conditional_frequencies[(0, label)]
        assert within(f, 1 / 3, binomial_sigma(1 / 3, stats.postselected))
    total = sum(stats.frequencies(0).values())
    assert abs(total - 1) <= 1 / math.sqrt(stats.postselected)


def test_spin_sequence_exact():
    stats = run_ensemble(spin_sequence("sigma_x").spec, 10_000, SEED)
    assert stats.conditional_frequencies[(0, "up_x")] == 1.0


def test_no_postselected_trials():
    orth = ExperimentSpec("orth", basis(3, 0), (), postselection_context(basis(3, 1)), "post")
    with pytest.raises(NoPostselectedTrials):
        run_ensemble(orth, 1000, 1)


def test_compare_to_abl_examples():
    s4 = three_box("iv")
    stats = run_ensemble(s4.spec, N, SEED)
    zs = compare_to_abl(stats, s4.oracle, 0)
    assert all(abs(z.z) <= 4 for z in zs.values())
    s2 = three_box("ii")
    zs = compare_to_abl(run_ensemble(s2.spec, N, SEED), s2.oracle, 0)
    assert all(z.exact for z in zs.values())


def test_compare_to_abl_negative_control_grows():
    spec = three_box("ii").spec
    wrong = {"A": 0.5, "B∪C": 0.5}
    z_small = compare_to_abl(run_ensemble(spec, 2_000, SEED), wrong, 0)["A"].z
    z_big = compare_to_abl(run_ensemble(spec, 200_000, SEED), wrong, 0)["A"].z
    assert z_big > 5 * z_small > 0
    assert z_big > 20


def test_compare_to_abl_errors():
    stats = run_ensemble(three_box("ii").spec, 1000, SEED)
    with pytest.raises(StepNotMeasure):
        compare_to_abl(stats, {"A": 1}, 3)
    with pytest.raises(UnknownOutcome):
        compare_to_abl(stats, {"A": 1}, 0)


def efficiency_spec(eta):
    ctx = three_box_contexts()["iv"]
    return ExperimentSpec("thinned", ket(1, 1, 1), (Measure(ctx, DetectorModel.uniform(eta)),),
                          trivial_context(3), "all")


def test_detector_report_perfect():
    rep = detector_efficiency_report(efficiency_spec(1.0), 1000, 1)
    assert rep.click_rate == 1.0 and not rep.no_clicks


def test_detector_report_thinning():
    rep = detector_efficiency_report(efficiency_spec(0.7), N, SEED)
    assert within(rep.click_rate, 0.7, binomial_sigma(0.7, N))
    for label in "ABC":
        assert within(rep.conditional_given_click[label], 1 / 3, binomial_sigma(1 / 3, rep.clicks))


def test_detector_report_dead_detector():
    rep = detector_efficiency_report(efficiency_spec(0.0), 1000, 1)
    assert rep.click_rate == 0.0 and rep.no_clicks and len(rep.conditional_given_click) == 0


def test_detector_report_requires_single_measure():
    with pytest.raises(StepNotMeasure):
        detector_efficiency_report(three_box("i").spec, 100, 1)


def test_detector_model_validation():
    with pytest.raises(InvariantViolation):
        DetectorModel({"A": 1.2})
    assert DetectorModel({"A": 0.5}).for_outcome("B") == 1.0


def test_uniform_thinning_preserves_postselected_conditionals():
    perfect = run_ensemble(three_box("iv").spec, N, SEED)
    thinned = run_ensemble(three_box("iv").spec.with_efficiency({"*": 0.4}), N, SEED)
    for label in "ABC":
        f0 = perfect.conditional_frequencies[(0, label)]
        f1 = thinned.conditional_frequencies[(0, label)]
        assert within(f1, f0, math.hypot(perfect.standard_errors[(0, label)], thinned.standard_errors[(0, label)]))


CANNED_SINGLE_STEP = [
    lambda: three_box("ii"), lambda: three_box("iii"), lambda: three_box("iv"),
    lambda: spin_sequence("sigma_x"), lambda: spin_sequence("sigma_y"),
    lambda: spin_sequence("sigma_x", swapped=True),
    lambda: two_detector(0.3), lambda: entangled_pair_experiment((1, 2j, 0.5)),
]


@pytest.mark.parametrize("build", CANNED_SINGLE_STEP)
def test_convergence_and_zero_branch_exactness(build):
    canned = build()
    spec = canned.spec
    stats = run_ensemble(spec, N, SEED)
    for label, p in canned.oracle.items():
        f = stats.conditional_frequencies[(0, label)]
        if p == 0.0:
            assert stats.counts[(0, label)] == 0
        else:
            assert within(f, p, binomial_sigma(p, stats.postselected))
    assert within(stats.postselection_rate, canned.postselection_probability,
                  binomial_sigma(canned.postselection_probability, N) or 1e-300)


def test_two_detectors_constitute_one():
    spec = two_detector(0.5).spec
    raw = simulate_raw(spec, N, SEED)
    assert np.all((raw.outcomes[:, 0] == 0) | (raw.outcomes[:, 0] == 1))
    assert np.all(raw.clicks == 1)


def test_multi_step_against_enumeration(rng):
    ctx1 = computational_context(3, ["A", "B", "C"])
    ctx2 = three_box_contexts()["ii"]
    u = random_unitary(rng, 3)
    spec = ExperimentSpec("multi", random_state(rng, 3),
                          (Measure(ctx1), Evolve(u), Measure(ctx2), Evolve(u.adjoint())),
                          postselection_context(random_state(rng, 3)), "post")
    rate, tables = exact_conditional(spec)
    stats = run_ensemble(spec, N, SEED)
    assert within(stats.postselection_rate, rate, binomial_sigma(rate, N))
    for k, table in tables.items():
        for label, p in table.items():
            assert within(stats.conditional_frequencies[(k, label)], p, binomial_sigma(p, stats.postselected) + 1e-12)


def test_exact_conditional_matches_abl_single_step():
    for arr in ("ii", "iii", "iv"):
        spec = three_box(arr).spec
        rate, tables = exact_conditional(spec)
        abl = abl_distribution(spec.boundary_conditions(), spec.steps[0].context)
        assert dict(tables[0]) == pytest.approx(dict(abl), abs=1e-12)


def test_determinism_same_triple():
    spec = three_box("iv").spec
    assert run_ensemble(spec, 20_000, 11) == run_ensemble(spec, 20_000, 11)
    assert run_ensemble(spec, 20_000, 11) != run_ensemble(spec, 20_000, 12)


def test_aggregate_is_order_insensitive():
    spec = three_box("iv").spec
    raw = simulate_raw(spec, 5000, 9)
    perm = np.random.default_rng(0).permutation(5000)
    shuffled = type(raw)(raw.outcomes[perm], raw.clicks[perm], raw.post[perm])
    assert aggregate(spec, raw) == aggregate(spec, shuffled)


def test_trial_blocks_compose():
    spec = three_box("iv").spec
    whole = simulate_raw(spec, 1000, 4)
    a = simulate_raw(spec, 400, 4, trial_start=0)
    b = simulate_raw(spec, 600, 4, trial_start=400)
    assert np.array_equal(whole.outcomes, np.concatenate([a.outcomes, b.outcomes]))
    assert np.array_equal(whole.post, np.concatenate([a.post, b.post]))


def test_spec_validation():
    with pytest.raises(UnknownOutcome):
        ExperimentSpec("x", ket(1, 1), (), trivial_context(2), "nope")
    with pytest.raises(DimensionMismatch):
        ExperimentSpec("x", ket(1, 1), (Measure(computational_context(3)),), trivial_context(2), "all")
    with pytest.raises(UnknownOutcome):
        three_box("iv").spec.with_efficiency({"Z": 0.5})
    with pytest.raises(ValueError):
        simulate_raw(three_box("iv").spec, 0, 1)
