import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from endprompt_lab.errors import CapacityError, EmptySequenceError, GapConditionError, OverlapError
from endprompt_lab.intervals import DistanceSet
from endprompt_lab.plan import (
    CoverageReport,
    PlanSpec,
    PositionPlan,
    coverage_report,
    draw_pose_skips,
    effective_positions,
    endprompt_plan,
    full_plan,
    gap_distances,
    observed_distances_bruteforce,
    observed_distances_closed_form,
    pose_plan,
    pose_plan_from_skips,
)


def pair_differences(assigned):
    """Independent oracle: every causal difference via Python sets."""
    return {assigned[l] - assigned[r] for l in range(len(assigned)) for r in range(l + 1)}


def test_endprompt_plan_examples():
    assert endprompt_plan(PlanSpec(4, 2, 16)).assigned.tolist() == [0, 1, 2, 3, 14, 15]
    assert endprompt_plan(PlanSpec(1, 1, 2)).assigned.tolist() == [0, 1]
    big = endprompt_plan(PlanSpec(48, 8, 512)).assigned.tolist()
    assert big == list(range(48)) + list(range(504, 512))


def test_endprompt_overlap_rejected():
    with pytest.raises(OverlapError):
        PlanSpec(10, 7, 16)


def test_full_plan():
    assert full_plan(4).assigned.tolist() == [0, 1, 2, 3]
    assert full_plan(1).assigned.tolist() == [0]
    with pytest.raises(EmptySequenceError):
        full_plan(0)
    a, b, L = 6, 3, 40
    diff = full_plan(a + b).assigned != endprompt_plan(PlanSpec(a, b, L)).assigned
    assert diff.tolist() == [False] * a + [True] * b


def test_pose_plan_given_skips():
    assert pose_plan_from_skips(6, 2, 16, 1.0, [0, 10]).assigned.tolist() == [0, 1, 2, 13, 14, 15]
    assert pose_plan_from_skips(6, 2, 16, 1.0, [0, 0]).assigned.tolist() == [0, 1, 2, 3, 4, 5]
    with pytest.raises(CapacityError):
        pose_plan_from_skips(6, 2, 16, 1.0, [0, 11])


def test_pose_skip_budget_over_random_draws():
    for seed in range(50):
        n, chunks, L = 30, 3, 200
        skips = draw_pose_skips(chunks, L - n, np.random.default_rng(seed))
        plan = pose_plan(n, chunks, L, 1.0, np.random.default_rng(seed))
        assert plan.assigned.max() - (n - 1) == sum(skips)
        assert plan.assigned[-1] <= L - 1
        assert np.all(np.diff(plan.assigned) > 0)


def test_pose_capacity_error():
    with pytest.raises(CapacityError):
        pose_plan(20, 2, 10, 1.0, np.random.default_rng(0))


def test_effective_positions():
    np.testing.assert_allclose(effective_positions(PositionPlan([0, 15], 8.0)), [0.0, 1.875])
    plan = PositionPlan(list(range(6)) + list(range(28, 32)), 4.0)
    expected = [0, 0.25, 0.5, 0.75, 1.0, 1.25, 7.0, 7.25, 7.5, 7.75]
    np.testing.assert_allclose(effective_positions(plan), expected)
    assert effective_positions(full_plan(5)).tolist() == [0, 1, 2, 3, 4]


def test_observed_bruteforce_examples():
    plan = PositionPlan([0, 1, 2, 3, 14, 15])
    assert observed_distances_bruteforce(plan) == DistanceSet([(0, 3), (11, 15)])
    assert set(observed_distances_bruteforce(plan).values()) == pair_differences([0, 1, 2, 3, 14, 15])
    assert observed_distances_bruteforce(PositionPlan([0])) == DistanceSet([(0, 0)])
    assert observed_distances_bruteforce(PositionPlan([0, 1, 2])) == DistanceSet([(0, 2)])


@pytest.mark.parametrize(
    "a,b,L,expected",
    [
        (4, 2, 16, [(0, 3), (11, 15)]),
        (2, 2, 12, [(0, 1), (9, 11)]),
        (1, 1, 4, [(0, 0), (3, 3)]),
    ],
)
def test_closed_form_examples(a, b, L, expected):
    spec = PlanSpec(a, b, L)
    assert observed_distances_closed_form(spec) == DistanceSet(expected)
    oracle = pair_differences(endprompt_plan(spec).assigned.tolist())
    assert set(observed_distances_closed_form(spec).values()) == oracle


def test_gap_examples_and_condition():
    assert gap_distances(PlanSpec(4, 2, 16)) == DistanceSet([(4, 10)])
    assert gap_distances(PlanSpec(2, 2, 12)) == DistanceSet([(2, 8)])
    with pytest.raises(GapConditionError):
        gap_distances(PlanSpec(4, 2, 9))


def gap_specs():
    return st.integers(1, 300).flatmap(
        lambda a: st.integers(1, 300).flatmap(
            lambda b: st.builds(PlanSpec, st.just(a), st.just(b), st.integers(a + b + max(a, b), 4096))
        )
    )


@settings(max_examples=200, deadline=None)
@given(gap_specs())
def test_complement_identity(spec):
    obs = observed_distances_closed_form(spec)
    assert gap_distances(spec) == obs.complement(0, spec.L - 1)
    assert obs == observed_distances_bruteforce(endprompt_plan(spec))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 200))
def test_cross_segment_reach(a, b, extra):
    spec = PlanSpec(a, b, a + b + extra)
    assert observed_distances_bruteforce(endprompt_plan(spec)).max() == spec.L - 1


def test_coverage_report_examples():
    rep = coverage_report(endprompt_plan(PlanSpec(4, 2, 16)), 16, 4, 2)
    assert rep.coverage_fraction == 9 / 16
    assert rep.largest_gap_width == 7
    assert rep.to_record() == (
        "kind=endprompt a=4 b=2 L=16 s=1 coverage_fraction=0.562500 "
        "largest_gap_width=7 intervals=0-3,11-15"
    )
    full = coverage_report(full_plan(32), 32)
    assert full.coverage_fraction == 1.0 and full.largest_gap_width == 0
    assert coverage_report(PositionPlan([0]), 8).coverage_fraction == 1 / 8


def test_coverage_record_round_trip():
    rep = coverage_report(endprompt_plan(PlanSpec(5, 3, 40, 2.5)), 40, 5, 3)
    back = CoverageReport.from_record(rep.to_record())
    assert back.observed == rep.observed and back.gap == rep.gap
    assert back.largest_gap_width == rep.largest_gap_width
    assert back.s == 2.5


def test_coverage_rejects_out_of_window_plan():
    with pytest.raises(CapacityError):
        coverage_report(PositionPlan([0, 20]), 16)
