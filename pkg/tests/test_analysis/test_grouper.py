from fractions import Fraction
import math
from hypothesis import given, settings, strategies as st
import pytest
from archrecon.analysis.grouper import (
    Group, GroupPlan, group_variance, plan_fixed_groups, plan_groups,
)
from archrecon.util.errors import (
    NonConvergenceError, PreconditionError, SchemaError, SingleFileOverflowError,
)
from conftest import sized_repo


def bounds(plan, repo):
    return [(repo.position(group.files[0]), repo.position(group.files[-1]))
            for group in plan.groups]


def test_two_groups_share_ten_percent():
    repo = sized_repo([1] * 190)
    plan = plan_groups(repo, 100)
    assert plan.group_count == 2
    assert bounds(plan, repo) == [(0, 99), (90, 189)]
    assert [group.token_sum for group in plan.groups] == [100, 100]
    assert len(plan.groups[1].overlap_with_prev) == 10
    assert not plan.incremented


def test_overflow_increments_group_count():
    repo = sized_repo([1] * 300)
    plan = plan_groups(repo, 100)
    assert plan.group_count == 4
    assert plan.incremented
    assert [group.token_sum for group in plan.groups] == [82, 83, 83, 82]
    assert [len(group.overlap_with_prev) for group in plan.groups] == [0, 10, 10, 10]


def test_small_repo_is_one_group():
    repo = sized_repo([10, 20, 30])
    plan = plan_groups(repo, 100)
    assert plan.group_count == 1
    assert plan.groups[0].files == tuple(repo.paths)
    assert plan.groups[0].token_sum == 60


@pytest.mark.parametrize('sizes', [[0, 0, 0], [42]])
def test_degenerate_repos(sizes):
    repo = sized_repo(sizes)
    plan = plan_groups(repo, 100)
    assert plan.group_count == 1
    assert plan.groups[0].files == tuple(repo.paths)


def test_no_overlap_rate():
    repo = sized_repo([1] * 200)
    plan = plan_groups(repo, 100, overlap_rate=0.0)
    assert bounds(plan, repo) == [(0, 99), (100, 199)]
    assert plan.groups[1].overlap_with_prev == ()


def test_weights_replace_token_counts():
    repo = sized_repo([1000] * 4)
    weights = {path: 10 for path in repo.paths}
    plan = plan_groups(repo, 100, weights=weights)
    assert plan.group_count == 1
    assert plan.total_tokens == 40
    with pytest.raises(SingleFileOverflowError):
        plan_groups(repo, 100)


def test_single_file_overflow():
    with pytest.raises(SingleFileOverflowError, match='f00001.py'):
        plan_groups(sized_repo([5, 150, 5]), 100)


def test_non_convergence():
    with pytest.raises(NonConvergenceError):
        plan_groups(sized_repo([60, 60, 60]), 100)


@pytest.mark.parametrize('budget,rate', [(0, 0.1), (-5, 0.1), (100, 0.6), (100, -0.1)])
def test_preconditions(budget, rate):
    with pytest.raises(PreconditionError):
        plan_groups(sized_repo([1] * 10), budget, overlap_rate=rate)


def test_variance():
    plan = GroupPlan((Group(0, ('a',), 90), Group(1, ('b',), 110)), 200, 200)
    assert group_variance(plan) == 100


def test_variance_of_empty_plan():
    with pytest.raises(PreconditionError):
        group_variance(GroupPlan((), 100, 0))


@pytest.mark.parametrize('count', [190, 210, 350])
def test_overlapping_plan_is_more_uniform_than_fixed(count):
    repo = sized_repo([1] * count)
    overlapping = plan_groups(repo, 100)
    fixed = plan_fixed_groups(repo, 100)
    assert group_variance(overlapping) < group_variance(fixed)


def test_fixed_groups_fill_greedily():
    repo = sized_repo([40, 40, 40, 40, 40])
    plan = plan_fixed_groups(repo, 100)
    assert [group.token_sum for group in plan.groups] == [80, 80, 40]
    assert all(group.overlap_with_prev == () for group in plan.groups)


def test_plan_round_trip():
    plan = plan_groups(sized_repo([1] * 300), 100)
    assert GroupPlan.from_dict(plan.to_dict()) == plan


def test_plan_rejects_bad_documents():
    with pytest.raises(SchemaError):
        GroupPlan.from_dict({'groups': [{'index': 0}], 'budget': 1, 'total_tokens': 1})


@st.composite
def log_uniform_sizes(draw):
    """File token counts spread evenly over orders of magnitude."""
    count = draw(st.integers(1, 2000))
    largest = draw(st.integers(1, 5000))
    rng = draw(st.randoms(use_true_random=False))
    return [int(math.exp(rng.uniform(0, math.log(largest)))) for _ in range(count)]


@settings(max_examples=200, deadline=None)
@given(sizes=log_uniform_sizes(), rate=st.sampled_from([0.0, 0.05, 0.10, 0.25, 0.5]),
       data=st.data())
def test_plan_properties(sizes, rate, data):
    total, largest = sum(sizes), max(sizes)
    budget = data.draw(st.integers(6 * largest, max(6 * largest, total)))
    repo = sized_repo(sizes)
    plan = plan_groups(repo, budget, overlap_rate=rate)
    assert plan.total_tokens == total
    assert plan.group_count >= math.ceil(total / budget)
    if not plan.incremented:
        assert plan.group_count == math.ceil(total / budget)

    positions = bounds(plan, repo)
    assert positions[0][0] == 0
    assert positions[-1][1] == len(sizes) - 1
    for group, (first, last) in zip(plan.groups, positions):
        assert group.files == tuple(repo.paths[first:last + 1])
        assert group.token_sum == sum(sizes[first:last + 1]) <= budget
    for previous, current in zip(plan.groups, plan.groups[1:]):
        earlier = set(previous.files)
        assert current.overlap_with_prev == tuple(
                path for path in current.files if path in earlier)
        assert repo.position(current.files[0]) <= repo.position(previous.files[-1]) + 1

    if plan.group_count > 1:
        fraction = Fraction(rate).limit_denominator(10 ** 6)
        span = Fraction(total) / ((1 - fraction) * plan.group_count + fraction)
        sums = [group.token_sum for group in plan.groups]
        for token_sum in sums:
            assert span <= token_sum <= span + 2 * largest
        # no small group left over at the tail
        assert min(sums) * 2 * len(sums) >= sum(sums)


@settings(max_examples=30, deadline=None)
@given(data=st.data())
def test_overlap_tracks_rate_for_unit_files(data):
    count = data.draw(st.integers(400, 2000))
    budget = data.draw(st.integers(200, count // 2))
    plan = plan_groups(sized_repo([1] * count), budget)
    span = Fraction(count) / (Fraction(9, 10) * plan.group_count + Fraction(1, 10))
    for group in plan.groups[1:]:
        assert abs(len(group.overlap_with_prev) - span / 10) <= 2
