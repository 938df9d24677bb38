"""Partition a repository into overlapping, near uniform groups that each fit a token budget.

Files keep their canonical DFS order. Each file occupies the interval of cumulative tokens
`[start, end)`; group `k` covers `[(1 - r) * S * k, (1 - r) * S * k + S)` with
`S = T / ((1 - r) * G + r)`, so consecutive groups share about `r * S` tokens and the last
group ends exactly at `T`. All arithmetic is exact."""
from __future__ import annotations
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from itertools import accumulate
import logging
import math
import statistics
from typing import Any, Mapping

from archrecon.util.errors import (
    NonConvergenceError, PreconditionError, SchemaError, SingleFileOverflowError,
)
from .repo_model import RepoModel


logger = logging.getLogger(__name__)

DEFAULT_OVERLAP = 0.10


@dataclass(frozen=True)
class Group:
    index: int
    files: tuple[str, ...]
    token_sum: int
    overlap_with_prev: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {'index': self.index, 'files': list(self.files), 'token_sum': self.token_sum,
                'overlap_with_prev': list(self.overlap_with_prev)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Group:
        return cls(int(data['index']), tuple(data['files']), int(data['token_sum']),
                   tuple(data.get('overlap_with_prev', ())))


@dataclass(frozen=True)
class GroupPlan:
    groups: tuple[Group, ...]
    budget: int
    total_tokens: int
    overlap_rate: float = DEFAULT_OVERLAP
    incremented: bool = False

    @property
    def group_count(self) -> int:
        return len(self.groups)

    def to_dict(self) -> dict[str, Any]:
        return {'version': 1, 'budget': self.budget, 'total_tokens': self.total_tokens,
                'overlap_rate': self.overlap_rate, 'incremented': self.incremented,
                'group_count': self.group_count,
                'groups': [group.to_dict() for group in self.groups]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GroupPlan:
        try:
            return cls(tuple(Group.from_dict(item) for item in data['groups']),
                       int(data['budget']), int(data['total_tokens']),
                       float(data.get('overlap_rate', DEFAULT_OVERLAP)),
                       bool(data.get('incremented', False)))
        except (KeyError, TypeError, ValueError) as error:
            raise SchemaError(f'invalid group plan document: {error}') from error

    def __repr__(self):
        sums = ', '.join(str(group.token_sum) for group in self.groups)
        return f'{self.__class__.__name__}(G={self.group_count}, budget={self.budget}, ' \
               f'sums=[{sums}])'


def _weights(repo: RepoModel, weights: Mapping[str, int] | None) -> list[int]:
    if weights is None:
        return [file.token_count for file in repo.files]
    sizes = [int(weights.get(file.path, file.token_count)) for file in repo.files]
    if any(size < 0 for size in sizes):
        raise PreconditionError('token weights must be non-negative')
    return sizes


def _check_budget(repo: RepoModel, sizes: list[int], budget: int) -> None:
    if budget <= 0:
        raise PreconditionError(f'budget must be positive, got {budget}')
    for file, size in zip(repo.files, sizes):
        if size > budget:
            raise SingleFileOverflowError(
                    f'{file.path} alone needs {size} tokens, more than the budget of {budget}')


def _assign(sizes: list[int], group_count: int, rate: Fraction) -> list[tuple[int, int]]:
    """Inclusive `(first, last)` file positions of each group."""
    total = sum(sizes)
    ends = list(accumulate(sizes))
    starts = [end - size for end, size in zip(ends, sizes)]
    span = Fraction(total) / ((1 - rate) * group_count + rate)
    stride = (1 - rate) * span
    bounds: list[tuple[int, int]] = []
    for k in range(group_count):
        low = stride * k
        first = bisect_right(ends, low)
        last = bisect_left(starts, low + span) - 1
        if k == 0:
            first = 0
        else:
            first = min(first, bounds[-1][1] + 1)
        if k == group_count - 1:
            last = len(sizes) - 1
        bounds.append((first, max(first, last)))
    return bounds


def _build(repo: RepoModel, sizes: list[int], bounds: list[tuple[int, int]]
           ) -> tuple[Group, ...]:
    paths = repo.paths
    groups = []
    previous_last = -1
    for index, (first, last) in enumerate(bounds):
        overlap = tuple(paths[first:previous_last + 1]) if first <= previous_last else ()
        groups.append(Group(index, tuple(paths[first:last + 1]), sum(sizes[first:last + 1]),
                            overlap))
        previous_last = last
    return tuple(groups)


def plan_groups(repo: RepoModel, budget: int, overlap_rate: float = DEFAULT_OVERLAP,
                weights: Mapping[str, int] | None = None) -> GroupPlan:
    """Split `repo` into `G = ceil(T / budget)` overlapping groups of near equal size.

If the overlap pushes a group over the budget, `G` is incremented until every group fits.

:param repo: RepoModel
    repository in canonical DFS order
:param budget: int
    maximum tokens per group
:param overlap_rate: float
    share of a group repeated in the next one, in [0, 0.5]
:param weights: Mapping
    per file token counts replacing the source token counts, e.g. summary sizes

:returns: GroupPlan

:raises: SingleFileOverflowError, NonConvergenceError"""
    if not 0 <= overlap_rate <= 0.5:
        raise PreconditionError(f'overlap_rate must lie in [0, 0.5], got {overlap_rate}')
    sizes = _weights(repo, weights)
    _check_budget(repo, sizes, budget)
    total = sum(sizes)
    rate = Fraction(overlap_rate).limit_denominator(10 ** 6)

    if total == 0 or len(sizes) == 1:
        group = Group(0, tuple(repo.paths), total)
        return GroupPlan((group,), budget, total, overlap_rate)

    initial = max(1, math.ceil(total / budget))
    group_count = initial
    while True:
        if group_count > len(sizes):
            raise NonConvergenceError(f'no plan of at most {len(sizes)} groups keeps every group '
                                      f'within {budget} tokens')
        bounds = _assign(sizes, group_count, rate)
        groups = _build(repo, sizes, bounds)
        if all(group.token_sum <= budget for group in groups):
            break
        logger.debug('G=%d exceeds the budget of %d, retrying with G=%d',
                     group_count, budget, group_count + 1)
        group_count += 1

    plan = GroupPlan(groups, budget, total, overlap_rate, incremented=group_count != initial)
    logger.info('grouped %s into %r', repo.root_name, plan)
    return plan


def plan_fixed_groups(repo: RepoModel, budget: int,
                      weights: Mapping[str, int] | None = None) -> GroupPlan:
    """Baseline grouping: fill each group greedily up to the budget, without overlap."""
    sizes = _weights(repo, weights)
    _check_budget(repo, sizes, budget)
    bounds: list[tuple[int, int]] = []
    first, running = 0, 0
    for position, size in enumerate(sizes):
        if running + size > budget and position > first:
            bounds.append((first, position - 1))
            first, running = position, 0
        running += size
    bounds.append((first, len(sizes) - 1))
    return GroupPlan(_build(repo, sizes, bounds), budget, sum(sizes), 0.0)


def group_variance(plan: GroupPlan) -> Fraction:
    """Population variance of the group token sums."""
    if not plan.groups:
        raise PreconditionError('plan has no groups')
    return statistics.pvariance([Fraction(group.token_sum) for group in plan.groups])
