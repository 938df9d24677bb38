"""Significance tests and effect sizes for comparing score vectors."""
from __future__ import annotations
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from archrecon.util.errors import DegenerateVarianceError, LengthMismatchError, PreconditionError


@dataclass(frozen=True)
class PairedStats:
    n: int
    mean_diff: float
    sd_diff: float
    t_statistic: float
    effect_size: float
    ci_low: float
    ci_high: float
    p_value: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class IndependentStats:
    n_a: int
    n_b: int
    mean_diff: float
    t_statistic: float
    dof: float
    effect_size: float
    ci_low: float
    ci_high: float
    p_value: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class Description:
    n: int
    mean: float
    sd: float
    sem: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def paired_compare(scores_a: Sequence[float], scores_b: Sequence[float],
                   confidence: float = 0.95) -> PairedStats:
    """Paired t-test on `a - b`.

Cohen's d is the mean difference over the sample standard deviation of the differences;
the confidence interval on the mean difference uses the t distribution with n - 1 degrees
of freedom.

:raises: LengthMismatchError for unequal lengths or fewer than two pairs,
    DegenerateVarianceError when all differences are identical"""
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatchError(f'paired samples differ in length: {a.size} vs {b.size}')
    n = a.size
    if n < 2:
        raise LengthMismatchError('a paired test needs at least two pairs')
    diff = a - b
    if np.all(diff == diff[0]):
        raise DegenerateVarianceError('all paired differences are identical')

    dof = n - 1
    mean = float(np.mean(diff))
    sd = float(np.std(diff, ddof=1))
    se = sd / np.sqrt(n)
    t_statistic = mean / se
    p_value = float(2 * stats.t.sf(abs(t_statistic), dof))
    margin = float(stats.t.ppf(0.5 + confidence / 2, dof) * se)
    return PairedStats(n, mean, sd, float(t_statistic), mean / sd, mean - margin, mean + margin,
                       p_value)


def independent_compare(scores_a: Sequence[float], scores_b: Sequence[float],
                        confidence: float = 0.95) -> IndependentStats:
    """Welch's two sample t-test with a pooled standard deviation Cohen's d."""
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise LengthMismatchError('each sample needs at least two scores')
    var_a, var_b = float(np.var(a, ddof=1)), float(np.var(b, ddof=1))
    if var_a == 0 and var_b == 0:
        raise DegenerateVarianceError('both samples are constant')
    n_a, n_b = a.size, b.size
    mean = float(np.mean(a) - np.mean(b))
    se2_a, se2_b = var_a / n_a, var_b / n_b
    se = np.sqrt(se2_a + se2_b)
    dof = (se2_a + se2_b) ** 2 / (se2_a ** 2 / (n_a - 1) + se2_b ** 2 / (n_b - 1))
    t_statistic = mean / se
    p_value = float(2 * stats.t.sf(abs(t_statistic), dof))
    margin = float(stats.t.ppf(0.5 + confidence / 2, dof) * se)
    pooled = np.sqrt(((n_a - 1) * var_a + (n_b - 1) * var_b) / (n_a + n_b - 2))
    return IndependentStats(n_a, n_b, mean, float(t_statistic), float(dof),
                            float(mean / pooled), mean - margin, mean + margin, p_value)


def describe(scores: Sequence[float]) -> Description:
    """Mean, sample standard deviation and standard error of the mean."""
    values = np.asarray(scores, dtype=float)
    if values.size < 2:
        raise PreconditionError('describing a sample needs at least two scores')
    sd = float(np.std(values, ddof=1))
    return Description(int(values.size), float(np.mean(values)), sd,
                       sd / float(np.sqrt(values.size)))
