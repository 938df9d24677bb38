"""Score annotated diagrams and compare methods statistically."""

from . import scoring
from .scoring import AnnotationTable, ScoreReport, score

from . import stats
from .stats import independent_compare, paired_compare
