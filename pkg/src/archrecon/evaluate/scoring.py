"""Precision, recall and F1 over annotated layers, nodes and edges of a diagram."""
from __future__ import annotations
import csv
from dataclasses import dataclass, field
from fractions import Fraction
import json
from pathlib import Path
from typing import Any, Callable, Mapping

from archrecon.diagram.model import ArchDiagram
from archrecon.util.errors import InvalidRestorationError, MalformedTableError, SchemaError
from archrecon.util.utils import Category


@dataclass(frozen=True)
class Verdict:
    element: str
    correct: bool


@dataclass(frozen=True)
class Section:
    verdicts: tuple[Verdict, ...] = ()
    omissions: tuple[str, ...] = ()

    def __post_init__(self):
        elements = [verdict.element for verdict in self.verdicts]
        if len(set(elements)) != len(elements):
            raise MalformedTableError('verdict elements must be unique within a section')
        if len(set(self.omissions)) != len(self.omissions):
            raise MalformedTableError('omissions must be unique within a section')
        overlap = set(elements) & set(self.omissions)
        if overlap:
            raise MalformedTableError(f'elements both judged and omitted: {sorted(overlap)}')


@dataclass(frozen=True)
class AnnotationTable:
    repo_id: str
    sections: Mapping[Category, Section] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'sections', {category: self.sections.get(category, Section())
                                              for category in Category})

    def to_dict(self) -> dict[str, Any]:
        return {'version': 1, 'repo_id': self.repo_id, 'sections': {
            category.value: {
                'verdicts': [{'element': verdict.element, 'correct': verdict.correct}
                             for verdict in section.verdicts],
                'omissions': list(section.omissions)}
            for category, section in self.sections.items()}}

    @classmethod
    def from_dict(cls, data: Any) -> AnnotationTable:
        try:
            sections = {}
            for name, section in data['sections'].items():
                verdicts = []
                for item in section.get('verdicts', []):
                    if not isinstance(item['correct'], bool):
                        raise MalformedTableError(f'{name}: verdict of {item["element"]!r} '
                                                  'must be true or false')
                    verdicts.append(Verdict(str(item['element']), item['correct']))
                sections[Category(name)] = Section(
                        tuple(verdicts), tuple(str(item) for item in section.get('omissions', [])))
            return cls(str(data.get('repo_id', 'repository')), sections)
        except (KeyError, TypeError, ValueError, AttributeError) as error:
            raise MalformedTableError(f'invalid annotation table: {error!r}') from error


_TRUE = {'true', 'correct', 'tp', '1', 'yes'}
_FALSE = {'false', 'incorrect', 'fp', '0', 'no'}
_OMITTED = {'omission', 'omitted', 'fn', 'missing'}


def _read_json(path: Path) -> AnnotationTable:
    with open(path, encoding='utf8') as handle:
        try:
            data = json.load(handle)
        except ValueError as error:
            raise MalformedTableError(f'{path} is not valid JSON: {error}') from error
    if isinstance(data, dict):
        data.setdefault('repo_id', path.stem)
    return AnnotationTable.from_dict(data)


def _read_csv(path: Path) -> AnnotationTable:
    """Rows of `category,element,verdict`; verdict is true, false or omission."""
    collected: dict[Category, tuple[list[Verdict], list[str]]] = {
            category: ([], []) for category in Category}
    with open(path, encoding='utf8', newline='') as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or \
                {'category', 'element'} - {name.strip().lower() for name in reader.fieldnames}:
            raise MalformedTableError(f'{path}: expected columns category, element, verdict')
        for number, row in enumerate(reader, start=2):
            row = {key.strip().lower(): (value or '').strip() for key, value in row.items()
                   if key is not None}
            try:
                verdicts, omissions = collected[Category(row['category'].capitalize())]
            except ValueError as error:
                raise MalformedTableError(f'{path}:{number}: unknown category '
                                          f'{row["category"]!r}') from error
            value = (row.get('verdict') or row.get('omission') or '').lower()
            if value in _TRUE or value in _FALSE:
                verdicts.append(Verdict(row['element'], value in _TRUE))
            elif value in _OMITTED:
                omissions.append(row['element'])
            else:
                raise MalformedTableError(f'{path}:{number}: unknown verdict {value!r}')
    return AnnotationTable(path.stem, {category: Section(tuple(verdicts), tuple(omissions))
                                       for category, (verdicts, omissions) in collected.items()})


_READERS: dict[str, Callable[[Path], AnnotationTable]] = {'.json': _read_json, '.csv': _read_csv}


def load_table(path: Path | str) -> AnnotationTable:
    """Read an annotation table, the format chosen by file suffix.

:raises: ValueError for unsupported suffixes, MalformedTableError for invalid content"""
    path = Path(path)
    reader = _READERS.get(path.suffix.lower())
    if reader is None:
        raise ValueError(f'Unsupported annotation table format {path.suffix!r}, use .json or .csv')
    try:
        return reader(path)
    except OSError as error:
        raise MalformedTableError(f'cannot read {path}: {error}') from error


@dataclass(frozen=True)
class CategoryScore:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> Fraction:
        """tp / (tp + fp), 1 when nothing was predicted."""
        predicted = self.tp + self.fp
        return Fraction(self.tp, predicted) if predicted else Fraction(1)

    @property
    def recall(self) -> Fraction:
        """tp / (tp + fn), 1 when the reference is empty."""
        relevant = self.tp + self.fn
        return Fraction(self.tp, relevant) if relevant else Fraction(1)

    @property
    def f1(self) -> Fraction:
        precision, recall = self.precision, self.recall
        if precision + recall == 0:
            return Fraction(0)
        return 2 * precision * recall / (precision + recall)

    def __add__(self, other: CategoryScore) -> CategoryScore:
        return CategoryScore(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> dict[str, Any]:
        return {'tp': self.tp, 'fp': self.fp, 'fn': self.fn,
                'precision': float(self.precision), 'recall': float(self.recall),
                'f1': float(self.f1)}


@dataclass(frozen=True)
class ScoreReport:
    repo_id: str
    per_category: Mapping[Category, CategoryScore]
    restoration: Fraction | None = None

    @property
    def aggregate(self) -> CategoryScore:
        return sum(self.per_category.values(), CategoryScore(0, 0, 0))

    @property
    def aggregate_f1(self) -> Fraction:
        return self.aggregate.f1

    @property
    def weighted_f1(self) -> Fraction | None:
        return None if self.restoration is None else self.restoration * self.aggregate_f1

    def to_dict(self) -> dict[str, Any]:
        return {
            'version': 1,
            'repo_id': self.repo_id,
            'per_category': {category.value: score.to_dict()
                             for category, score in self.per_category.items()},
            'aggregate': self.aggregate.to_dict(),
            'aggregate_f1': float(self.aggregate_f1),
            'restoration': None if self.restoration is None else float(self.restoration),
            'weighted_f1': None if self.weighted_f1 is None else float(self.weighted_f1),
            'conventions': 'precision = 1 without predictions, recall = 1 without reference '
                           'items, f1 = 0 when both are 0; aggregate is micro averaged',
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n'


def normalize_restoration(value: int | None) -> Fraction | None:
    """Restoration degree on the 0..100 scale in steps of 10, as a fraction of 1."""
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int) or value % 10 or \
            not 0 <= value <= 100:
        raise InvalidRestorationError(f'restoration must be one of 0, 10, ..., 100, got {value!r}')
    return Fraction(value, 100)


def score(table: AnnotationTable, restoration: int | None = None) -> ScoreReport:
    """Count TP, FP and FN per category and derive P, R and F1.

:param table: AnnotationTable
    annotated verdicts and omissions
:param restoration: int
    optional business restoration degree, a multiple of 10 in [0, 100]

:returns: ScoreReport"""
    rate = normalize_restoration(restoration)
    per_category = {}
    for category, section in table.sections.items():
        tp = sum(verdict.correct for verdict in section.verdicts)
        per_category[category] = CategoryScore(tp, len(section.verdicts) - tp,
                                               len(section.omissions))
    return ScoreReport(table.repo_id, per_category, rate)


def diff_against_reference(generated: ArchDiagram, reference: ArchDiagram,
                           repo_id: str = 'generated') -> AnnotationTable:
    """Annotate `generated` by strict matching against `reference`.

Layers and nodes match by normalized id, edges by `src -> dst`. Synonymous labels with
different ids do not match."""
    sections = {}
    for category in Category:
        produced = generated.elements(category)
        expected = reference.elements(category)
        verdicts = tuple(Verdict(element, element in expected) for element in sorted(produced))
        sections[category] = Section(verdicts, tuple(sorted(expected - produced)))
    return AnnotationTable(repo_id, sections)


def render_table(report: ScoreReport) -> str:
    """Fixed width text table of a report."""
    header = f'{"category":<10} {"tp":>4} {"fp":>4} {"fn":>4} {"P":>7} {"R":>7} {"F1":>7}'
    rows = [header, '-' * len(header)]
    entries = [(category.value, item) for category, item in report.per_category.items()]
    for name, item in entries + [('aggregate', report.aggregate)]:
        rows.append(f'{name:<10} {item.tp:>4} {item.fp:>4} {item.fn:>4} '
                    f'{float(item.precision):>7.3f} {float(item.recall):>7.3f} '
                    f'{float(item.f1):>7.3f}')
    if report.restoration is not None:
        rows.append(f'restoration {float(report.restoration):.1f}, '
                    f'weighted F1 {float(report.weighted_f1 or 0):.3f}')
    return '\n'.join(rows)


def load_scores(path: Path | str) -> list[float]:
    """Per repository scores: a JSON list of numbers, `{"scores": [...]}` or a list of score
reports, of which the weighted F1 is used when present and the aggregate F1 otherwise."""
    try:
        with open(path, encoding='utf8') as handle:
            data = json.load(handle)
    except (OSError, ValueError) as error:
        raise SchemaError(f'cannot read scores {path}: {error}') from error
    if isinstance(data, dict):
        data = data.get('scores', data.get('reports'))
    if not isinstance(data, list):
        raise SchemaError(f'{path}: expected a list of scores')
    values = []
    for item in data:
        if isinstance(item, dict):
            item = item.get('weighted_f1') if item.get('weighted_f1') is not None \
                else item.get('aggregate_f1')
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise SchemaError(f'{path}: every score must be a number, got {item!r}')
        values.append(float(item))
    return values
