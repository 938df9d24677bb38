from fractions import Fraction
import json
from hypothesis import assume, given, strategies as st
import pytest
from archrecon.diagram.model import ArchDiagram, DiagramEdge, DiagramNode, Layer
from archrecon.evaluate.scoring import (
    AnnotationTable, CategoryScore, ScoreReport, Section, Verdict, diff_against_reference,
    load_scores, load_table, normalize_restoration, render_table, score,
)
from archrecon.util.errors import InvalidRestorationError, MalformedTableError, SchemaError
from archrecon.util.utils import Category


def nodes_table(correct, wrong, omitted):
    verdicts = tuple(Verdict(f'ok{k}', True) for k in range(correct)) + \
        tuple(Verdict(f'bad{k}', False) for k in range(wrong))
    omissions = tuple(f'missing{k}' for k in range(omitted))
    return AnnotationTable('repo', {Category.NODES: Section(verdicts, omissions)})


def test_precision_recall_f1():
    item = CategoryScore(8, 2, 2)
    assert item.precision == item.recall == item.f1 == Fraction(4, 5)


@pytest.mark.parametrize('counts,precision,recall,f1', [
    ((0, 0, 0), 1, 1, 1),
    ((0, 3, 0), 0, 1, 0),
    ((0, 0, 2), 1, 0, 0),
    ((0, 2, 2), 0, 0, 0),
    ((3, 1, 0), Fraction(3, 4), 1, Fraction(6, 7)),
])
def test_conventions(counts, precision, recall, f1):
    item = CategoryScore(*counts)
    assert (item.precision, item.recall, item.f1) == (precision, recall, f1)


def test_weighted_f1():
    report = score(nodes_table(9, 1, 1), restoration=70)
    assert report.aggregate_f1 == Fraction(9, 10)
    assert report.weighted_f1 == Fraction(63, 100)
    assert json.loads(report.to_json())['weighted_f1'] == pytest.approx(0.63)


def test_score_counts_per_category():
    report = score(nodes_table(8, 2, 2))
    assert report.per_category[Category.NODES] == CategoryScore(8, 2, 2)
    assert report.per_category[Category.LAYERS] == CategoryScore(0, 0, 0)
    assert report.aggregate == CategoryScore(8, 2, 2)
    assert report.weighted_f1 is None


def test_aggregate_is_micro_averaged():
    report = ScoreReport('r', {Category.LAYERS: CategoryScore(1, 0, 0),
                               Category.NODES: CategoryScore(1, 1, 0),
                               Category.EDGES: CategoryScore(0, 0, 2)})
    assert report.aggregate == CategoryScore(2, 1, 2)
    assert report.aggregate_f1 == Fraction(4, 7)


@pytest.mark.parametrize('value', [75, 110, -10, True, 50.0, '50'])
def test_invalid_restoration(value):
    with pytest.raises(InvalidRestorationError):
        normalize_restoration(value)


@pytest.mark.parametrize('value,expected', [(None, None), (0, 0), (100, 1),
                                            (40, Fraction(2, 5))])
def test_restoration(value, expected):
    assert normalize_restoration(value) == expected


def test_sections_are_validated():
    with pytest.raises(MalformedTableError):
        Section((Verdict('a', True), Verdict('a', False)))
    with pytest.raises(MalformedTableError):
        Section((Verdict('a', True),), ('a',))
    with pytest.raises(MalformedTableError):
        Section((), ('b', 'b'))


def test_table_round_trip():
    table = nodes_table(2, 1, 1)
    assert AnnotationTable.from_dict(table.to_dict()) == table


@pytest.mark.parametrize('data', [
    {'sections': {'Nodes': {'verdicts': [{'element': 'a', 'correct': 'yes'}]}}},
    {'sections': {'Modules': {'verdicts': []}}},
    {'sections': []},
    [],
])
def test_malformed_tables(data):
    with pytest.raises(MalformedTableError):
        AnnotationTable.from_dict(data)


def test_load_csv(tmp_path):
    path = tmp_path / 'shop.csv'
    path.write_text('category,element,verdict\nlayers,core,true\nNodes,api,false\n'
                    'nodes,store,correct\nedges,a -> b,omission\n')
    table = load_table(path)
    assert table.repo_id == 'shop'
    report = score(table)
    assert report.per_category[Category.LAYERS] == CategoryScore(1, 0, 0)
    assert report.per_category[Category.NODES] == CategoryScore(1, 1, 0)
    assert report.per_category[Category.EDGES] == CategoryScore(0, 0, 1)


@pytest.mark.parametrize('text', [
    'category,element,verdict\nnodes,api,maybe\n',
    'category,element,verdict\nmodules,api,true\n',
    'name,value\nx,1\n',
])
def test_load_bad_csv(tmp_path, text):
    path = tmp_path / 'bad.csv'
    path.write_text(text)
    with pytest.raises(MalformedTableError):
        load_table(path)


def test_load_json(tmp_path):
    path = tmp_path / 'shop.json'
    path.write_text(json.dumps(nodes_table(1, 1, 0).to_dict()))
    assert score(load_table(path)).per_category[Category.NODES] == CategoryScore(1, 1, 0)
    path.write_text('{not json')
    with pytest.raises(MalformedTableError):
        load_table(path)


def test_load_table_errors(tmp_path):
    with pytest.raises(ValueError, match='Unsupported'):
        load_table(tmp_path / 'table.txt')
    with pytest.raises(MalformedTableError):
        load_table(tmp_path / 'missing.csv')


def test_diff_against_reference():
    layer = (Layer('core', 'Core'),)
    generated = ArchDiagram(layer, frozenset({DiagramNode('a', 'A', 'core'),
                                              DiagramNode('b', 'B', 'core')}),
                            frozenset({DiagramEdge('a', 'b')}))
    reference = ArchDiagram(layer, frozenset({DiagramNode('a', 'Alpha', 'core'),
                                              DiagramNode('c', 'C', 'core')}),
                            frozenset({DiagramEdge('a', 'c')}))
    table = diff_against_reference(generated, reference)
    nodes = table.sections[Category.NODES]
    assert nodes.verdicts == (Verdict('a', True), Verdict('b', False))
    assert nodes.omissions == ('c',)
    assert table.sections[Category.EDGES].omissions == ('a -> c',)
    report = score(table)
    assert report.per_category[Category.LAYERS] == CategoryScore(1, 0, 0)
    assert report.aggregate == CategoryScore(2, 2, 2)


def test_identical_diagrams_score_one():
    layer = (Layer('core', 'Core'),)
    reference = ArchDiagram(layer, frozenset({DiagramNode('a', 'A', 'core')}))
    assert score(diff_against_reference(reference, reference)).aggregate_f1 == 1


def test_render_table():
    text = render_table(score(nodes_table(9, 1, 1), restoration=70))
    lines = text.splitlines()
    assert lines[0].split() == ['category', 'tp', 'fp', 'fn', 'P', 'R', 'F1']
    assert lines[3].split() == ['Nodes', '9', '1', '1', '0.900', '0.900', '0.900']
    assert lines[-1] == 'restoration 0.7, weighted F1 0.630'


@pytest.mark.parametrize('data,expected', [
    ([0.5, 1], [0.5, 1.0]),
    ({'scores': [0.25]}, [0.25]),
    ([{'weighted_f1': 0.63, 'aggregate_f1': 0.9}, {'weighted_f1': None, 'aggregate_f1': 0.8}],
     [0.63, 0.8]),
])
def test_load_scores(tmp_path, data, expected):
    path = tmp_path / 'scores.json'
    path.write_text(json.dumps(data))
    assert load_scores(path) == expected


@pytest.mark.parametrize('data', [{'other': 1}, [True], ['0.5']])
def test_load_bad_scores(tmp_path, data):
    path = tmp_path / 'scores.json'
    path.write_text(json.dumps(data))
    with pytest.raises(SchemaError):
        load_scores(path)


counts = st.builds(CategoryScore, st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))


@given(counts)
def test_correcting_a_false_positive_never_lowers_scores(item):
    assume(item.fp > 0)
    better = CategoryScore(item.tp + 1, item.fp - 1, item.fn)
    assert better.precision >= item.precision
    assert better.recall >= item.recall
    assert better.f1 >= item.f1


@given(counts)
def test_an_omission_never_raises_scores(item):
    worse = CategoryScore(item.tp, item.fp, item.fn + 1)
    assert worse.precision == item.precision
    assert worse.recall <= item.recall
    assert worse.f1 <= item.f1


@given(st.lists(counts, min_size=3, max_size=3), st.sampled_from(range(0, 101, 10)))
def test_aggregate_and_weighted_bounds(items, restoration):
    report = ScoreReport('r', dict(zip(Category, items)), normalize_restoration(restoration))
    summed = CategoryScore(sum(item.tp for item in items), sum(item.fp for item in items),
                           sum(item.fn for item in items))
    assert report.aggregate == summed
    assert report.aggregate_f1 == summed.f1
    assert 0 <= report.weighted_f1 <= report.aggregate_f1 <= 1
