from hypothesis import given, settings, strategies as st
import pytest
from conftest import diagrams
from archrecon.diagram.merge import merge_diagrams
from archrecon.diagram.model import ArchDiagram, DiagramEdge, DiagramNode, Layer, PartialDiagram
from archrecon.util.errors import PreconditionError
from archrecon.util.utils import EdgeKind, NodeKind


def diagram(layers, nodes, edges=(), subviews=None):
    return ArchDiagram(tuple(Layer(layer, layer.title()) for layer in layers),
                       frozenset(DiagramNode(*node) for node in nodes),
                       frozenset(DiagramEdge(*edge) for edge in edges), subviews or {})


FIRST = diagram(['api'], [('a', 'A', 'api'), ('b', 'B', 'api')], [('a', 'b')])
SECOND = diagram(['api', 'core'], [('b', 'B service', 'api'), ('c', 'C', 'core')], [('b', 'c')])


def test_single_part_is_unchanged():
    assert merge_diagrams([PartialDiagram(0, FIRST)]) == FIRST


def test_merge_is_idempotent():
    assert merge_diagrams([PartialDiagram(0, FIRST), PartialDiagram(1, FIRST)]) == FIRST


def test_union():
    merged = merge_diagrams([PartialDiagram(0, FIRST), PartialDiagram(1, SECOND)])
    assert [layer.id for layer in merged.layers] == ['api', 'core']
    assert {node.id for node in merged.nodes} == {'a', 'b', 'c'}
    assert {(edge.src, edge.dst) for edge in merged.edges} == {('a', 'b'), ('b', 'c')}
    assert merged.node_index['b'].label == 'B service'


def test_group_index_decides_not_list_order():
    parts = [PartialDiagram(0, FIRST), PartialDiagram(1, SECOND)]
    assert merge_diagrams(parts) == merge_diagrams(parts[::-1])


def test_label_ties_keep_the_first():
    left = diagram(['api'], [('x', 'One', 'api')])
    right = diagram(['api'], [('x', 'Two', 'api')])
    merged = merge_diagrams([PartialDiagram(1, right), PartialDiagram(0, left)])
    assert merged.node_index['x'].label == 'One'


def test_layer_conflict_goes_to_highest_degree():
    left = diagram(['api', 'core'], [('x', 'X', 'api'), ('y', 'Y', 'core')])
    right = diagram(['core'], [('x', 'X', 'core'), ('y', 'Y', 'core'), ('z', 'Z', 'core')],
                    [('x', 'y'), ('z', 'x')])
    merged = merge_diagrams([PartialDiagram(0, left), PartialDiagram(1, right)])
    assert merged.node_index['x'].layer_id == 'core'


def test_layer_conflict_tie_keeps_lowest_group():
    left = diagram(['api'], [('x', 'X', 'api')])
    right = diagram(['core'], [('x', 'X', 'core')])
    merged = merge_diagrams([PartialDiagram(1, right), PartialDiagram(0, left)])
    assert merged.node_index['x'].layer_id == 'api'


def test_edges_keep_first_label_and_distinct_kinds():
    left = diagram(['api'], [('a', 'A', 'api'), ('b', 'B', 'api')], [('a', 'b')])
    right = diagram(['api'], [('a', 'A', 'api'), ('b', 'B', 'api')],
                    [('a', 'b', EdgeKind.CALL, 'reads'), ('a', 'b', EdgeKind.DATA, 'rows')])
    merged = merge_diagrams([PartialDiagram(0, left), PartialDiagram(1, right)])
    labels = {(edge.kind, edge.label) for edge in merged.edges}
    assert labels == {(EdgeKind.CALL, 'reads'), (EdgeKind.DATA, 'rows')}


def test_subviews_merge_recursively():
    inner_left = diagram(['steps'], [('parse', 'parse', 'steps')])
    inner_right = diagram(['steps'], [('emit', 'emit', 'steps')])
    left = diagram(['core'], [('engine', 'Engine', 'core', NodeKind.SUBVIEW)],
                   subviews={'engine': inner_left})
    right = diagram(['core'], [('engine', 'Engine', 'core')])
    third = diagram(['core'], [('engine', 'Engine', 'core', NodeKind.SUBVIEW)],
                    subviews={'engine': inner_right})
    merged = merge_diagrams([PartialDiagram(0, left), PartialDiagram(1, right),
                             PartialDiagram(2, third)])
    assert merged.node_index['engine'].kind is NodeKind.SUBVIEW
    assert {node.id for node in merged.subviews['engine'].nodes} == {'parse', 'emit'}


def test_nothing_to_merge():
    with pytest.raises(PreconditionError):
        merge_diagrams([])


def edge_keys(merged):
    return {edge.key for edge in merged.edges}


@settings(max_examples=200, deadline=None)
@given(diagrams())
def test_merge_with_itself_is_identity(single):
    assert merge_diagrams([PartialDiagram(0, single)]) == single
    assert merge_diagrams([PartialDiagram(0, single), PartialDiagram(1, single)]) == single


@settings(max_examples=200, deadline=None)
@given(st.lists(diagrams(), min_size=1, max_size=4), st.data())
def test_merge_is_a_union_independent_of_order(drawn, data):
    parts = [PartialDiagram(index, part) for index, part in enumerate(drawn)]
    merged = merge_diagrams(parts)
    node_ids = set().union(*({node.id for node in part.nodes} for part in drawn))
    assert {node.id for node in merged.nodes} == node_ids
    assert len(merged.nodes) == len(node_ids)
    assert edge_keys(merged) == set().union(*(edge_keys(part) for part in drawn))
    assert {layer.id for layer in merged.layers} == \
        set().union(*({layer.id for layer in part.layers} for part in drawn))
    assert merge_diagrams(data.draw(st.permutations(parts))) == merged
