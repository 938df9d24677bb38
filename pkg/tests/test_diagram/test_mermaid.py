from hypothesis import given, settings
import pytest
from conftest import diagrams
from archrecon.diagram.mermaid import (
    escape, parse_mermaid, parse_mermaid_with_diagnostics, to_mermaid, unescape,
)
from archrecon.diagram.model import ArchDiagram, DiagramEdge, DiagramNode, Layer
from archrecon.util.errors import MermaidSyntaxError
from archrecon.util.utils import EdgeKind, NodeKind


GOLDEN = '''flowchart TD
    subgraph api["API"]
        gateway["Gateway"]
    end
    subgraph core["Core"]
        store["Store #quot;main#quot;"]:::file
    end
    gateway -->|"reads"| store
    store -.-> gateway
'''


def golden_diagram():
    return ArchDiagram(
        (Layer('api', 'API'), Layer('core', 'Core')),
        frozenset({DiagramNode('gateway', 'Gateway', 'api'),
                   DiagramNode('store', 'Store "main"', 'core', NodeKind.FILE)}),
        frozenset({DiagramEdge('gateway', 'store', EdgeKind.CALL, 'reads'),
                   DiagramEdge('store', 'gateway', EdgeKind.DATA)}),
    )


def test_serialize():
    assert to_mermaid(golden_diagram()) == GOLDEN


def test_parse():
    assert parse_mermaid(GOLDEN) == golden_diagram()


def test_nested_subview_round_trip():
    inner = ArchDiagram((Layer('steps', 'Steps'),),
                        frozenset({DiagramNode('parse', 'parse()', 'steps'),
                                   DiagramNode('emit', 'emit()', 'steps')}),
                        frozenset({DiagramEdge('parse', 'emit')}))
    diagram = ArchDiagram((Layer('core', 'Core'),),
                          frozenset({DiagramNode('engine', 'Engine', 'core', NodeKind.SUBVIEW),
                                     DiagramNode('cli', 'CLI', 'core')}),
                          frozenset({DiagramEdge('cli', 'engine', EdgeKind.DEPENDENCY)}),
                          {'engine': inner})
    text = to_mermaid(diagram)
    assert 'engine__parse --> engine__emit' in text
    assert 'cli ==> engine' in text
    assert parse_mermaid(text) == diagram


def test_empty_diagram():
    assert to_mermaid(ArchDiagram()) == 'flowchart TD\n'
    assert parse_mermaid('flowchart TD\n').is_empty()


def test_model_output_is_tolerated():
    text = '''Here is the diagram:
```mermaid
graph LR
    subgraph Data Access
        Repo[(Repository)]
    end
    %% a comment
    classDef hot fill:#f00
    UserService["User Service"] --> Repo
    UserService ==> Cache;
```'''
    diagram, diagnostics = parse_mermaid_with_diagnostics(text)
    assert [layer.id for layer in diagram.layers] == ['data_access', 'default']
    assert diagram.layers[0].label == 'Data Access'
    assert diagram.node_index['repo'].label == 'Repository'
    assert diagram.node_index['userservice'].layer_id == 'default'
    assert {(edge.src, edge.dst, edge.kind) for edge in diagram.edges} == {
        ('userservice', 'repo', EdgeKind.CALL), ('userservice', 'cache', EdgeKind.DEPENDENCY)}
    assert any('auto-declared node cache' in item.message for item in diagnostics)


def test_edges_touching_layers_are_dropped():
    text = 'flowchart TD\nsubgraph api\n    a\nend\napi --> a\n'
    diagram, diagnostics = parse_mermaid_with_diagnostics(text)
    assert not diagram.edges
    assert any('touching a layer' in item.message for item in diagnostics)


def test_unbalanced_subgraphs():
    text = 'flowchart TD\nend\nsubgraph api\n    a\n'
    diagram, diagnostics = parse_mermaid_with_diagnostics(text)
    assert {node.id for node in diagram.nodes} == {'a'}
    messages = ' '.join(item.message for item in diagnostics)
    assert 'unbalanced end' in messages
    assert 'left open' in messages


def test_header_is_required():
    with pytest.raises(MermaidSyntaxError):
        parse_mermaid('A --> B\n')


def test_escape():
    assert escape('a "b" #1 | c') == 'a #quot;b#quot; #35;1 #124; c'
    assert unescape(escape('a#35;b')) == 'a#35;b'


@pytest.mark.parametrize('keyword', ['class', 'style', 'click', 'direction', 'subgraph', 'end'])
def test_keyword_ids_round_trip(keyword):
    diagram = ArchDiagram((Layer('l', 'L'),),
                          frozenset({DiagramNode(keyword, keyword.title(), 'l'),
                                     DiagramNode('b', 'B', 'l')}),
                          frozenset({DiagramEdge(keyword, 'b'), DiagramEdge('b', keyword)}))
    text = to_mermaid(diagram)
    assert f'{keyword} --> b' in text
    assert parse_mermaid(text) == diagram


def test_directives_are_skipped():
    text = ('flowchart TD\nsubgraph l\n    a\nend\nclass a hot\nstyle a fill:#f00\n'
            'click a call go()\ndirection LR\nlinkStyle 0 stroke:#0f0\n')
    diagram, diagnostics = parse_mermaid_with_diagnostics(text)
    assert {node.id for node in diagram.nodes} == {'a'}
    assert not diagnostics


def test_empty_edge_label_is_none():
    edge = DiagramEdge('a', 'b', EdgeKind.CALL, '')
    assert edge.label is None
    diagram = ArchDiagram((Layer('l', 'L'),),
                          frozenset({DiagramNode('a', 'A', 'l'), DiagramNode('b', 'B', 'l')}),
                          frozenset({edge}))
    assert parse_mermaid(to_mermaid(diagram)) == diagram


@settings(max_examples=500, deadline=None)
@given(diagrams())
def test_round_trip(diagram):
    text = to_mermaid(diagram)
    assert parse_mermaid(text) == diagram
    assert to_mermaid(parse_mermaid(text)) == text
