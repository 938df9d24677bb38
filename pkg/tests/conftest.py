from pathlib import Path
from hypothesis import strategies as st
import pytest
from archrecon.analysis.ref_index import build_reference_graph
from archrecon.analysis.repo_model import RepoModel, SourceFile
from archrecon.diagram.model import ArchDiagram, DiagramEdge, DiagramNode, Layer
from archrecon.llm.gateway import DiskCache, Gateway
from archrecon.llm.mock import MockBackend
from archrecon.util.utils import EdgeKind, Language, NodeKind


FIXTURES = Path(__file__).resolve().parent.parent / 'data' / 'fixtures'


def repo_of(files, root_name='fixture', manifests=None):
    """RepoModel from `{path: content}`, in the given order."""
    return RepoModel.from_files(root_name, [SourceFile.from_text(path, content)
                                            for path, content in files.items()], manifests)


def sized_repo(sizes, root_name='synthetic'):
    """RepoModel of empty files carrying the given token counts."""
    files = [SourceFile(f'f{index:05d}.py', Language.PYTHON, '', size)
             for index, size in enumerate(sizes)]
    return RepoModel.from_files(root_name, files)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def mock_gateway(tmp_path):
    return Gateway(MockBackend(), DiskCache(tmp_path / 'cache'), sleep=lambda _: None)


@pytest.fixture
def pair_repo():
    return repo_of({
        'a.py': 'def g():\n    return 1\n',
        'b.py': 'import a\n\n\ndef f():\n    return a.g()\n',
    })


@pytest.fixture
def pair_graph(pair_repo):
    return build_reference_graph(pair_repo)


LAYER_IDS = ('api', 'core', 'data')
# normalized ids that collide with Mermaid keywords
NODE_IDS = ('a', 'b', 'class', 'style', 'click', 'direction', 'end', 'subgraph', 'graph',
            'classdef', 'linkstyle', 'n0_x')
labels = st.text(alphabet='abcXYZ019 -_/#"|.:', min_size=1, max_size=12)


@st.composite
def diagrams(draw, depth=1):
    """Valid ArchDiagram, with subviews nested up to `depth` levels."""
    layer_ids = draw(st.lists(st.sampled_from(LAYER_IDS), min_size=1, max_size=3, unique=True))
    layers = tuple(Layer(layer_id, draw(labels)) for layer_id in layer_ids)
    node_ids = draw(st.lists(st.sampled_from(NODE_IDS), max_size=6, unique=True))
    kinds = [NodeKind.MODULE, NodeKind.FILE] + ([NodeKind.SUBVIEW] if depth > 0 else [])
    nodes, subviews = [], {}
    for node_id in node_ids:
        kind = draw(st.sampled_from(kinds))
        nodes.append(DiagramNode(node_id, draw(labels), draw(st.sampled_from(layer_ids)), kind))
        if kind is NodeKind.SUBVIEW:
            subviews[node_id] = draw(diagrams(depth - 1))
    edges = {}
    if node_ids:
        for _ in range(draw(st.integers(0, 8))):
            src = draw(st.sampled_from(node_ids))
            dst = draw(st.sampled_from(node_ids))
            kind = draw(st.sampled_from(list(EdgeKind)))
            edges[(src, dst, kind)] = DiagramEdge(src, dst, kind, draw(st.none() | labels))
    return ArchDiagram(layers, frozenset(nodes), frozenset(edges.values()), subviews)
