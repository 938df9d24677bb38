"""Architecture diagram model: ordered layers, typed nodes and edges, nested subviews."""
from __future__ import annotations
from dataclasses import dataclass, field
import json
from typing import Any, Mapping

from archrecon.util.errors import SchemaError
from archrecon.util.utils import Category, EdgeKind, NodeKind, normalize_id


@dataclass(frozen=True)
class Layer:
    id: str
    label: str


@dataclass(frozen=True)
class DiagramNode:
    id: str
    label: str
    layer_id: str
    kind: NodeKind = NodeKind.MODULE


@dataclass(frozen=True)
class DiagramEdge:
    src: str
    dst: str
    kind: EdgeKind = EdgeKind.CALL
    label: str | None = None

    def __post_init__(self):
        if self.label == '':
            object.__setattr__(self, 'label', None)

    @property
    def key(self) -> tuple[str, str, str]:
        return self.src, self.dst, self.kind.value


@dataclass(frozen=True, eq=True)
class ArchDiagram:
    layers: tuple[Layer, ...] = ()
    nodes: frozenset[DiagramNode] = frozenset()
    edges: frozenset[DiagramEdge] = frozenset()
    subviews: Mapping[str, ArchDiagram] = field(default_factory=dict)

    __hash__ = None  # type: ignore[assignment]

    def __post_init__(self):
        layer_ids = [layer.id for layer in self.layers]
        if len(set(layer_ids)) != len(layer_ids):
            raise ValueError('layer ids must be unique')
        for identifier in layer_ids:
            _check_id(identifier)
        index: dict[str, DiagramNode] = {}
        for node in self.nodes:
            _check_id(node.id)
            if node.id in index:
                raise ValueError(f'duplicate node id {node.id!r}')
            if node.layer_id not in layer_ids:
                raise ValueError(f'node {node.id!r} refers to unknown layer {node.layer_id!r}')
            index[node.id] = node
        keys = set()
        for edge in self.edges:
            if edge.src not in index or edge.dst not in index:
                raise ValueError(f'edge {edge.src} -> {edge.dst} has an unknown endpoint')
            if edge.key in keys:
                raise ValueError(f'duplicate edge {edge.src} -> {edge.dst} ({edge.kind.value})')
            keys.add(edge.key)
        subview_nodes = {node.id for node in self.nodes if node.kind is NodeKind.SUBVIEW}
        if set(self.subviews) != subview_nodes:
            raise ValueError('subviews must be keyed by exactly the nodes of kind Subview')
        object.__setattr__(self, 'subviews', dict(self.subviews))

    @property
    def node_index(self) -> dict[str, DiagramNode]:
        return {node.id: node for node in self.nodes}

    def nodes_in(self, layer_id: str) -> list[DiagramNode]:
        return sorted((node for node in self.nodes if node.layer_id == layer_id),
                      key=lambda node: node.id)

    def sorted_edges(self) -> list[DiagramEdge]:
        return sorted(self.edges, key=lambda edge: edge.key)

    def degree(self, node_id: str) -> int:
        return sum((edge.src == node_id) + (edge.dst == node_id) for edge in self.edges)

    def is_empty(self) -> bool:
        return not self.layers and not self.nodes

    def elements(self, category: Category) -> set[str]:
        """Comparable element names of a category: layer ids, node ids or `src -> dst`."""
        if category is Category.LAYERS:
            return {layer.id for layer in self.layers}
        if category is Category.NODES:
            return {node.id for node in self.nodes}
        return {f'{edge.src} -> {edge.dst}' for edge in self.edges}

    def to_dict(self) -> dict[str, Any]:
        return {
            'version': 1,
            'layers': [{'id': layer.id, 'label': layer.label} for layer in self.layers],
            'nodes': [{'id': node.id, 'label': node.label, 'layer_id': node.layer_id,
                       'kind': node.kind.value}
                      for node in sorted(self.nodes, key=lambda node: node.id)],
            'edges': [{'src': edge.src, 'dst': edge.dst, 'kind': edge.kind.value,
                       'label': edge.label} for edge in self.sorted_edges()],
            'subviews': {key: self.subviews[key].to_dict() for key in sorted(self.subviews)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + '\n'

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ArchDiagram:
        try:
            return cls(
                tuple(Layer(item['id'], item['label']) for item in data.get('layers', [])),
                frozenset(DiagramNode(item['id'], item['label'], item['layer_id'],
                                      NodeKind(item.get('kind', 'Module')))
                          for item in data.get('nodes', [])),
                frozenset(DiagramEdge(item['src'], item['dst'],
                                      EdgeKind(item.get('kind', 'Call')), item.get('label'))
                          for item in data.get('edges', [])),
                {key: cls.from_dict(value) for key, value in data.get('subviews', {}).items()},
            )
        except (KeyError, TypeError, ValueError) as error:
            raise SchemaError(f'invalid diagram document: {error}') from error

    def __repr__(self):
        return f'{self.__class__.__name__}(layers={len(self.layers)}, nodes={len(self.nodes)}, ' \
               f'edges={len(self.edges)}, subviews={len(self.subviews)})'


@dataclass(frozen=True)
class PartialDiagram:
    group_index: int
    diagram: ArchDiagram


def _check_id(identifier: str) -> None:
    if normalize_id(identifier) != identifier:
        raise ValueError(f'identifier {identifier!r} is not normalized')
