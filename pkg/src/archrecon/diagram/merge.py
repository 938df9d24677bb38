"""Fold partial diagrams into one complete diagram."""
from __future__ import annotations
from collections import defaultdict
import logging
from typing import Sequence

from archrecon.util.errors import PreconditionError
from archrecon.util.utils import EdgeKind, NodeKind
from .model import ArchDiagram, DiagramEdge, DiagramNode, Layer, PartialDiagram


logger = logging.getLogger(__name__)


def _merge(diagrams: Sequence[ArchDiagram]) -> ArchDiagram:
    layers: dict[str, Layer] = {}
    occurrences: dict[str, list[tuple[DiagramNode, int]]] = defaultdict(list)
    edges: dict[tuple[str, str, EdgeKind], DiagramEdge] = {}
    nested: dict[str, list[ArchDiagram]] = defaultdict(list)

    for diagram in diagrams:
        for layer in diagram.layers:
            layers.setdefault(layer.id, layer)
        for node in sorted(diagram.nodes, key=lambda node: node.id):
            occurrences[node.id].append((node, diagram.degree(node.id)))
        for edge in diagram.sorted_edges():
            key = (edge.src, edge.dst, edge.kind)
            existing = edges.get(key)
            if existing is None or (edge.label and not existing.label):
                edges[key] = edge
        for node_id, subview in diagram.subviews.items():
            nested[node_id].append(subview)

    nodes = []
    for node_id, found in occurrences.items():
        label = max((node.label for node, _ in found), key=len)
        home = max(found, key=lambda item: item[1])[0]
        kind = NodeKind.SUBVIEW if node_id in nested else found[0][0].kind
        nodes.append(DiagramNode(node_id, label, home.layer_id, kind))
        if len({node.layer_id for node, _ in found}) > 1:
            logger.debug('node %s placed in layer %s by degree', node_id, home.layer_id)

    subviews = {node_id: _merge(parts) for node_id, parts in nested.items()}
    return ArchDiagram(tuple(layers.values()), frozenset(nodes), frozenset(edges.values()),
                       subviews)


def merge_diagrams(parts: Sequence[PartialDiagram]) -> ArchDiagram:
    """Union partial diagrams by normalized node id.

The longest label wins, the first one on ties. A node claimed by several layers goes to
the part where it has the highest degree, the lowest group index on ties. Edges are keyed
by `(src, dst, kind)` and keep the first non empty label. Subviews merge recursively.

:param parts: Sequence[PartialDiagram]
    at least one partial diagram

:returns: ArchDiagram"""
    if not parts:
        raise PreconditionError('nothing to merge')
    ordered = sorted(parts, key=lambda part: part.group_index)
    merged = _merge([part.diagram for part in ordered])
    logger.info('merged %d partial diagrams into %r', len(parts), merged)
    return merged
