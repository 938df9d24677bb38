"""Mermaid flowchart serialization of ArchDiagram and a tolerant parser for model output.

Top level subgraphs are layers. A subgraph inside a layer is a subview node whose nested
diagram is written inside it, node ids prefixed with `<subview id>__`."""
from __future__ import annotations
from dataclasses import dataclass, field
import logging
import re

from archrecon.util.errors import MermaidSyntaxError
from archrecon.util.utils import Diagnostic, EdgeKind, NodeKind, normalize_id
from .model import ArchDiagram, DiagramEdge, DiagramNode, Layer


logger = logging.getLogger(__name__)

HEADER = 'flowchart TD'
DEFAULT_LAYER = 'default'
FILE_CLASS = 'file'
INDENT = '    '

ARROWS = {EdgeKind.CALL: '-->', EdgeKind.DATA: '-.->', EdgeKind.DEPENDENCY: '==>'}
_ARROW_KINDS = {arrow: kind for kind, arrow in ARROWS.items()}

_HEADER = re.compile(r'^(flowchart|graph)(\s+(TD|TB|BT|LR|RL))?\s*;?\s*$', re.IGNORECASE)
_SUBGRAPH = re.compile(r'^subgraph\s+([\w.-]+)\s*(?:\[(.*)\])?\s*$')
_SUBGRAPH_TITLE = re.compile(r'^subgraph\s+(.+?)\s*$')
_ENDPOINT = r'([\w.-]+)(?:\s*[\[(]{1,2}(.*?)[\])]{1,2})?'
_EDGE = re.compile(rf'^{_ENDPOINT}\s*(-\.->|-->|==>)\s*(?:\|(.*?)\|\s*)?{_ENDPOINT}\s*;?$')
_NODE = re.compile(r'^([\w.-]+)\s*(?:[\[(]{1,2}(.*?)[\])]{1,2})?\s*(?::::\s*([\w-]+))?\s*;?$')
_DIRECTIVE = re.compile(r'^(?:(?:classDef|class|style|linkStyle|click|direction)\s|%%)')
_ESCAPE = re.compile(r'#(quot|35|124);')
_UNESCAPE = {'quot': '"', '35': '#', '124': '|'}


def escape(label: str) -> str:
    return label.replace('#', '#35;').replace('"', '#quot;').replace('|', '#124;')


def unescape(label: str) -> str:
    return _ESCAPE.sub(lambda match: _UNESCAPE[match.group(1)], label)


def _label(raw: str | None) -> str | None:
    if raw is None:
        return None
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] == '"':
        raw = raw[1:-1]
    return unescape(raw)


def _emit(diagram: ArchDiagram, prefix: str, depth: int, lines: list[str]) -> None:
    pad = INDENT * depth
    for layer in diagram.layers:
        lines.append(f'{pad}subgraph {prefix}{layer.id}["{escape(layer.label)}"]')
        for node in diagram.nodes_in(layer.id):
            inner = INDENT * (depth + 1)
            if node.kind is NodeKind.SUBVIEW:
                lines.append(f'{inner}subgraph {prefix}{node.id}["{escape(node.label)}"]')
                _emit(diagram.subviews[node.id], f'{prefix}{node.id}__', depth + 2, lines)
                lines.append(f'{inner}end')
            else:
                suffix = f':::{FILE_CLASS}' if node.kind is NodeKind.FILE else ''
                lines.append(f'{inner}{prefix}{node.id}["{escape(node.label)}"]{suffix}')
        lines.append(f'{pad}end')
    for edge in diagram.sorted_edges():
        label = f'|"{escape(edge.label)}"|' if edge.label else ''
        lines.append(f'{pad}{prefix}{edge.src} {ARROWS[edge.kind]}{label} {prefix}{edge.dst}')


def to_mermaid(diagram: ArchDiagram) -> str:
    """Serialize `diagram` as a Mermaid flowchart ending in a single newline."""
    lines = [HEADER]
    _emit(diagram, '', 1, lines)
    return '\n'.join(lines) + '\n'


@dataclass
class _Scope:
    """A diagram under construction."""
    prefix: str
    layers: list[Layer] = field(default_factory=list)
    nodes: dict[str, DiagramNode] = field(default_factory=dict)
    edges: list[tuple[str, str, EdgeKind, str | None]] = field(default_factory=list)
    subviews: dict[str, _Scope] = field(default_factory=dict)

    def local_id(self, raw: str) -> str:
        if self.prefix and raw.startswith(self.prefix):
            raw = raw[len(self.prefix):]
        return normalize_id(raw)

    def ensure_layer(self, layer_id: str, label: str) -> None:
        if all(layer.id != layer_id for layer in self.layers):
            self.layers.append(Layer(layer_id, label))


@dataclass
class _Frame:
    scope: _Scope
    layer_id: str | None


class _Parser:
    def __init__(self):
        self.diagnostics: list[Diagnostic] = []
        self.root = _Scope('')
        self.stack: list[_Frame] = [_Frame(self.root, None)]

    def note(self, number: int, message: str) -> None:
        self.diagnostics.append(Diagnostic(f'mermaid:{number}', message))

    def declare(self, scope: _Scope, layer_id: str | None, raw_id: str, label: str | None,
                kind: NodeKind, number: int) -> str:
        node_id = scope.local_id(raw_id)
        if node_id in scope.nodes:
            existing = scope.nodes[node_id]
            if label is not None and existing.label == existing.id and label != existing.label:
                scope.nodes[node_id] = DiagramNode(node_id, label, existing.layer_id,
                                                   existing.kind)
            elif label is not None and layer_id is not None:
                self.note(number, f'node {node_id} declared again, keeping the first')
            return node_id
        if layer_id is None:
            layer_id = DEFAULT_LAYER
            scope.ensure_layer(DEFAULT_LAYER, DEFAULT_LAYER)
        scope.nodes[node_id] = DiagramNode(node_id, node_id if label is None else label,
                                           layer_id, kind)
        return node_id

    def open_subgraph(self, number: int, raw_id: str, label: str | None) -> None:
        frame = self.stack[-1]
        scope = frame.scope
        if frame.layer_id is None:
            layer_id = scope.local_id(raw_id)
            scope.ensure_layer(layer_id, layer_id if label is None else label)
            self.stack.append(_Frame(scope, layer_id))
            return
        node_id = self.declare(scope, frame.layer_id, raw_id, label, NodeKind.SUBVIEW, number)
        node = scope.nodes[node_id]
        if node.kind is not NodeKind.SUBVIEW:
            scope.nodes[node_id] = DiagramNode(node_id, node.label, node.layer_id,
                                               NodeKind.SUBVIEW)
        nested = scope.subviews.setdefault(node_id, _Scope(f'{scope.prefix}{node_id}__'))
        self.stack.append(_Frame(nested, None))

    def line(self, number: int, text: str) -> None:
        frame = self.stack[-1]
        if text == 'end':
            if len(self.stack) == 1:
                self.note(number, 'unbalanced end ignored')
            else:
                self.stack.pop()
            return
        # edges first: node ids such as `class` or `subgraph` look like keywords
        match = _EDGE.match(text)
        if match:
            src_raw, src_label, arrow, edge_label, dst_raw, dst_label = match.groups()
            scope = frame.scope
            src = self.declare(scope, frame.layer_id, src_raw, _label(src_label),
                               NodeKind.MODULE, number) if src_label is not None \
                else scope.local_id(src_raw)
            dst = self.declare(scope, frame.layer_id, dst_raw, _label(dst_label),
                               NodeKind.MODULE, number) if dst_label is not None \
                else scope.local_id(dst_raw)
            scope.edges.append((src, dst, _ARROW_KINDS[arrow], _label(edge_label) or None))
            return
        match = _SUBGRAPH.match(text)
        if match:
            self.open_subgraph(number, match.group(1), _label(match.group(2)))
            return
        match = _SUBGRAPH_TITLE.match(text)
        if match:
            title = _label(match.group(1)) or ''
            self.open_subgraph(number, normalize_id(title), title)
            return
        if _DIRECTIVE.match(text):
            return
        match = _NODE.match(text)
        if match:
            raw_id, label, css = match.groups()
            kind = NodeKind.FILE if css == FILE_CLASS else NodeKind.MODULE
            self.declare(frame.scope, frame.layer_id, raw_id, _label(label), kind, number)
            return
        self.note(number, f'skipped unrecognised statement: {text[:80]}')

    def build(self, scope: _Scope, source: str) -> ArchDiagram:
        layer_ids = {layer.id for layer in scope.layers}
        edges: dict[tuple[str, str, EdgeKind], DiagramEdge] = {}
        for src, dst, kind, label in scope.edges:
            if any(end in layer_ids and end not in scope.nodes for end in (src, dst)):
                self.diagnostics.append(Diagnostic(source, f'dropped edge {src} -> {dst} '
                                                           'touching a layer'))
                continue
            for end in (src, dst):
                if end not in scope.nodes:
                    scope.ensure_layer(DEFAULT_LAYER, DEFAULT_LAYER)
                    scope.nodes[end] = DiagramNode(end, end, DEFAULT_LAYER, NodeKind.MODULE)
                    self.diagnostics.append(Diagnostic(source, f'auto-declared node {end}'))
            key = (src, dst, kind)
            if key not in edges:
                edges[key] = DiagramEdge(src, dst, kind, label)
            elif label and not edges[key].label:
                edges[key] = DiagramEdge(src, dst, kind, label)
        subviews = {node_id: self.build(nested, f'{source}/{node_id}')
                    for node_id, nested in scope.subviews.items()}
        return ArchDiagram(tuple(scope.layers), frozenset(scope.nodes.values()),
                           frozenset(edges.values()), subviews)


def parse_mermaid_with_diagnostics(text: str) -> tuple[ArchDiagram, list[Diagnostic]]:
    """Parse Mermaid flowchart text, returning the diagram and the problems skipped over.

:raises: MermaidSyntaxError if no flowchart header is found."""
    lines = text.splitlines()
    start = next((number for number, raw in enumerate(lines)
                  if _HEADER.match(raw.strip())), None)
    if start is None:
        raise MermaidSyntaxError('no flowchart header found')
    parser = _Parser()
    for number, raw in enumerate(lines[start + 1:], start + 2):
        stripped = raw.strip()
        if not stripped or stripped.startswith('```'):
            continue
        parser.line(number, stripped)
    if len(parser.stack) > 1:
        parser.note(len(lines), f'{len(parser.stack) - 1} subgraph(s) left open')
    diagram = parser.build(parser.root, 'mermaid')
    for diagnostic in parser.diagnostics:
        logger.debug('%s', diagnostic)
    return diagram, parser.diagnostics


def parse_mermaid(text: str) -> ArchDiagram:
    return parse_mermaid_with_diagnostics(text)[0]
