"""Deterministic offline backend. Answers are extracted from the prompt, never invented."""
from __future__ import annotations
import posixpath
import re

from archrecon.diagram.mermaid import to_mermaid
from archrecon.diagram.model import ArchDiagram, DiagramEdge, DiagramNode, Layer
from archrecon.util.errors import UnknownTaskTagError
from archrecon.util.utils import EdgeKind, NodeKind, normalize_id
from . import prompts
from .gateway import LlmRequest


SUBVIEW_THRESHOLD = 20
COMMENT_WORDS = 40
LAYER = Layer('components', 'Components')
SUBVIEW_LAYER = Layer('functions', 'Functions')

_DEPENDENCY = re.compile(r'^\s*(?:[-*]\s+)?`?([^\s`]+?)`?\s*->\s*`?([^\s`]+?)`?\s*$')
_LINE_MARKERS = ('#', '//', '--')


def first_comment_block(content: str) -> str:
    """Text of the leading comment or docstring of a file, markers removed."""
    lines = content.splitlines()
    position = 0
    while position < len(lines) and (not lines[position].strip()
                                     or lines[position].startswith('#!')):
        position += 1
    if position == len(lines):
        return ''
    first = lines[position].strip()
    collected: list[str] = []
    for quote in ('"""', "'''"):
        if first.startswith(quote):
            body = first[3:]
            if quote in body:
                return _words(body[:body.index(quote)])
            collected.append(body)
            for line in lines[position + 1:]:
                if quote in line:
                    collected.append(line[:line.index(quote)])
                    break
                collected.append(line)
            return _words(' '.join(collected))
    if first.startswith('/*'):
        for line in lines[position:]:
            end = line.find('*/')
            collected.append(line if end < 0 else line[:end])
            if end >= 0:
                break
        text = ' '.join(part.strip().lstrip('/').lstrip('*') for part in collected)
        return _words(text)
    for marker in _LINE_MARKERS:
        if first.startswith(marker):
            for line in lines[position:]:
                stripped = line.strip()
                if not stripped.startswith(marker):
                    break
                collected.append(stripped.lstrip(marker[0]).lstrip('/!'))
            return _words(' '.join(collected))
    return ''


def _words(text: str) -> str:
    words = text.split()
    clipped = ' '.join(words[:COMMENT_WORDS])
    return clipped + (' ...' if len(words) > COMMENT_WORDS else '')


def _lines(body: str | None) -> list[str]:
    if not body or body.strip() == '(none)':
        return []
    return [line.strip() for line in body.splitlines() if line.strip()]


def _summarize(request: LlmRequest) -> str:
    sections = prompts.split_sections(request.user_content, prompts.SUMMARIZE_SECTIONS)
    path = sections.get('File', '').strip()
    symbols = sorted(set(_lines(sections.get('Symbols'))))
    comment = first_comment_block(sections.get('Content', '')) or 'No leading comment.'
    exports = ', '.join(symbols) if symbols else 'none'
    related = _lines(sections.get('Candidate Related Files'))
    summary = f'`{path}`: {comment} Exports: {exports}.'
    return '\n'.join(related + [prompts.SUMMARY_DELIMITER, summary]) + '\n'


def _summary_paths(body: str | None) -> list[str]:
    return [line[4:].strip() for line in (body or '').splitlines() if line.startswith('### ')]


def _readme(request: LlmRequest) -> str:
    sections = prompts.split_sections(request.user_content, prompts.README_INPUT_SECTIONS)
    name = sections.get('Repository', 'repository').strip()
    paths = _summary_paths(sections.get('Summaries'))
    directories = sorted({path.split('/')[0] for path in paths if '/' in path})
    architecture = [f'{name} consists of {len(paths)} files'
                    + (f' in the directories {", ".join(directories)}.' if directories
                       else ' at the repository root.')]
    upstream = _lines(sections.get('Cross-Repository Context'))
    if upstream:
        architecture += ['', 'Upstream context:'] + upstream
    workflows = _lines(sections.get('Traces')) or ['No traced workflow.']
    entries = _lines(sections.get('Entry Points')) or ['No entry point found.']
    parts = [f'# {name}', '', '## Architecture', *architecture, '', '## Key Modules',
             *[f'- `{path}`' for path in paths], '', '## Primary Workflows', *workflows, '',
             '## Entry Points', *entries]
    return '\n'.join(parts) + '\n'


def component_of(path: str) -> str:
    """First path segment, or the file stem for top level files."""
    if '/' in path:
        return path.split('/')[0]
    return posixpath.splitext(path)[0]


def _diagram(request: LlmRequest) -> str:
    sections = prompts.split_sections(request.user_content, prompts.DIAGRAM_SECTIONS)
    nodes: dict[str, DiagramNode] = {}
    edges: dict[tuple[str, str], DiagramEdge] = {}
    subviews: dict[str, ArchDiagram] = {}

    def component(name: str) -> str:
        label = component_of(name)
        node_id = normalize_id(label)
        nodes.setdefault(node_id, DiagramNode(node_id, label, LAYER.id, NodeKind.MODULE))
        return node_id

    for line in _lines(sections.get('Files')):
        path = prompts.clean_path_line(line)
        if not path:
            continue
        owner = component(path)
        _, _, listed = line.partition(': ')
        functions = [name.strip() for name in listed.split(',') if name.strip()]
        if len(functions) > SUBVIEW_THRESHOLD:
            node_id = normalize_id(path)
            nodes[node_id] = DiagramNode(node_id, path, LAYER.id, NodeKind.SUBVIEW)
            inner = {normalize_id(name): DiagramNode(normalize_id(name), name,
                                                     SUBVIEW_LAYER.id, NodeKind.MODULE)
                     for name in functions}
            subviews[node_id] = ArchDiagram((SUBVIEW_LAYER,), frozenset(inner.values()))
            if owner != node_id:
                edges[(owner, node_id)] = DiagramEdge(owner, node_id, EdgeKind.DEPENDENCY)

    for line in _lines(sections.get('Dependencies')):
        match = _DEPENDENCY.match(line)
        if match is None:
            continue
        src, dst = component(match.group(1)), component(match.group(2))
        if src != dst:
            edges.setdefault((src, dst), DiagramEdge(src, dst, EdgeKind.CALL))

    layers = (LAYER,) if nodes else ()
    return to_mermaid(ArchDiagram(layers, frozenset(nodes.values()), frozenset(edges.values()),
                                  subviews))


def mock_backend_behavior(request: LlmRequest) -> str:
    """Answer `request` from its own content, keyed on the task tag of the system prompt.

:raises: UnknownTaskTagError"""
    task = request.task
    if task == prompts.TASK_SUMMARIZE:
        return _summarize(request)
    if task == prompts.TASK_README:
        return _readme(request)
    if task == prompts.TASK_DIAGRAM:
        return _diagram(request)
    if task == prompts.TASK_ENTRIES:
        return prompts.NO_ENTRIES + '\n'
    raise UnknownTaskTagError(f'the mock backend has no behaviour for task {task!r}')


class MockBackend:
    backend_id = 'mock'

    def send(self, request: LlmRequest) -> str:
        return mock_backend_behavior(request)
