"""README synthesis: entry points, downstream traces, cross-repository signals and the
generated document."""
from __future__ import annotations
from configparser import ConfigParser, Error as ConfigParserError
from dataclasses import dataclass
import json
import logging
from pathlib import Path
import posixpath
import re
import sys
from typing import Any, Callable, Iterable, Sequence

import networkx as nx

from archrecon.analysis.ref_index import PathIndex, ReferenceGraph, in_degree
from archrecon.analysis.repo_model import RepoModel, SourceFile
from archrecon.llm import prompts
from archrecon.llm.gateway import Gateway
from archrecon.util.errors import (
    PreconditionError, SchemaError, SectionValidationError, UnknownFileError,
)
from archrecon.util.utils import Diagnostic, EntryKind, Language, RefKind
from .summarizer import FileSummary

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


logger = logging.getLogger(__name__)

DOC_EXCERPT_CHARS = 1200
_HEADER = re.compile(r'^##\s+(.+?)\s*#*\s*$')


@dataclass(frozen=True)
class EntryPoint:
    file: str
    kind: EntryKind
    evidence: str

    def sort_key(self) -> tuple[int, str]:
        return self.kind.precedence, self.file

    def to_dict(self) -> dict[str, str]:
        return {'file': self.file, 'kind': self.kind.value, 'evidence': self.evidence}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> EntryPoint:
        return cls(data['file'], EntryKind(data['kind']), data['evidence'])


@dataclass(frozen=True)
class Trace:
    entry: EntryPoint
    path_nodes: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {'entry': self.entry.to_dict(), 'path_nodes': list(self.path_nodes)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Trace:
        return cls(EntryPoint.from_dict(data['entry']), tuple(data['path_nodes']))

    def render(self) -> str:
        return ' -> '.join(f'`{node}`' for node in self.path_nodes)


# cross-repository signals

@dataclass(frozen=True)
class ApiUsage:
    endpoint: str
    method: str
    callers: tuple[str, ...]
    qps: float


@dataclass(frozen=True)
class RepoSignal:
    name: str
    doc_text: str | None
    apis: tuple[ApiUsage, ...] = ()


@dataclass(frozen=True)
class CrossRepoSignals:
    repos: tuple[RepoSignal, ...] = ()

    def __post_init__(self):
        names = [repo.name for repo in self.repos]
        if len(set(names)) != len(names):
            raise SchemaError('repository names in signals must be unique')
        for repo in self.repos:
            for api in repo.apis:
                if api.qps < 0:
                    raise SchemaError(f'{repo.name} {api.endpoint}: qps must be non-negative')

    def is_empty(self) -> bool:
        return not self.repos

    @classmethod
    def from_dict(cls, data: Any) -> CrossRepoSignals:
        if not isinstance(data, dict):
            raise SchemaError('signals document must be a JSON object')
        if data.get('version') != 1:
            raise SchemaError(f'unsupported signals version {data.get("version")!r}, expected 1')
        try:
            repos = []
            for repo in data.get('repos', []):
                apis = tuple(ApiUsage(str(api['endpoint']), str(api.get('method', 'GET')),
                                      tuple(str(caller) for caller in api.get('callers', [])),
                                      float(api.get('qps', 0)))
                             for api in repo.get('apis', []))
                doc_text = repo.get('doc_text')
                repos.append(RepoSignal(str(repo['name']),
                                        None if doc_text is None else str(doc_text), apis))
        except (KeyError, TypeError, ValueError, AttributeError) as error:
            raise SchemaError(f'invalid signals document: {error!r}') from error
        return cls(tuple(repos))

    def to_dict(self) -> dict[str, Any]:
        return {'version': 1, 'repos': [
            {'name': repo.name, 'doc_text': repo.doc_text,
             'apis': [{'endpoint': api.endpoint, 'method': api.method,
                       'callers': list(api.callers), 'qps': api.qps} for api in repo.apis]}
            for repo in self.repos]}

    def render(self) -> str:
        """API table by descending QPS, followed by documentation excerpts."""
        rows = sorted(((repo.name, api) for repo in self.repos for api in repo.apis),
                      key=lambda row: (-row[1].qps, row[0], row[1].endpoint, row[1].method))
        lines = []
        if rows:
            lines += ['| Repository | Method | Endpoint | Callers | QPS |',
                      '| --- | --- | --- | --- | --- |']
            lines += [f'| {name} | {api.method} | {api.endpoint} | '
                      f'{", ".join(api.callers) or "-"} | {api.qps:g} |' for name, api in rows]
        for repo in self.repos:
            if repo.doc_text:
                excerpt = repo.doc_text.strip()[:DOC_EXCERPT_CHARS]
                lines += ['', f'### {repo.name}', excerpt]
        return '\n'.join(lines).strip('\n')


def load_signals(path: Path | str) -> CrossRepoSignals:
    try:
        with open(path, encoding='utf8') as handle:
            data = json.load(handle)
    except OSError as error:
        raise SchemaError(f'cannot read signals {path}: {error}') from error
    except ValueError as error:
        raise SchemaError(f'signals {path} is not valid JSON: {error}') from error
    return CrossRepoSignals.from_dict(data)


@dataclass(frozen=True)
class ReadmeDoc:
    text: str
    sections: tuple[str, ...]

    @classmethod
    def from_text(cls, text: str) -> ReadmeDoc:
        return cls(text, tuple(section_headers(text)))

    def missing(self) -> list[str]:
        return [name for name in prompts.README_SECTIONS if name not in self.sections]

    def section(self, name: str) -> str:
        return section_body(self.text, name)


def section_headers(text: str) -> list[str]:
    return [match.group(1) for match in map(_HEADER.match, text.splitlines()) if match]


def section_body(text: str, name: str) -> str:
    lines = text.splitlines()
    body: list[str] = []
    inside = False
    for line in lines:
        match = _HEADER.match(line)
        if match:
            if inside:
                break
            inside = match.group(1) == name
            continue
        if inside:
            body.append(line)
    return '\n'.join(body).strip('\n')


# entry points

_PY_MAIN_GUARD = re.compile(r'^if\s+__name__\s*==\s*[\'"]__main__[\'"]\s*:', re.MULTILINE)
_JAVA_MAIN = re.compile(r'\bpublic\s+static\s+void\s+main\s*\(')
_GO_MAIN_PACKAGE = re.compile(r'^package\s+main\b', re.MULTILINE)
_SERVER = re.compile(
        r'\b(?:http\.ListenAndServe(?:TLS)?|\w+\.listen|\w+\.serve_forever|uvicorn\.run|'
        r'\w+\.run_server|SpringApplication\.run|HttpServer::new|axum::serve|'
        r'grpc\.NewServer|\w+\.Serve)\s*\(')
_CLI = re.compile(r'argparse\.ArgumentParser\s*\(|@click\.(?:command|group)\b|'
                  r'\bcobra\.Command\b|\bflag\.Parse\s*\(|#\[derive\([^)]*Parser')
_MAIN_LANGUAGES = {Language.C, Language.CPP, Language.RUST}


def _main_evidence(file: SourceFile, graph: ReferenceGraph) -> str | None:
    content = file.content
    if file.language is Language.PYTHON:
        if _PY_MAIN_GUARD.search(content):
            return 'module guard `if __name__ == "__main__"`'
        if posixpath.basename(file.path) == '__main__.py':
            return 'package `__main__.py` module'
    elif file.language is Language.JAVA:
        if _JAVA_MAIN.search(content):
            return 'method `public static void main`'
    elif file.language is Language.GO:
        if _GO_MAIN_PACKAGE.search(content) and f'{file.path}::main' in graph.node_index:
            return 'function `main` of package `main`'
    elif file.language in _MAIN_LANGUAGES and f'{file.path}::main' in graph.node_index:
        return 'function `main`'
    return None


def _module_target(index: PathIndex, manifest: str, reference: str) -> str | None:
    """File of a `package.module:function` reference."""
    module = reference.split(':')[0].strip()
    if not module:
        return None
    stem = module.replace('.', '/')
    base = posixpath.dirname(manifest)
    for candidate in (f'{stem}.py', f'{stem}/__main__.py', f'{stem}/__init__.py'):
        for rooted in (posixpath.join(base, candidate), posixpath.join(base, 'src', candidate)):
            if rooted in index.paths:
                return rooted
        found = index.pick(candidate, manifest)
        if found:
            return found
    return None


def _relative_target(index: PathIndex, manifest: str, target: str) -> str | None:
    path = posixpath.normpath(posixpath.join(posixpath.dirname(manifest), target))
    return path if path in index.paths else None


def _pyproject(text: str, manifest: str, index: PathIndex) -> Iterable[tuple[str, str]]:
    data = tomllib.loads(text)
    scripts = dict(data.get('project', {}).get('scripts', {}))
    scripts.update(data.get('tool', {}).get('poetry', {}).get('scripts', {}))
    for name, reference in sorted(scripts.items()):
        target = _module_target(index, manifest, str(reference))
        if target:
            yield target, f'{manifest} script `{name} = {reference}`'


def _setup_cfg(text: str, manifest: str, index: PathIndex) -> Iterable[tuple[str, str]]:
    parser = ConfigParser()
    parser.read_string(text)
    if not parser.has_option('options.entry_points', 'console_scripts'):
        return
    for line in parser.get('options.entry_points', 'console_scripts').splitlines():
        name, _, reference = line.partition('=')
        target = _module_target(index, manifest, reference)
        if target:
            yield target, f'{manifest} console script `{name.strip()}`'


_NODE_COMMAND = re.compile(r'\bnode\s+([\w./-]+\.[cm]?js)\b')


def _package_json(text: str, manifest: str, index: PathIndex) -> Iterable[tuple[str, str]]:
    data = json.loads(text)
    binaries = data.get('bin', {})
    if isinstance(binaries, str):
        binaries = {data.get('name', 'bin'): binaries}
    for name, target in sorted(binaries.items()):
        found = _relative_target(index, manifest, str(target))
        if found:
            yield found, f'{manifest} bin `{name}`'
    start = data.get('scripts', {}).get('start', '')
    match = _NODE_COMMAND.search(str(start))
    if match:
        found = _relative_target(index, manifest, match.group(1))
        if found:
            yield found, f'{manifest} start script `{start}`'


def _cargo(text: str, manifest: str, index: PathIndex) -> Iterable[tuple[str, str]]:
    data = tomllib.loads(text)
    for binary in data.get('bin', []):
        name = binary.get('name', '')
        target = binary.get('path') or f'src/bin/{name}.rs'
        found = _relative_target(index, manifest, target)
        if found:
            yield found, f'{manifest} [[bin]] `{name}`'


_MANIFEST_READERS: dict[str, Callable[[str, str, PathIndex], Iterable[tuple[str, str]]]] = {
    'pyproject.toml': _pyproject,
    'setup.cfg': _setup_cfg,
    'package.json': _package_json,
    'Cargo.toml': _cargo,
}


def manifest_entries(repo: RepoModel, diagnostics: list[Diagnostic] | None = None
                     ) -> list[EntryPoint]:
    """Binaries and scripts declared in build manifests."""
    index = PathIndex(repo.paths)
    entries = []
    for manifest, text in repo.manifests:
        reader = _MANIFEST_READERS.get(posixpath.basename(manifest))
        if reader is None:
            continue
        try:
            for target, evidence in reader(text, manifest, index):
                entries.append(EntryPoint(target, EntryKind.MANIFEST_DECLARED, evidence))
        except (ValueError, ConfigParserError, AttributeError, TypeError) as error:
            if diagnostics is not None:
                diagnostics.append(Diagnostic(manifest, f'unreadable manifest: {error}'))
    return entries


def _nominated(repo: RepoModel, summaries: Sequence[FileSummary], gateway: Gateway
               ) -> list[EntryPoint]:
    files = '\n'.join(repo.paths)
    text = '\n\n'.join(f'### {summary.path}\n{summary.summary}' for summary in summaries)
    request = prompts.entries_request(repo.root_name, files, text, max_output_tokens=512)
    if not gateway.fits(request.system_prompt, request.user_content):
        logger.warning('skipping entry point nomination, the prompt exceeds the context limit')
        return []
    answer = gateway.complete(request).text
    entries = []
    for line in answer.splitlines():
        path = prompts.clean_path_line(line)
        if path in repo:
            entries.append(EntryPoint(path, EntryKind.LLM_NOMINATED,
                                      f'nominated by {gateway.backend_id}'))
    return entries


def find_entry_points(repo: RepoModel, graph: ReferenceGraph, gateway: Gateway | None = None,
                      summaries: Sequence[FileSummary] | None = None,
                      diagnostics: list[Diagnostic] | None = None) -> list[EntryPoint]:
    """Entry points by kind precedence, then path; one per file.

Deterministic detectors look for manifest declarations, language main constructs, server
bootstrap calls and command line parsers. With a gateway and summaries the backend may
nominate more files, each checked against the repository.

:param diagnostics: list
    receives a diagnostic when nothing is found"""
    found = manifest_entries(repo, diagnostics)
    for file in repo.files:
        evidence = _main_evidence(file, graph)
        if evidence:
            found.append(EntryPoint(file.path, EntryKind.MAIN_FUNCTION, evidence))
        match = _SERVER.search(file.content)
        if match:
            found.append(EntryPoint(file.path, EntryKind.SERVER_BOOTSTRAP,
                                    f'call `{match.group(0).rstrip("( ")}`'))
        match = _CLI.search(file.content)
        if match:
            found.append(EntryPoint(file.path, EntryKind.CLI_BINARY,
                                    f'command line parser `{match.group(0).rstrip("( ")}`'))
        elif file.content.startswith('#!'):
            found.append(EntryPoint(file.path, EntryKind.CLI_BINARY,
                                    f'shebang `{file.content.splitlines()[0]}`'))
    if gateway is not None and summaries:
        found.extend(_nominated(repo, summaries, gateway))

    best: dict[str, EntryPoint] = {}
    for entry in sorted(found, key=EntryPoint.sort_key):
        best.setdefault(entry.file, entry)
    entries = sorted(best.values(), key=EntryPoint.sort_key)
    if not entries:
        logger.warning('no entry point found in %s', repo.root_name)
        if diagnostics is not None:
            diagnostics.append(Diagnostic(repo.root_name, 'no entry point found'))
    return entries


# traces

_TRACE_KINDS = (RefKind.CALL, RefKind.IMPORT)


def trace_downstream(entry: EntryPoint, graph: ReferenceGraph, max_depth: int = 6) -> Trace:
    """Heaviest downstream path from the nodes of the entry file.

Paths follow outgoing Call and Import edges for at most `max_depth` hops and never revisit
a node. The path touching the most distinct files wins, then the shorter one, then the
lexicographically smaller sequence of node ids.

:raises: UnknownFileError if the entry file is not in the graph"""
    if entry.file not in graph.files:
        raise UnknownFileError(f'{entry.file} is not part of the reference graph')
    if max_depth < 1:
        raise ValueError('max_depth must be positive')

    calls = nx.DiGraph()
    calls.add_edges_from((edge.src, edge.dst) for edge in graph.edges if edge.kind in _TRACE_KINDS)

    def weight(path: tuple[str, ...]) -> tuple[int, int, tuple[str, ...]]:
        return -len({graph.node(node).file for node in path}), len(path), path

    best = {node.id: (node.id,) for node in graph.nodes_in(entry.file)}
    frontier = sorted(best)
    for _ in range(max_depth):
        improved: dict[str, tuple[str, ...]] = {}
        for node in frontier:
            path = best[node]
            for target in (sorted(calls.successors(node)) if node in calls else ()):
                if target in path:
                    continue
                candidate = path + (target,)
                current = improved.get(target, best.get(target))
                if current is None or weight(candidate) < weight(current):
                    improved[target] = candidate
        if not improved:
            break
        best.update(improved)
        frontier = sorted(improved)
    return Trace(entry, min(best.values(), key=weight))


# generation

def render_entries(traces: Sequence[Trace]) -> str:
    lines = []
    for trace in traces:
        entry = trace.entry
        lines.append(f'- `{entry.file}` ({entry.kind.value}): {entry.evidence}')
        lines.append(f'  - Trace: {trace.render()}')
    return '\n'.join(lines)


def replace_section(text: str, name: str, body: str) -> str:
    """Replace the body of the level two section `name`, appending it when missing."""
    lines = text.rstrip('\n').splitlines()
    start = next((number for number, line in enumerate(lines)
                  if (match := _HEADER.match(line)) and match.group(1) == name), None)
    if start is None:
        return '\n'.join(lines + ['', f'## {name}', body]).rstrip('\n') + '\n'
    end = next((number for number in range(start + 1, len(lines))
                if _HEADER.match(lines[number])), len(lines))
    tail = [''] + lines[end:] if end < len(lines) else []
    return '\n'.join(lines[:start + 1] + [body] + tail).rstrip('\n') + '\n'


def _summary_block(summary: FileSummary) -> str:
    related = f'\nRelated: {", ".join(summary.related_files)}' if summary.related_files else ''
    return f'### {summary.path}\n{summary.summary}{related}'


def generate_readme(summaries: Sequence[FileSummary], traces: Sequence[Trace],
                    signals: CrossRepoSignals | None, gateway: Gateway,
                    repo_name: str = 'repository', graph: ReferenceGraph | None = None,
                    max_output_tokens: int = 2048) -> ReadmeDoc:
    """Write the README from traces first, then summaries, then cross-repository context.

When the prompt exceeds the context limit, summaries of files with the lowest fan-in are
dropped first. The answer must contain the four required sections; one repair request is
made before giving up. The Entry Points section is always rewritten from `traces`.

:raises: PreconditionError on empty summaries, SectionValidationError"""
    if not summaries:
        raise PreconditionError('cannot write a README without file summaries')
    if signals is not None and signals.is_empty():
        signals = None
    signal_text = signals.render() if signals is not None else None
    entries_text = '\n'.join(f'- `{trace.entry.file}` ({trace.entry.kind.value}): '
                             f'{trace.entry.evidence}' for trace in traces)
    traces_text = '\n'.join(f'- `{trace.entry.file}`: {trace.render()}' for trace in traces)

    kept = list(summaries)
    fan_in = in_degree(graph) if graph is not None else {}
    eviction = sorted(kept, key=lambda summary: (fan_in.get(summary.path, 0), summary.path))

    def request_for(repair: str | None = None):
        text = '\n\n'.join(_summary_block(summary) for summary in kept)
        return prompts.readme_request(repo_name, entries_text, traces_text, text, signal_text,
                                      max_output_tokens, repair)

    request = request_for()
    evicted = 0
    while not gateway.fits(request.system_prompt, request.user_content) and len(kept) > 1:
        kept.remove(eviction[evicted])
        evicted += 1
        request = request_for()
    if evicted:
        logger.warning('dropped %d low fan-in summaries to fit the context limit', evicted)

    doc = ReadmeDoc.from_text(gateway.complete(request).text)
    if doc.missing():
        problem = f'missing sections: {", ".join(doc.missing())}'
        logger.warning('README %s, requesting a repair', problem)
        doc = ReadmeDoc.from_text(gateway.complete(request_for(problem)).text)
        if doc.missing():
            raise SectionValidationError(f'README still lacks {", ".join(doc.missing())} '
                                         'after one repair')
    text = replace_section(doc.text, 'Entry Points',
                           render_entries(traces) or 'No entry point was identified.')
    return ReadmeDoc.from_text(text)
