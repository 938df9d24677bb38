"""Reference graphs at file, class and function granularity.

Extraction runs per file in parallel. Name resolution is a single threaded pass over the
immutable per-file results: same file first, then imported files, then a repository wide
unique match. Ambiguous or unknown names are kept in `unresolved`."""
from __future__ import annotations
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
import json
import logging
import posixpath
from typing import Any, Iterable

import networkx as nx

from archrecon.util.errors import SchemaError, UnknownFileError
from archrecon.util.utils import Diagnostic, Granularity, Language, RefKind
from .extractors import FileSymbols, ImportRef, extract_symbols
from .repo_model import RepoModel


logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class RefNode:
    id: str
    granularity: Granularity = field(compare=False)
    name: str = field(compare=False)
    file: str = field(compare=False)

    def to_dict(self) -> dict[str, str]:
        return {'id': self.id, 'granularity': self.granularity.value, 'name': self.name,
                'file': self.file}


@dataclass(frozen=True)
class RefEdge:
    src: str
    dst: str
    kind: RefKind

    def sort_key(self) -> tuple[str, str, str]:
        return self.src, self.dst, self.kind.value

    def to_dict(self) -> dict[str, str]:
        return {'src': self.src, 'dst': self.dst, 'kind': self.kind.value}


@dataclass(frozen=True)
class ReferenceGraph:
    nodes: frozenset[RefNode]
    edges: frozenset[RefEdge]
    unresolved: frozenset[tuple[str, str]] = frozenset()
    diagnostics: tuple[Diagnostic, ...] = ()

    def __post_init__(self):
        ids = {node.id for node in self.nodes}
        if len(ids) != len(self.nodes):
            raise ValueError('node ids must be unique')
        for edge in self.edges:
            if edge.src not in ids or edge.dst not in ids:
                raise ValueError(f'edge {edge.src} -> {edge.dst} has an unknown endpoint')

    @cached_property
    def node_index(self) -> dict[str, RefNode]:
        return {node.id: node for node in self.nodes}

    @cached_property
    def files(self) -> frozenset[str]:
        return frozenset(node.id for node in self.nodes if node.granularity is Granularity.FILE)

    @cached_property
    def file_graph(self) -> nx.DiGraph:
        return projection_graph(self)

    @cached_property
    def linked_files(self) -> nx.Graph:
        """Undirected file graph weighted by the edges between each pair of files."""
        linked = nx.Graph()
        linked.add_nodes_from(sorted(self.files))
        linked.add_weighted_edges_from((a, b, count)
                                       for (a, b), count in edge_weights(self).items())
        return linked

    @cached_property
    def outgoing(self) -> dict[str, list[RefEdge]]:
        result: dict[str, list[RefEdge]] = defaultdict(list)
        for edge in sorted(self.edges, key=RefEdge.sort_key):
            result[edge.src].append(edge)
        return dict(result)

    @cached_property
    def incoming(self) -> dict[str, list[RefEdge]]:
        result: dict[str, list[RefEdge]] = defaultdict(list)
        for edge in sorted(self.edges, key=RefEdge.sort_key):
            result[edge.dst].append(edge)
        return dict(result)

    def node(self, node_id: str) -> RefNode:
        return self.node_index[node_id]

    def nodes_in(self, path: str) -> list[RefNode]:
        """Nodes declared in `path`, the file node first."""
        return sorted((node for node in self.nodes if node.file == path),
                      key=lambda node: (node.granularity is not Granularity.FILE, node.id))

    def edges_of(self, path: str) -> tuple[list[RefEdge], list[RefEdge]]:
        """Incoming and outgoing edges touching any node of `path` across file boundaries
and within it."""
        ids = {node.id for node in self.nodes_in(path)}
        outgoing = sorted((edge for edge in self.edges if edge.src in ids), key=RefEdge.sort_key)
        incoming = sorted((edge for edge in self.edges if edge.dst in ids and edge.src not in ids),
                          key=RefEdge.sort_key)
        return incoming, outgoing

    def to_dict(self) -> dict[str, Any]:
        return {
            'version': 1,
            'nodes': [node.to_dict() for node in sorted(self.nodes)],
            'edges': [edge.to_dict() for edge in sorted(self.edges, key=RefEdge.sort_key)],
            'unresolved': [list(pair) for pair in sorted(self.unresolved)],
            'diagnostics': [diagnostic.to_dict() for diagnostic in self.diagnostics],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n'

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ReferenceGraph:
        try:
            nodes = frozenset(RefNode(item['id'], Granularity(item['granularity']),
                                      item['name'], item['file'])
                              for item in data['nodes'])
            edges = frozenset(RefEdge(item['src'], item['dst'], RefKind(item['kind']))
                              for item in data['edges'])
            unresolved = frozenset((str(src), str(name))
                                   for src, name in data.get('unresolved', []))
            diagnostics = tuple(Diagnostic.from_dict(item) for item in data.get('diagnostics', []))
            return cls(nodes, edges, unresolved, diagnostics)
        except (KeyError, TypeError, ValueError) as error:
            raise SchemaError(f'invalid reference graph document: {error}') from error

    def __repr__(self):
        return f'{self.__class__.__name__}(nodes={len(self.nodes)}, edges={len(self.edges)}, ' \
               f'unresolved={len(self.unresolved)})'


class PathIndex:
    """Lookups of repository paths by exact value, by path suffix and by directory."""
    def __init__(self, paths: Iterable[str]):
        self.paths = set(paths)
        self.by_suffix: dict[str, list[str]] = defaultdict(list)
        self.by_dir: dict[str, list[str]] = defaultdict(list)
        for path in sorted(self.paths):
            parts = path.split('/')
            for start in range(len(parts)):
                self.by_suffix['/'.join(parts[start:])].append(path)
            self.by_dir[posixpath.dirname(path)].append(path)
        self.dirs_by_suffix: dict[str, list[str]] = defaultdict(list)
        for directory in sorted(self.by_dir):
            if not directory:
                continue
            parts = directory.split('/')
            for start in range(len(parts)):
                self.dirs_by_suffix['/'.join(parts[start:])].append(directory)

    def pick(self, candidate: str, importer: str) -> str | None:
        """Resolve a relative candidate path: exact match first, then the unique suffix match
closest to the importer; ties are unresolved."""
        if candidate in self.paths:
            return candidate
        matches = self.by_suffix.get(candidate, [])
        if len(matches) <= 1:
            return matches[0] if matches else None
        closeness = [(_shared_prefix(match, importer), match) for match in matches]
        best = max(score for score, _ in closeness)
        winners = [match for score, match in closeness if score == best]
        return winners[0] if len(winners) == 1 else None


def _shared_prefix(a: str, b: str) -> int:
    """Number of leading directory segments `a` and `b` have in common."""
    count = 0
    for left, right in zip(a.split("/")[:-1], b.split("/")[:-1]):
        if left != right:
            break
        count += 1
    return count


_JS_SUFFIXES = ('', '.ts', '.tsx', '.js', '.jsx', '.mjs', '.cjs', '/index.ts', '/index.tsx',
                '/index.js', '/index.jsx')
_RUST_EXTERNAL = {'std', 'core', 'alloc'}


class ImportResolver:
    """Map raw imports to repository files, one strategy per language."""
    def __init__(self, index: PathIndex):
        self.index = index

    def resolve(self, importer: str, language: Language, ref: ImportRef) -> list[str]:
        method = {
            Language.PYTHON: self._python,
            Language.JAVA: self._java,
            Language.GO: self._go,
            Language.C: self._c,
            Language.CPP: self._c,
            Language.JAVASCRIPT: self._javascript,
            Language.TYPESCRIPT: self._javascript,
            Language.RUST: self._rust,
        }.get(language)
        if method is None:
            return []
        return [path for path in dict.fromkeys(method(importer, ref)) if path != importer]

    def _python_module(self, importer: str, module: str, level: int) -> str | None:
        relative = module.replace('.', '/')
        if level:
            base = posixpath.dirname(importer)
            for _ in range(level - 1):
                base = posixpath.dirname(base)
            prefix = posixpath.join(base, relative) if relative else base
            for candidate in (f'{prefix}.py', f'{prefix}/__init__.py'):
                if candidate.lstrip('/') in self.index.paths:
                    return candidate.lstrip('/')
            return None
        if not relative:
            return None
        for candidate in (f'{relative}.py', f'{relative}/__init__.py'):
            found = self.index.pick(candidate, importer)
            if found:
                return found
        return None

    def _python(self, importer: str, ref: ImportRef) -> list[str]:
        found = []
        for name in ref.names:
            if name == '*':
                continue
            submodule = f'{ref.target}.{name}' if ref.target else name
            path = self._python_module(importer, submodule, ref.level)
            if path:
                found.append(path)
        if len(found) < len([name for name in ref.names if name != '*']) or not ref.names:
            path = self._python_module(importer, ref.target, ref.level)
            if path:
                found.append(path)
        return found

    def _java(self, importer: str, ref: ImportRef) -> list[str]:
        parts = ref.target.split('.')
        if parts[-1] == '*':
            directory = '/'.join(parts[:-1])
            found = []
            for match in self.index.dirs_by_suffix.get(directory, []):
                found.extend(path for path in self.index.by_dir[match] if path.endswith('.java'))
            return found
        while len(parts) > 1:
            path = self.index.pick('/'.join(parts) + '.java', importer)
            if path:
                return [path]
            parts = parts[:-1]
        return []

    def _go(self, importer: str, ref: ImportRef) -> list[str]:
        parts = ref.target.split('/')
        for start in range(len(parts)):
            directory = '/'.join(parts[start:])
            if directory in self.index.by_dir:
                return [path for path in self.index.by_dir[directory] if path.endswith('.go')]
        return []

    def _c(self, importer: str, ref: ImportRef) -> list[str]:
        target = ref.target
        if target.startswith('"'):
            target = target.strip('"')
            local = posixpath.normpath(posixpath.join(posixpath.dirname(importer), target))
            if local in self.index.paths:
                return [local]
        else:
            target = target.strip('<>')
        path = self.index.pick(target, importer)
        return [path] if path else []

    def _javascript(self, importer: str, ref: ImportRef) -> list[str]:
        if not ref.target.startswith('.'):
            return []
        base = posixpath.normpath(posixpath.join(posixpath.dirname(importer), ref.target))
        stems = [base]
        if base.endswith('.js'):
            stems.append(base[:-3])
        for stem in stems:
            for suffix in _JS_SUFFIXES:
                if f'{stem}{suffix}' in self.index.paths:
                    return [f'{stem}{suffix}']
        return []

    def _rust(self, importer: str, ref: ImportRef) -> list[str]:
        directory = posixpath.dirname(importer)
        if ref.target.startswith('mod:'):
            name = ref.target[4:]
            stem = posixpath.splitext(posixpath.basename(importer))[0]
            base = directory if stem in ('mod', 'lib', 'main') else posixpath.join(directory, stem)
            for candidate in (f'{base}/{name}.rs', f'{base}/{name}/mod.rs'):
                candidate = candidate.lstrip('/')
                if candidate in self.index.paths:
                    return [candidate]
            return []
        segments = [segment for segment in ref.target.split('::') if segment]
        if not segments or segments[0] in _RUST_EXTERNAL:
            return []
        if segments[0] in ('crate', 'self', 'super'):
            segments = segments[1:]
        found = []
        for name in ref.names:
            if name in ('self', '*'):
                continue
            path = self._rust_module(segments + [name], importer)
            if path:
                found.append(path)
        if not found:
            path = self._rust_module(segments, importer)
            if path:
                found.append(path)
        return found

    def _rust_module(self, segments: list[str], importer: str) -> str | None:
        while segments:
            joined = '/'.join(segments)
            for candidate in (f'{joined}.rs', f'{joined}/mod.rs'):
                path = self.index.pick(candidate, importer)
                if path:
                    return path
            segments = segments[:-1]
        return None


def _node_ids(symbols: FileSymbols) -> tuple[list[RefNode], list[Diagnostic]]:
    path = symbols.path
    nodes = {path: RefNode(path, Granularity.FILE, posixpath.basename(path), path)}
    diagnostics = []
    for cls in symbols.classes:
        node_id = f'{path}::{cls.name}'
        nodes.setdefault(node_id, RefNode(node_id, Granularity.CLASS, cls.name, path))
    for func in symbols.functions:
        node_id = f'{path}::{func.owner}::{func.name}' if func.owner else f'{path}::{func.name}'
        existing = nodes.get(node_id)
        if existing is not None and existing.granularity is not Granularity.FUNCTION:
            diagnostics.append(Diagnostic(path, f'function {func.name} shadows a type of the '
                                                'same name and is skipped'))
            continue
        nodes.setdefault(node_id, RefNode(node_id, Granularity.FUNCTION, func.name, path))
    return list(nodes.values()), diagnostics


def _function_id(path: str, owner: str | None, name: str) -> str:
    return f'{path}::{owner}::{name}' if owner else f'{path}::{name}'


class _SymbolTable:
    """Declared names per file and repository wide, as node ids."""
    def __init__(self):
        self.by_file: dict[str, dict[str, set[str]]] = defaultdict(lambda: defaultdict(set))
        self.repo_wide: dict[str, set[str]] = defaultdict(set)
        self.classes: set[str] = set()

    def add(self, path: str, name: str, node_id: str, is_class: bool) -> None:
        self.by_file[path][name].add(node_id)
        self.repo_wide[name].add(node_id)
        if is_class:
            self.classes.add(node_id)

    def resolve(self, name: str, path: str, imported: Iterable[str],
                classes_only: bool = False) -> str | None:
        """Bind `name` seen in `path`; `None` when unknown or ambiguous."""
        def narrow(candidates: set[str]) -> set[str]:
            return candidates & self.classes if classes_only else candidates

        local = narrow(self.by_file.get(path, {}).get(name, set()))
        if local:
            return next(iter(local)) if len(local) == 1 else None
        via_imports: set[str] = set()
        for other in imported:
            via_imports |= narrow(self.by_file.get(other, {}).get(name, set()))
        if via_imports:
            return next(iter(via_imports)) if len(via_imports) == 1 else None
        anywhere = narrow(self.repo_wide.get(name, set()))
        return next(iter(anywhere)) if len(anywhere) == 1 else None


def extract_all(repo: RepoModel, workers: int = 8) -> list[FileSymbols]:
    """Parse every file of the repository, in canonical order."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda file: extract_symbols(file.path, file.language, file.content),
                             repo.files))


def build_reference_graph(repo: RepoModel, workers: int = 8) -> ReferenceGraph:
    """Build the three granularity reference graph of a repository.

:param repo: RepoModel
    non empty repository model
:param workers: int
    threads used for per-file parsing

:returns: ReferenceGraph"""
    all_symbols = extract_all(repo, workers)
    nodes: list[RefNode] = []
    diagnostics: list[Diagnostic] = []
    table = _SymbolTable()
    for symbols in all_symbols:
        diagnostics.extend(symbols.diagnostics)
        file_nodes, shadowed = _node_ids(symbols)
        diagnostics.extend(shadowed)
        nodes.extend(file_nodes)
        for cls in symbols.classes:
            table.add(symbols.path, cls.name, f'{symbols.path}::{cls.name}', True)
        for func in symbols.functions:
            if func.is_constructor:
                continue
            node_id = _function_id(symbols.path, func.owner, func.name)
            if node_id in table.classes:
                continue
            table.add(symbols.path, func.name, node_id, False)

    resolver = ImportResolver(PathIndex(repo.paths))
    edges: set[RefEdge] = set()
    unresolved: set[tuple[str, str]] = set()
    imported: dict[str, set[str]] = {}
    for symbols in all_symbols:
        targets: set[str] = set()
        for ref in symbols.imports:
            found = resolver.resolve(symbols.path, symbols.language, ref)
            if not found:
                unresolved.add((symbols.path, ref.target or '.' * ref.level))
            targets.update(found)
        imported[symbols.path] = targets
        edges.update(RefEdge(symbols.path, target, RefKind.IMPORT) for target in targets)

    for symbols in all_symbols:
        path = symbols.path
        scope = sorted(imported[path])
        callers: list[tuple[str, list[str]]] = [
                (f'{path}::{cls.name}', cls.calls) for cls in symbols.classes]
        callers += [(_function_id(path, func.owner, func.name), func.calls)
                    for func in symbols.functions]
        for src, calls in callers:
            for callee in sorted(set(calls)):
                dst = table.resolve(callee, path, scope)
                if dst is None:
                    unresolved.add((src, callee))
                else:
                    edges.add(RefEdge(src, dst, RefKind.CALL))
        bases = [(f'{path}::{cls.name}', base) for cls in symbols.classes for base in cls.bases]
        for type_name, trait in symbols.implementations:
            implementing = table.resolve(type_name, path, scope, classes_only=True)
            if implementing is None:
                unresolved.add((path, type_name))
            else:
                bases.append((implementing, trait))
        for src, base in bases:
            dst = table.resolve(base, path, scope, classes_only=True)
            if dst is None or dst == src:
                unresolved.add((src, base))
            else:
                edges.add(RefEdge(src, dst, RefKind.INHERITANCE))

    node_ids = {node.id for node in nodes}
    kept = frozenset(edge for edge in edges if edge.src in node_ids and edge.dst in node_ids)
    graph = ReferenceGraph(frozenset(nodes), kept, frozenset(unresolved), tuple(diagnostics))
    logger.info('reference graph for %s: %r', repo.root_name, graph)
    return graph


def projection_graph(graph: ReferenceGraph) -> nx.DiGraph:
    """Every file as a node, one edge per linked file pair, weighted by the number of fine
grained edges it collapses. Self loops are dropped."""
    projected = nx.DiGraph()
    projected.add_nodes_from(sorted(graph.files))
    for edge in graph.edges:
        src = graph.node(edge.src).file
        dst = graph.node(edge.dst).file
        if src == dst:
            continue
        if projected.has_edge(src, dst):
            projected[src][dst]['weight'] += 1
        else:
            projected.add_edge(src, dst, weight=1)
    return projected


def file_projection(graph: ReferenceGraph) -> dict[str, set[str]]:
    """Collapse all edges to file granularity, without self loops."""
    projected = graph.file_graph
    return {src: set(projected.successors(src)) for src in projected
            if projected.out_degree(src)}


def edge_weights(graph: ReferenceGraph) -> Counter[tuple[str, str]]:
    """Number of fine grained edges between each unordered pair of distinct files."""
    weights: Counter[tuple[str, str]] = Counter()
    for src, dst, count in graph.file_graph.edges(data='weight'):
        weights[(min(src, dst), max(src, dst))] += count
    return weights


def neighbors(graph: ReferenceGraph, file: str, depth: int = 1) -> list[str]:
    """Files within `depth` undirected hops of `file` in the file projection.

Ordered by hop count, then by the number of edges linking the file to the previous hop
(descending), then by path.

:raises: UnknownFileError if `file` is not a file node of the graph."""
    if file not in graph.files:
        raise UnknownFileError(f'{file} is not part of the reference graph')
    if depth < 1:
        raise ValueError('depth must be positive')
    linked = graph.linked_files
    hops: dict[int, list[str]] = defaultdict(list)
    for path, hop in nx.single_source_shortest_path_length(linked, file, cutoff=depth).items():
        hops[hop].append(path)

    ordered: list[str] = []
    for hop in range(1, depth + 1):
        previous = set(hops[hop - 1])
        links = {path: sum(linked[path][other]['weight'] for other in linked[path]
                           if other in previous)
                 for path in hops[hop]}
        ordered.extend(sorted(links, key=lambda path: (-links[path], path)))
    return ordered


def in_degree(graph: ReferenceGraph) -> Counter[str]:
    """File projection in-degree of every file."""
    projected = graph.file_graph
    return Counter({path: projected.in_degree(path) for path in projected})

