"""Partial architecture diagrams per group, merged into the complete diagram."""
from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
import logging
from typing import Mapping, Sequence

from archrecon.analysis.grouper import Group, GroupPlan
from archrecon.analysis.ref_index import ReferenceGraph, file_projection
from archrecon.diagram.mermaid import parse_mermaid_with_diagnostics
from archrecon.diagram.merge import merge_diagrams
from archrecon.diagram.model import ArchDiagram, PartialDiagram
from archrecon.llm import prompts
from archrecon.llm.gateway import Gateway
from archrecon.util.errors import DiagramParseError, MermaidSyntaxError, PreconditionError
from archrecon.util.utils import Diagnostic, Granularity
from .readme import ReadmeDoc
from .summarizer import FileSummary


logger = logging.getLogger(__name__)


def _functions(graph: ReferenceGraph, path: str) -> list[str]:
    return sorted({node.name for node in graph.nodes_in(path)
                   if node.granularity is Granularity.FUNCTION})


def group_dependencies(graph: ReferenceGraph, files: Sequence[str]) -> list[str]:
    """File projection edges with both ends in `files`, as `src -> dst` lines."""
    members = set(files)
    projection = file_projection(graph)
    return [f'{src} -> {dst}' for src in sorted(members & set(projection))
            for dst in sorted(projection[src] & members)]


def generate_partial(group: Group, summaries: Mapping[str, FileSummary], readme: ReadmeDoc,
                     gateway: Gateway, graph: ReferenceGraph, repo_name: str = 'repository',
                     max_output_tokens: int = 2048,
                     diagnostics: list[Diagnostic] | None = None) -> PartialDiagram:
    """Ask the backend for the diagram of one group.

:param group: Group
    non empty group of the plan
:param summaries: Mapping
    summaries by path, covering every file of the group
:param readme: ReadmeDoc
    global context
:param diagnostics: list
    receives the problems the Mermaid parser skipped

:returns: PartialDiagram

:raises: PreconditionError, DiagramParseError when the answer and its repair do not parse"""
    if not group.files:
        raise PreconditionError(f'group {group.index} has no files')
    missing = [path for path in group.files if path not in summaries]
    if missing:
        raise PreconditionError(f'group {group.index} lacks summaries for {", ".join(missing)}')

    files = '\n'.join(f'- {path}: {", ".join(_functions(graph, path))}'.rstrip(': ')
                      for path in group.files)
    dependencies = '\n'.join(group_dependencies(graph, group.files))
    kept = list(group.files)

    def request_for(repair: str | None = None):
        text = '\n\n'.join(f'### {path}\n{summaries[path].summary}' for path in kept)
        return prompts.diagram_request(repo_name, readme.text, files, text, dependencies,
                                       max_output_tokens, repair)

    request = request_for()
    while not gateway.fits(request.system_prompt, request.user_content) and kept:
        kept.pop()
        request = request_for()
    if len(kept) < len(group.files):
        logger.warning('group %d: %d summaries left out to fit the context limit',
                       group.index, len(group.files) - len(kept))

    answer = gateway.complete(request).text
    try:
        diagram, found = parse_mermaid_with_diagnostics(answer)
    except (MermaidSyntaxError, ValueError) as error:
        logger.warning('group %d: diagram did not parse (%s), requesting a repair',
                       group.index, error)
        answer = gateway.complete(request_for(str(error))).text
        try:
            diagram, found = parse_mermaid_with_diagnostics(answer)
        except (MermaidSyntaxError, ValueError) as second:
            raise DiagramParseError(f'group {group.index}: {second}') from second
    if diagnostics is not None:
        diagnostics.extend(Diagnostic(f'group {group.index} {item.source}', item.message)
                           for item in found)
    return PartialDiagram(group.index, diagram)


def generate_partials(plan: GroupPlan, summaries: Sequence[FileSummary], readme: ReadmeDoc,
                      gateway: Gateway, graph: ReferenceGraph, repo_name: str = 'repository',
                      max_output_tokens: int = 2048,
                      diagnostics: list[Diagnostic] | None = None) -> list[PartialDiagram]:
    """One partial diagram per group, requested concurrently, in group order."""
    by_path = {summary.path: summary for summary in summaries}
    collected: list[list[Diagnostic]] = [[] for _ in plan.groups]

    def one(position: int) -> PartialDiagram:
        return generate_partial(plan.groups[position], by_path, readme, gateway, graph,
                                repo_name, max_output_tokens, collected[position])

    with ThreadPoolExecutor(max_workers=gateway.concurrency) as pool:
        parts = list(pool.map(one, range(len(plan.groups))))
    if diagnostics is not None:
        for found in collected:
            diagnostics.extend(found)
    return parts


def build_architecture(plan: GroupPlan, summaries: Sequence[FileSummary], readme: ReadmeDoc,
                       gateway: Gateway, graph: ReferenceGraph, repo_name: str = 'repository',
                       max_output_tokens: int = 2048,
                       diagnostics: list[Diagnostic] | None = None) -> ArchDiagram:
    parts = generate_partials(plan, summaries, readme, gateway, graph, repo_name,
                              max_output_tokens, diagnostics)
    return merge_diagrams(parts)
