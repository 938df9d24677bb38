"""Per-file summaries with reference graph context and related file identification."""
from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Any, Sequence

from archrecon.analysis.ref_index import ReferenceGraph, neighbors
from archrecon.analysis.repo_model import RepoModel, SourceFile, TokenCounter, token_estimate
from archrecon.llm import prompts
from archrecon.llm.gateway import Gateway
from archrecon.util.config import SummaryConfig
from archrecon.util.errors import (
    AuthError, BackendError, SchemaError, SummarizationError, UnknownFileError,
)
from archrecon.util.utils import Diagnostic, Granularity, read_jsonl, write_jsonl


logger = logging.getLogger(__name__)

TRUNCATION_MARKER = '\n... [{omitted} tokens omitted] ...\n'
HEAD_SHARE = 0.7
MAX_REFERENCE_LINES = 200


@dataclass(frozen=True)
class FileSummary:
    path: str
    summary: str
    related_files: tuple[str, ...] = ()
    exported_symbols: tuple[str, ...] = ()
    diagnostics: tuple[Diagnostic, ...] = field(default=(), compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {'path': self.path, 'summary': self.summary,
                'related_files': list(self.related_files),
                'exported_symbols': list(self.exported_symbols),
                'diagnostics': [diagnostic.to_dict() for diagnostic in self.diagnostics]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> FileSummary:
        try:
            return cls(str(data['path']), str(data['summary']), tuple(data['related_files']),
                       tuple(data.get('exported_symbols', ())),
                       tuple(Diagnostic.from_dict(item) for item in data.get('diagnostics', [])))
        except (KeyError, TypeError) as error:
            raise SchemaError(f'invalid summary record: {error}') from error


def truncate_content(content: str, allowance: int, counter: TokenCounter = token_estimate
                     ) -> str:
    """Keep the head (70%) and tail (30%) of `content` within `allowance` tokens, the elision
marker included."""
    total = counter(content)
    if total <= allowance:
        return content
    marker = TRUNCATION_MARKER.format(omitted=total - allowance)

    def clipped(keep: int) -> str:
        head = int(keep * HEAD_SHARE)
        tail = keep - head
        return content[:head] + marker + (content[-tail:] if tail else '')

    low, high = 0, int(len(content) * max(allowance - counter(marker), 0) / total)
    while low < high:
        middle = (low + high + 1) // 2
        if counter(clipped(middle)) <= allowance:
            low = middle
        else:
            high = middle - 1
    return clipped(low)


def clip_tokens(text: str, cap: int, counter: TokenCounter = token_estimate) -> str:
    """Longest word prefix of `text` within `cap` tokens."""
    if counter(text) <= cap:
        return text
    words = text.split()
    low, high = 0, len(words)
    while low < high:
        middle = (low + high + 1) // 2
        if counter(' '.join(words[:middle])) <= cap:
            low = middle
        else:
            high = middle - 1
    return ' '.join(words[:low])


def render_references(graph: ReferenceGraph, path: str) -> str:
    """Edges touching `path`, one per line, as `direction: src -> dst (Kind)`."""
    incoming, outgoing = graph.edges_of(path)
    lines = [f'out: {edge.src} -> {edge.dst} ({edge.kind.value})' for edge in outgoing]
    lines += [f'in: {edge.src} -> {edge.dst} ({edge.kind.value})' for edge in incoming]
    if len(lines) > MAX_REFERENCE_LINES:
        lines = lines[:MAX_REFERENCE_LINES] + [f'... {len(lines) - MAX_REFERENCE_LINES} more']
    return '\n'.join(lines)


def exported_symbols(graph: ReferenceGraph, path: str) -> tuple[str, ...]:
    return tuple(sorted({node.name for node in graph.nodes_in(path)
                         if node.granularity is not Granularity.FILE}))


def summarize_file(file: SourceFile, graph: ReferenceGraph, gateway: Gateway,
                   config: SummaryConfig | None = None, repo_paths: Sequence[str] | None = None
                   ) -> FileSummary:
    """Summarize one file, naming its related files first.

:param file: SourceFile
    the file to summarize
:param graph: ReferenceGraph
    graph containing the file
:param gateway: Gateway
    completion backend
:param config: SummaryConfig
    caps on summary size, related files and content size
:param repo_paths: Sequence[str]
    valid related file names, defaults to the files of the graph

:returns: FileSummary"""
    config = config or SummaryConfig()
    if file.path not in graph.files:
        raise UnknownFileError(f'{file.path} is not part of the reference graph')
    valid = set(repo_paths) if repo_paths is not None else set(graph.files)
    diagnostics = [diagnostic for diagnostic in graph.diagnostics
                   if diagnostic.source == file.path]
    if diagnostics:
        diagnostics.append(Diagnostic(file.path, 'summarized from raw content'))

    content = truncate_content(file.content, config.max_file_tokens, gateway.counter)
    if content is not file.content:
        diagnostics.append(Diagnostic(file.path, 'content truncated to fit the prompt'))
    symbols = exported_symbols(graph, file.path)
    request = prompts.summarize_request(
            file.path, file.language.value, symbols, render_references(graph, file.path),
            neighbors(graph, file.path, 1), content, config.summary_tokens,
            max_output_tokens=max(config.summary_tokens * 2, 256))
    response = gateway.complete(request)

    named, text, delimited = prompts.parse_summary_output(response.text)
    if not delimited:
        diagnostics.append(Diagnostic(file.path, 'answer lacks the related files delimiter'))
    related: list[str] = []
    for candidate in named:
        if candidate == file.path or candidate in related:
            continue
        if candidate not in valid:
            diagnostics.append(Diagnostic(file.path, f'dropped unknown related file {candidate}'))
            continue
        related.append(candidate)
    if len(related) > config.max_related:
        diagnostics.append(Diagnostic(file.path, f'kept {config.max_related} of '
                                                 f'{len(related)} related files'))
        related = related[:config.max_related]
    summary = clip_tokens(text, config.summary_tokens, gateway.counter)
    if not summary:
        raise SummarizationError(f'{file.path}: the backend returned an empty summary')
    return FileSummary(file.path, summary, tuple(related), symbols, tuple(diagnostics))


def summarize_repo(repo: RepoModel, graph: ReferenceGraph, gateway: Gateway,
                   config: SummaryConfig | None = None) -> list[FileSummary]:
    """Summarize every file in canonical order, up to the gateway's concurrency at once.

Individual failures become placeholder summaries with a diagnostic; more than
`config.failure_ratio` failing files raise SummarizationError."""
    config = config or SummaryConfig()
    paths = repo.paths

    def attempt(file: SourceFile) -> FileSummary | BackendError:
        try:
            return summarize_file(file, graph, gateway, config, paths)
        except AuthError:
            raise
        except BackendError as error:
            logger.warning('summarizing %s failed: %s', file.path, error)
            return error

    with ThreadPoolExecutor(max_workers=gateway.concurrency) as pool:
        outcomes = list(pool.map(attempt, repo.files))

    failures = sum(isinstance(outcome, BackendError) for outcome in outcomes)
    if failures > config.failure_ratio * len(outcomes):
        raise SummarizationError(f'{failures} of {len(outcomes)} files could not be summarized')
    summaries = []
    for file, outcome in zip(repo.files, outcomes):
        if isinstance(outcome, BackendError):
            outcome = FileSummary(file.path, f'Summary unavailable for `{file.path}`.', (),
                                  exported_symbols(graph, file.path),
                                  (Diagnostic(file.path, f'summary failed: {outcome}'),))
        summaries.append(outcome)
    logger.info('summarized %d files of %s (%d failed)', len(summaries), repo.root_name, failures)
    return summaries


def summary_weights(summaries: Sequence[FileSummary],
                    counter: TokenCounter = token_estimate) -> dict[str, int]:
    """Token count of each summary, the grouping weight of its file."""
    return {summary.path: counter(summary.summary) for summary in summaries}


def save_summaries(path: Path | str, summaries: Sequence[FileSummary]) -> None:
    write_jsonl(path, (summary.to_dict() for summary in summaries))


def load_summaries(path: Path | str) -> list[FileSummary]:
    try:
        rows = read_jsonl(path)
    except (OSError, ValueError) as error:
        raise SchemaError(f'cannot read summaries {path}: {error}') from error
    return [FileSummary.from_dict(row) for row in rows]
