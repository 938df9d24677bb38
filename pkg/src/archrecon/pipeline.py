"""Stage orchestration with checkpoints under `<out>/.archrecon/`."""
from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Sequence

from archrecon.agents.architect import build_architecture
from archrecon.agents.readme import (
    CrossRepoSignals, ReadmeDoc, Trace, find_entry_points, generate_readme, trace_downstream,
)
from archrecon.agents.summarizer import (
    FileSummary, load_summaries, save_summaries, summarize_repo, summary_weights,
)
from archrecon.analysis.grouper import GroupPlan, plan_groups
from archrecon.analysis.ref_index import ReferenceGraph, build_reference_graph
from archrecon.analysis.repo_model import RepoModel, get_token_counter, scan_repo
from archrecon.diagram.mermaid import to_mermaid
from archrecon.diagram.model import ArchDiagram
from archrecon.llm.gateway import Gateway, HttpBackend
from archrecon.llm.mock import MockBackend
from archrecon.util.config import Settings
from archrecon.util.errors import PreconditionError, SchemaError
from archrecon.util.utils import (
    Diagnostic, atomic_write_text, dump_json, read_jsonl, write_jsonl,
)


logger = logging.getLogger(__name__)

STATE_DIR = '.archrecon'
README_NAME = 'README.generated.md'
DIAGRAM_NAME = 'architecture.mmd'
DIAGRAM_JSON_NAME = 'architecture.json'


class Stage(Enum):
    """Pipeline stages in execution order."""
    SCANNED = 'Scanned'
    INDEXED = 'Indexed'
    SUMMARIZED = 'Summarized'
    README_DONE = 'ReadmeDone'
    DIAGRAMS_DONE = 'DiagramsDone'

    @property
    def order(self) -> int:
        return list(Stage).index(self)


@dataclass
class PipelineState:
    stage: Stage | None = None
    config_hash: str = ''
    artifacts: dict[str, list[str]] = field(default_factory=dict)

    def advance(self, stage: Stage, artifacts: Sequence[str]) -> None:
        if self.stage is not None and stage.order <= self.stage.order:
            raise PreconditionError(f'stage {stage.value} does not follow {self.stage.value}')
        self.stage = stage
        self.artifacts[stage.value] = list(artifacts)

    def completed(self, stage: Stage) -> bool:
        return self.stage is not None and self.stage.order >= stage.order

    def to_dict(self) -> dict[str, Any]:
        return {'version': 1, 'stage': None if self.stage is None else self.stage.value,
                'config_hash': self.config_hash, 'artifacts': self.artifacts}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PipelineState:
        try:
            stage = None if data['stage'] is None else Stage(data['stage'])
            artifacts = {str(key): [str(path) for path in value]
                         for key, value in data.get('artifacts', {}).items()}
            return cls(stage, str(data['config_hash']), artifacts)
        except (KeyError, TypeError, ValueError, AttributeError) as error:
            raise SchemaError(f'invalid pipeline state: {error!r}') from error


class Workspace:
    """Artifact locations of one analysed repository."""
    def __init__(self, out_dir: Path | str):
        self.out_dir = Path(out_dir)
        self.state_dir = self.out_dir / STATE_DIR

    @property
    def state_path(self) -> Path:
        return self.state_dir / 'state.json'

    @property
    def repo_path(self) -> Path:
        return self.state_dir / 'repo.json'

    @property
    def graph_path(self) -> Path:
        return self.state_dir / 'graph.json'

    @property
    def summaries_path(self) -> Path:
        return self.state_dir / 'summaries.jsonl'

    @property
    def groups_path(self) -> Path:
        return self.state_dir / 'groups.json'

    @property
    def traces_path(self) -> Path:
        return self.state_dir / 'traces.json'

    @property
    def diagnostics_path(self) -> Path:
        return self.state_dir / 'diagnostics.jsonl'

    @property
    def cache_dir(self) -> Path:
        return self.state_dir / 'cache'

    @property
    def readme_path(self) -> Path:
        return self.out_dir / README_NAME

    @property
    def diagram_path(self) -> Path:
        return self.out_dir / DIAGRAM_NAME

    @property
    def diagram_json_path(self) -> Path:
        return self.out_dir / DIAGRAM_JSON_NAME

    def _load(self, path: Path, what: str) -> Any:
        try:
            with open(path, encoding='utf8') as handle:
                return json.load(handle)
        except FileNotFoundError as error:
            raise PreconditionError(f'no {what} at {path}; run the previous stage first') \
                    from error
        except (OSError, ValueError) as error:
            raise SchemaError(f'cannot read {what} {path}: {error}') from error

    def save(self, path: Path, data: dict[str, Any]) -> None:
        atomic_write_text(path, dump_json(data))

    def load_state(self) -> PipelineState:
        if not self.state_path.exists():
            return PipelineState()
        return PipelineState.from_dict(self._load(self.state_path, 'pipeline state'))

    def load_repo(self) -> RepoModel:
        return RepoModel.from_dict(self._load(self.repo_path, 'repository model'))

    def load_graph(self) -> ReferenceGraph:
        return ReferenceGraph.from_dict(self._load(self.graph_path, 'reference graph'))

    def load_summaries(self) -> list[FileSummary]:
        if not self.summaries_path.exists():
            raise PreconditionError(f'no summaries at {self.summaries_path}; run summarize first')
        return load_summaries(self.summaries_path)

    def load_plan(self) -> GroupPlan:
        return GroupPlan.from_dict(self._load(self.groups_path, 'group plan'))

    def load_traces(self) -> list[Trace]:
        data = self._load(self.traces_path, 'traces')
        try:
            return [Trace.from_dict(item) for item in data['traces']]
        except (KeyError, TypeError, ValueError) as error:
            raise SchemaError(f'invalid traces document: {error!r}') from error

    def load_readme(self) -> ReadmeDoc:
        try:
            return ReadmeDoc.from_text(self.readme_path.read_text(encoding='utf8'))
        except FileNotFoundError as error:
            raise PreconditionError(f'no README at {self.readme_path}; run readme first') \
                    from error

    def load_diagnostics(self) -> list[dict[str, str]]:
        if not self.diagnostics_path.exists():
            return []
        try:
            return read_jsonl(self.diagnostics_path)
        except (OSError, ValueError):
            logger.warning('discarding unreadable diagnostics %s', self.diagnostics_path)
            return []


def make_gateway(settings: Settings, mock: bool, cache_dir: Path | None) -> Gateway:
    backend = MockBackend() if mock else HttpBackend(settings.llm)
    return Gateway.from_config(settings.llm, backend, cache_dir,
                               get_token_counter(settings.scan.token_counter))


def run_fingerprint(settings: Settings, mock: bool, signals: CrossRepoSignals | None,
                    roots: Sequence[str] = (), emit_json: bool = False) -> str:
    """Hash of everything a resumed run must share with the checkpointed one."""
    payload = json.dumps({
        'settings': settings.fingerprint(),
        'backend': 'mock' if mock else f'http:{settings.llm.model}',
        'signals': None if signals is None or signals.is_empty() else signals.to_dict(),
        'roots': sorted(roots),
        'json': emit_json,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode('utf8')).hexdigest()


# single stages, shared by `run` and the subcommands

def stage_scan(workspace: Workspace, root: Path | str, settings: Settings) -> RepoModel:
    repo = scan_repo(root, settings.scan)
    workspace.save(workspace.repo_path, repo.to_dict())
    return repo


def stage_index(workspace: Workspace, repo: RepoModel, settings: Settings
                ) -> tuple[ReferenceGraph, list[Diagnostic]]:
    graph = build_reference_graph(repo, settings.scan.workers)
    workspace.save(workspace.graph_path, graph.to_dict())
    return graph, list(graph.diagnostics)


def stage_group(workspace: Workspace, repo: RepoModel, settings: Settings,
                summaries: Sequence[FileSummary] | None = None) -> GroupPlan:
    weights = None
    if summaries:
        weights = summary_weights(summaries, get_token_counter(settings.scan.token_counter))
    plan = plan_groups(repo, settings.grouping.max_tokens, settings.grouping.overlap_rate,
                       weights)
    workspace.save(workspace.groups_path, plan.to_dict())
    return plan


def stage_summarize(workspace: Workspace, repo: RepoModel, graph: ReferenceGraph,
                    gateway: Gateway, settings: Settings
                    ) -> tuple[list[FileSummary], list[Diagnostic]]:
    summaries = summarize_repo(repo, graph, gateway, settings.summary)
    save_summaries(workspace.summaries_path, summaries)
    known = set(graph.diagnostics)
    return summaries, [item for summary in summaries for item in summary.diagnostics
                       if item not in known]


def stage_readme(workspace: Workspace, repo: RepoModel, graph: ReferenceGraph,
                 summaries: Sequence[FileSummary], gateway: Gateway, settings: Settings,
                 signals: CrossRepoSignals | None, nominate: bool = False
                 ) -> tuple[ReadmeDoc, list[Trace], list[Diagnostic]]:
    diagnostics: list[Diagnostic] = []
    entries = find_entry_points(repo, graph, gateway if nominate else None, summaries,
                                diagnostics)
    traces = [trace_downstream(entry, graph, settings.readme.max_depth) for entry in entries]
    workspace.save(workspace.traces_path,
                   {'version': 1, 'traces': [trace.to_dict() for trace in traces]})
    readme = generate_readme(summaries, traces, signals, gateway, repo.root_name, graph,
                             settings.llm.max_output_tokens)
    atomic_write_text(workspace.readme_path, readme.text)
    return readme, traces, diagnostics


def stage_diagram(workspace: Workspace, repo: RepoModel, graph: ReferenceGraph,
                  summaries: Sequence[FileSummary], plan: GroupPlan, readme: ReadmeDoc,
                  gateway: Gateway, settings: Settings, emit_json: bool = False
                  ) -> tuple[ArchDiagram, list[Diagnostic]]:
    diagnostics: list[Diagnostic] = []
    diagram = build_architecture(plan, summaries, readme, gateway, graph, repo.root_name,
                                 settings.llm.max_output_tokens, diagnostics)
    atomic_write_text(workspace.diagram_path, to_mermaid(diagram))
    if emit_json:
        atomic_write_text(workspace.diagram_json_path, diagram.to_json())
    return diagram, diagnostics


@dataclass
class RunResult:
    repo_name: str
    out_dir: Path
    skipped: list[Stage] = field(default_factory=list)
    executed: list[Stage] = field(default_factory=list)
    diagnostics: int = 0


def _try_load(stage: Stage, loader):
    try:
        return loader()
    except (SchemaError, PreconditionError, ValueError, KeyError) as error:
        logger.warning('checkpoint of stage %s is unusable (%s), recomputing', stage.value, error)
        return None


def run_repository(root: Path | str, out_dir: Path | str, settings: Settings, mock: bool,
                   resume: bool = False, signals: CrossRepoSignals | None = None,
                   emit_json: bool = False, fingerprint: str | None = None) -> RunResult:
    """Run every stage for one repository, skipping checkpointed stages on resume."""
    workspace = Workspace(out_dir)
    fingerprint = fingerprint or run_fingerprint(settings, mock, signals,
                                                 (str(Path(root).resolve()),), emit_json)
    state = workspace.load_state() if resume else PipelineState()
    if state.config_hash != fingerprint:
        if resume and state.stage is not None:
            logger.warning('configuration changed since the checkpoint, starting over')
        state = PipelineState(config_hash=fingerprint)
    previous = {stage.value: [] for stage in Stage}
    for row in workspace.load_diagnostics() if resume else []:
        previous.setdefault(row.get('stage', ''), []).append(row)

    gateway = make_gateway(settings, mock, workspace.cache_dir)
    result = RunResult('', workspace.out_dir)
    rows: list[dict[str, str]] = []

    def done(stage: Stage, found: Sequence[Diagnostic], *artifacts: Path) -> None:
        state.advance(stage, [str(path.relative_to(workspace.out_dir)) for path in artifacts])
        rows.extend({'stage': stage.value, **item.to_dict()} for item in found)
        workspace.save(workspace.state_path, state.to_dict())
        write_jsonl(workspace.diagnostics_path, rows)
        result.executed.append(stage)

    def skip(stage: Stage) -> None:
        rows.extend(previous.get(stage.value, []))
        result.skipped.append(stage)

    repo = _try_load(Stage.SCANNED, workspace.load_repo) \
        if state.completed(Stage.SCANNED) else None
    if repo is None:
        state = PipelineState(config_hash=fingerprint)
        repo = stage_scan(workspace, root, settings)
        done(Stage.SCANNED, repo.diagnostics, workspace.repo_path)
    else:
        skip(Stage.SCANNED)
    result.repo_name = repo.root_name

    graph = _try_load(Stage.INDEXED, workspace.load_graph) \
        if state.completed(Stage.INDEXED) else None
    if graph is None:
        state.stage = Stage.SCANNED
        graph, found = stage_index(workspace, repo, settings)
        done(Stage.INDEXED, found, workspace.graph_path)
    else:
        skip(Stage.INDEXED)

    summaries = plan = None
    if state.completed(Stage.SUMMARIZED):
        summaries = _try_load(Stage.SUMMARIZED, workspace.load_summaries)
        plan = _try_load(Stage.SUMMARIZED, workspace.load_plan)
    if summaries is None or plan is None:
        state.stage = Stage.INDEXED
        summaries, found = stage_summarize(workspace, repo, graph, gateway, settings)
        plan = stage_group(workspace, repo, settings, summaries)
        done(Stage.SUMMARIZED, found, workspace.summaries_path, workspace.groups_path)
    else:
        skip(Stage.SUMMARIZED)

    readme = None
    if state.completed(Stage.README_DONE) and workspace.traces_path.exists():
        readme = _try_load(Stage.README_DONE, workspace.load_readme)
    if readme is None:
        state.stage = Stage.SUMMARIZED
        readme, _, found = stage_readme(workspace, repo, graph, summaries, gateway, settings,
                                        signals, nominate=True)
        done(Stage.README_DONE, found, workspace.readme_path, workspace.traces_path)
    else:
        skip(Stage.README_DONE)

    outputs = [workspace.diagram_path] + ([workspace.diagram_json_path] if emit_json else [])
    if state.completed(Stage.DIAGRAMS_DONE) and all(path.exists() for path in outputs):
        skip(Stage.DIAGRAMS_DONE)
    else:
        state.stage = Stage.README_DONE
        _, found = stage_diagram(workspace, repo, graph, summaries, plan, readme, gateway,
                                 settings, emit_json)
        done(Stage.DIAGRAMS_DONE, found, *outputs)

    if not result.executed:
        write_jsonl(workspace.diagnostics_path, rows)
    result.diagnostics = len(rows)
    logger.info('%s: executed %s, skipped %s', repo.root_name,
                [stage.value for stage in result.executed],
                [stage.value for stage in result.skipped])
    return result


def run_pipeline(roots: Sequence[Path | str], out_dir: Path | str, settings: Settings,
                 mock: bool = False, resume: bool = False,
                 signals: CrossRepoSignals | None = None, emit_json: bool = False
                 ) -> list[RunResult]:
    """Analyse each repository root. Several roots write to `<out>/<repository name>/`."""
    if not roots:
        raise PreconditionError('no repository given')
    out_dir = Path(out_dir)
    results = []
    for root in roots:
        target = out_dir if len(roots) == 1 else out_dir / Path(root).resolve().name
        fingerprint = run_fingerprint(settings, mock, signals, (str(Path(root).resolve()),),
                                      emit_json)
        results.append(run_repository(root, target, settings, mock, resume, signals,
                                      emit_json, fingerprint))
    return results
