#! /usr/bin/env python3
"""Entry point for CLI"""
from __future__ import annotations
from enum import Enum
import functools
import json
import logging
import os
from pathlib import Path
import sys
from typing import Any, Callable

import click

from archrecon import pipeline
from archrecon.agents.readme import CrossRepoSignals, load_signals
from archrecon.diagram.mermaid import parse_mermaid
from archrecon.diagram.model import ArchDiagram
from archrecon.evaluate.scoring import (
    diff_against_reference, load_scores, load_table, render_table, score,
)
from archrecon.evaluate.stats import independent_compare, paired_compare
from archrecon.util.config import Settings, load_settings
from archrecon.util.errors import ArchReconError, SchemaError
from archrecon.util.utils import atomic_write_text, dump_json


LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'
DEFAULT_OUT = 'archrecon-out'


class Color(Enum):
    """Usable colors by colorama/click."""
    RED = 'red'
    YELLOW = 'yellow'
    CYAN = 'cyan'
    GREEN = 'green'


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 \
        else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)
    logging.captureWarnings(True)


class App:
    """App container"""
    def __init__(self, config: str | None = None, verbosity: int = 0):
        self.config = config
        self.verbosity = verbosity
        try:
            self.width = min(80, os.get_terminal_size().columns)
        except OSError:
            self.width = 80

    def settings(self, max_tokens: int | None = None) -> Settings:
        overrides = {'grouping': {'max_tokens': max_tokens}}
        return load_settings(self.config, overrides=overrides)

    def signals(self, path: str | None, disabled: bool) -> CrossRepoSignals | None:
        if disabled or path is None:
            return None
        return load_signals(path)

    def gateway(self, settings: Settings, workspace: pipeline.Workspace, mock: bool):
        return pipeline.make_gateway(settings, mock, workspace.cache_dir)

    def success(self, message: str) -> None:
        click.echo(click.style(message, bold=True, fg=Color.GREEN.value))

    def note(self, message: str) -> None:
        click.echo(click.style(message, fg=Color.CYAN.value))

    def __repr__(self):
        return f'{self.__class__.__name__}(config={self.config!r}, width={self.width})'


def reports_errors(stage: str) -> Callable:
    """Turn library errors into a stage tagged message and the error's exit code."""
    def decorate(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            ctx = click.get_current_context()
            try:
                return func(*args, **kwargs)
            except (click.exceptions.Exit, click.ClickException, click.Abort):
                raise
            except ArchReconError as error:
                click.echo(click.style(f'[{stage}] {error.__class__.__name__}: {error}',
                                       fg='white', bg=Color.RED.value, bold=True), err=True)
                ctx.exit(error.exit_code)
            except Exception as error:
                logging.getLogger(__name__).debug('internal failure', exc_info=True)
                click.echo(click.style(f'[{stage}] internal error: {error!r}',
                                       fg='white', bg=Color.RED.value, bold=True), err=True)
                ctx.exit(ArchReconError.exit_code)
        return wrapper
    return decorate


def _signal_options(func: Callable) -> Callable:
    func = click.option('--no-signals', is_flag=True, default=False,
                        help='Ignore cross-repository signals (ablation run).')(func)
    return click.option('--signals', 'signals_path', type=click.Path(dir_okay=False),
                        default=None, help='Cross-repository signals JSON document.')(func)


def _out_option(func: Callable) -> Callable:
    return click.option('-o', '--out', type=click.Path(file_okay=False), default=DEFAULT_OUT,
                        show_default=True, help='Output directory.')(func)


def _mock_option(func: Callable) -> Callable:
    return click.option('--mock', is_flag=True, default=False,
                        help='Use the deterministic offline backend.')(func)


def _check_signal_flags(signals_path: str | None, no_signals: bool) -> None:
    if signals_path and no_signals:
        raise click.UsageError('--signals and --no-signals are mutually exclusive')


@click.group()
@click.option('-v', '--verbose', count=True, help='Repeat for more log output.')
@click.option('--config', type=click.Path(dir_okay=False), default=None,
              help='TOML or JSON config file (default: ./archrecon.toml if present).')
@click.version_option(package_name='archrecon')
@click.pass_context
def main(ctx: click.Context, verbose: int, config: str | None) -> None:
    """Recover the architecture of a code repository."""
    configure_logging(verbose)
    ctx.obj = App(config, verbose)


@main.command()
@click.argument('roots', nargs=-1, required=True, type=click.Path(file_okay=False))
@_out_option
@_mock_option
@click.option('--resume', is_flag=True, default=False,
              help='Skip stages checkpointed under the same configuration.')
@_signal_options
@click.option('--max-tokens', type=click.IntRange(min=1), default=None,
              help='Token budget per group.')
@click.option('--json', 'emit_json', is_flag=True, default=False,
              help='Also write the diagram as JSON.')
@click.pass_obj
@reports_errors('run')
def run(app: App, roots: tuple[str, ...], out: str, mock: bool, resume: bool,
        signals_path: str | None, no_signals: bool, max_tokens: int | None,
        emit_json: bool) -> None:
    """Run every stage on one or more repositories."""
    _check_signal_flags(signals_path, no_signals)
    settings = app.settings(max_tokens)
    signals = app.signals(signals_path, no_signals)
    results = pipeline.run_pipeline(list(roots), out, settings, mock, resume, signals, emit_json)
    for result in results:
        app.success(f'{result.repo_name}: {result.out_dir / pipeline.README_NAME}, '
                    f'{result.out_dir / pipeline.DIAGRAM_NAME}')
        app.note(f'  {len(result.executed)} stages run, {len(result.skipped)} resumed, '
                 f'{result.diagnostics} diagnostics')


@main.command()
@click.argument('root', type=click.Path(file_okay=False))
@_out_option
@click.pass_obj
@reports_errors('scan')
def scan(app: App, root: str, out: str) -> None:
    """Scan a repository into the repository model."""
    repo = pipeline.stage_scan(pipeline.Workspace(out), root, app.settings())
    app.success(f'{repo.root_name}: {len(repo)} files, {repo.total_tokens} tokens')
    for diagnostic in repo.diagnostics:
        click.echo(click.style(str(diagnostic), fg=Color.YELLOW.value), err=True)


@main.command()
@_out_option
@click.pass_obj
@reports_errors('index')
def index(app: App, out: str) -> None:
    """Build the reference graph of a scanned repository."""
    workspace = pipeline.Workspace(out)
    graph, diagnostics = pipeline.stage_index(workspace, workspace.load_repo(), app.settings())
    app.success(f'{len(graph.nodes)} nodes, {len(graph.edges)} edges, '
                f'{len(graph.unresolved)} unresolved references')
    for diagnostic in diagnostics:
        click.echo(click.style(str(diagnostic), fg=Color.YELLOW.value), err=True)


@main.command()
@_out_option
@click.option('--max-tokens', type=click.IntRange(min=1), default=None,
              help='Token budget per group.')
@click.pass_obj
@reports_errors('group')
def group(app: App, out: str, max_tokens: int | None) -> None:
    """Partition the repository into token budgeted groups."""
    workspace = pipeline.Workspace(out)
    summaries = workspace.load_summaries() if workspace.summaries_path.exists() else None
    plan = pipeline.stage_group(workspace, workspace.load_repo(), app.settings(max_tokens),
                                summaries)
    app.success(f'{plan.group_count} groups of at most {plan.budget} tokens '
                f'(T={plan.total_tokens})')


@main.command()
@_out_option
@_mock_option
@click.pass_obj
@reports_errors('summarize')
def summarize(app: App, out: str, mock: bool) -> None:
    """Summarize every file with reference graph context."""
    workspace = pipeline.Workspace(out)
    settings = app.settings()
    summaries, _ = pipeline.stage_summarize(workspace, workspace.load_repo(),
                                            workspace.load_graph(),
                                            app.gateway(settings, workspace, mock), settings)
    app.success(f'{len(summaries)} summaries written to {workspace.summaries_path}')


@main.command()
@_out_option
@_mock_option
@_signal_options
@click.pass_obj
@reports_errors('readme')
def readme(app: App, out: str, mock: bool, signals_path: str | None, no_signals: bool) -> None:
    """Generate the README from entry points, traces and summaries."""
    _check_signal_flags(signals_path, no_signals)
    workspace = pipeline.Workspace(out)
    settings = app.settings()
    _, traces, _ = pipeline.stage_readme(workspace, workspace.load_repo(),
                                         workspace.load_graph(), workspace.load_summaries(),
                                         app.gateway(settings, workspace, mock), settings,
                                         app.signals(signals_path, no_signals), nominate=True)
    app.success(f'{workspace.readme_path} written, {len(traces)} entry points')


@main.command()
@_out_option
@_mock_option
@click.option('--json', 'emit_json', is_flag=True, default=False,
              help='Also write the diagram as JSON.')
@click.pass_obj
@reports_errors('diagram')
def diagram(app: App, out: str, mock: bool, emit_json: bool) -> None:
    """Generate partial diagrams per group and merge them."""
    workspace = pipeline.Workspace(out)
    settings = app.settings()
    result, _ = pipeline.stage_diagram(
            workspace, workspace.load_repo(), workspace.load_graph(),
            workspace.load_summaries(), workspace.load_plan(), workspace.load_readme(),
            app.gateway(settings, workspace, mock), settings, emit_json)
    app.success(f'{workspace.diagram_path} written: {len(result.layers)} layers, '
                f'{len(result.nodes)} nodes, {len(result.edges)} edges')


def _read_diagram(path: str) -> ArchDiagram:
    text = Path(path).read_text(encoding='utf8')
    if path.endswith('.json'):
        try:
            return ArchDiagram.from_dict(json.loads(text))
        except ValueError as error:
            raise SchemaError(f'{path} is not valid JSON: {error}') from error
    return parse_mermaid(text)


@main.command('score')
@click.argument('source', type=click.Path(exists=True, dir_okay=False))
@click.option('--reference', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Reference diagram; SOURCE is then a generated diagram.')
@click.option('--restoration', type=int, default=None,
              help='Business restoration degree, 0 to 100 in steps of 10.')
@click.option('--output', type=click.Path(dir_okay=False), default=None,
              help='Write the report as JSON.')
@click.option('--json', 'as_json', is_flag=True, default=False, help='Print JSON.')
@click.pass_obj
@reports_errors('score')
def score_command(app: App, source: str, reference: str | None, restoration: int | None,
                  output: str | None, as_json: bool) -> None:
    """Score an annotation table, or a generated diagram against a reference."""
    if reference is not None:
        table = diff_against_reference(_read_diagram(source), _read_diagram(reference),
                                       Path(source).stem)
    else:
        table = load_table(source)
    report = score(table, restoration)
    if output:
        atomic_write_text(output, report.to_json())
    if as_json:
        click.echo(report.to_json(), nl=False)
    else:
        click.echo(click.style(f'{report.repo_id}', bold=True))
        click.echo(render_table(report))


@main.command()
@click.argument('scores_a', type=click.Path(exists=True, dir_okay=False))
@click.argument('scores_b', type=click.Path(exists=True, dir_okay=False))
@click.option('--independent', is_flag=True, default=False,
              help="Welch's test for unpaired samples.")
@click.option('--output', type=click.Path(dir_okay=False), default=None,
              help='Write the statistics as JSON.')
@click.pass_obj
@reports_errors('compare')
def compare(app: App, scores_a: str, scores_b: str, independent: bool,
            output: str | None) -> None:
    """Compare two score files with a paired t-test."""
    a, b = load_scores(scores_a), load_scores(scores_b)
    stats = independent_compare(a, b) if independent else paired_compare(a, b)
    text = dump_json(stats.to_dict())
    if output:
        atomic_write_text(output, text)
    click.echo(text, nl=False)


if __name__ == '__main__':
    main()
