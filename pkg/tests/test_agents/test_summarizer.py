import pytest
from archrecon.agents.summarizer import (
    FileSummary, clip_tokens, exported_symbols, load_summaries, render_references,
    save_summaries, summarize_file, summarize_repo, summary_weights, truncate_content,
)
from archrecon.analysis.ref_index import build_reference_graph
from archrecon.analysis.repo_model import scan_repo, token_estimate
from archrecon.llm import prompts
from archrecon.llm.gateway import Gateway
from archrecon.llm.mock import MockBackend
from archrecon.util.config import SummaryConfig
from archrecon.util.errors import (
    AuthError, BackendUnavailableError, SchemaError, SummarizationError, UnknownFileError,
)
from conftest import FIXTURES, repo_of


class AnsweringBackend:
    backend_id = 'answering'

    def __init__(self, answer):
        self.answer = answer

    def send(self, request):
        return self.answer


class FailingBackend(MockBackend):
    """Mock answers, except for the listed files."""
    backend_id = 'failing'

    def __init__(self, failing, error=BackendUnavailableError):
        self.failing = set(failing)
        self.error = error

    def send(self, request):
        sections = prompts.split_sections(request.user_content, prompts.SUMMARIZE_SECTIONS)
        if sections['File'].strip() in self.failing:
            raise self.error('refused')
        return super().send(request)


def offline(backend, **kwargs):
    return Gateway(backend, sleep=lambda _: None, **kwargs)


@pytest.fixture(scope='module')
def mini():
    repo = scan_repo(FIXTURES / 'mini')
    return repo, build_reference_graph(repo)


def test_mini_summaries(mini, mock_gateway):
    repo, graph = mini
    summaries = summarize_repo(repo, graph, mock_gateway)
    assert [summary.path for summary in summaries] == repo.paths
    by_path = {summary.path: summary for summary in summaries}
    assert by_path['b.py'].summary == \
        '`b.py`: Command line entry of the mini application. Exports: main.'
    assert by_path['b.py'].related_files == ('a/n.py',)
    assert by_path['a/m.py'].exported_symbols == ('load', 'save')
    assert set(by_path['a/n.py'].related_files) == {'a/m.py', 'b.py'}


def test_pair_summary(pair_repo, pair_graph, mock_gateway):
    summary = summarize_file(pair_repo.get('b.py'), pair_graph, mock_gateway)
    assert summary == FileSummary('b.py', '`b.py`: No leading comment. Exports: f.', ('a.py',),
                                  ('f',))
    assert summary.diagnostics == ()


def test_references(pair_graph):
    assert render_references(pair_graph, 'b.py').splitlines() == [
        'out: b.py -> a.py (Import)', 'out: b.py::f -> a.py::g (Call)']
    assert render_references(pair_graph, 'a.py').splitlines() == [
        'in: b.py -> a.py (Import)', 'in: b.py::f -> a.py::g (Call)']
    assert exported_symbols(pair_graph, 'a.py') == ('g',)


def test_related_files_are_checked(pair_repo, pair_graph):
    gateway = offline(AnsweringBackend('ghost.py\n- b.py\n`a.py`\na.py\n@@SUMMARY@@\nText.'))
    summary = summarize_file(pair_repo.get('b.py'), pair_graph, gateway)
    assert summary.related_files == ('a.py',)
    assert summary.summary == 'Text.'
    assert [item.message for item in summary.diagnostics] == ['dropped unknown related file '
                                                              'ghost.py']


def test_related_files_are_capped():
    repo = repo_of({'a.py': 'x = 1\n', 'b.py': 'y = 2\n', 'c.py': 'z = 3\n'})
    graph = build_reference_graph(repo)
    gateway = offline(AnsweringBackend('b.py\nc.py\n@@SUMMARY@@\nText.'))
    summary = summarize_file(repo.get('a.py'), graph, gateway, SummaryConfig(max_related=1))
    assert summary.related_files == ('b.py',)
    assert any('kept 1 of 2' in item.message for item in summary.diagnostics)


def test_answer_without_delimiter(pair_repo, pair_graph):
    gateway = offline(AnsweringBackend('Only a summary.'))
    summary = summarize_file(pair_repo.get('a.py'), pair_graph, gateway)
    assert summary.summary == 'Only a summary.'
    assert summary.related_files == ()
    assert any('delimiter' in item.message for item in summary.diagnostics)


def test_empty_summary(pair_repo, pair_graph):
    gateway = offline(AnsweringBackend('a.py\n@@SUMMARY@@\n'))
    with pytest.raises(SummarizationError):
        summarize_file(pair_repo.get('b.py'), pair_graph, gateway)


def test_summary_is_clipped(pair_repo, pair_graph):
    gateway = offline(AnsweringBackend('@@SUMMARY@@\n' + 'word ' * 500))
    summary = summarize_file(pair_repo.get('a.py'), pair_graph, gateway,
                             SummaryConfig(summary_tokens=20))
    assert len(summary.summary.encode()) <= 80


def test_unknown_file(pair_graph, mock_gateway):
    other = repo_of({'c.py': 'x = 1\n'})
    with pytest.raises(UnknownFileError):
        summarize_file(other.get('c.py'), pair_graph, mock_gateway)


def test_large_files_are_truncated(mock_gateway):
    repo = repo_of({'big.py': '# Big module.\n' + 'x = 1\n' * 2000})
    graph = build_reference_graph(repo)
    summary = summarize_file(repo.get('big.py'), graph, mock_gateway,
                             SummaryConfig(max_file_tokens=100))
    assert summary.summary.startswith('`big.py`: Big module.')
    assert any('truncated' in item.message for item in summary.diagnostics)


def test_unparsed_files_are_summarized_from_content(mock_gateway):
    repo = repo_of({'conf.yaml': '# Service settings.\nport: 80\n'})
    graph = build_reference_graph(repo)
    summary = summarize_file(repo.get('conf.yaml'), graph, mock_gateway)
    assert summary.summary == '`conf.yaml`: Service settings. Exports: none.'
    assert any('raw content' in item.message for item in summary.diagnostics)


def test_truncate_content():
    text = 'x' * 4000
    assert truncate_content(text, 2000) == text
    clipped = truncate_content(text, 100)
    head, marker, tail = clipped.partition('\n... [900 tokens omitted] ...\n')
    assert marker
    assert (len(head), len(tail)) == (257, 111)
    assert token_estimate(clipped) <= 100


@pytest.mark.parametrize('text,allowance', [
    ('é' * 4000, 100), ('ab\n' * 900, 37), ('y' * 50, 12),
])
def test_truncated_content_fits_the_allowance(text, allowance):
    clipped = truncate_content(text, allowance)
    assert 'tokens omitted' in clipped
    assert token_estimate(clipped) <= allowance


@pytest.mark.parametrize('text,cap,expected', [
    ('one two three four', 2, 'one two'),
    ('one two three four', 100, 'one two three four'),
    ('enormous', 1, ''),
])
def test_clip_tokens(text, cap, expected):
    assert clip_tokens(text, cap) == expected


def test_failures_become_placeholders():
    repo = repo_of({f'm{k}.py': f'def f{k}():\n    pass\n' for k in range(10)})
    graph = build_reference_graph(repo)
    summaries = summarize_repo(repo, graph, offline(FailingBackend({'m3.py'})))
    placeholder = summaries[3]
    assert placeholder.summary == 'Summary unavailable for `m3.py`.'
    assert placeholder.exported_symbols == ('f3',)
    assert 'summary failed' in placeholder.diagnostics[0].message
    assert summaries[4].summary.startswith('`m4.py`')


def test_too_many_failures():
    repo = repo_of({f'm{k}.py': 'x = 1\n' for k in range(10)})
    graph = build_reference_graph(repo)
    with pytest.raises(SummarizationError, match='3 of 10'):
        summarize_repo(repo, graph, offline(FailingBackend({'m0.py', 'm1.py', 'm2.py'})))


def test_auth_errors_abort(pair_repo, pair_graph):
    with pytest.raises(AuthError):
        summarize_repo(pair_repo, pair_graph, offline(FailingBackend({'a.py'}, AuthError)))


def test_concurrency_does_not_change_results(mini):
    repo, graph = mini
    serial = summarize_repo(repo, graph, offline(MockBackend(), concurrency=1))
    parallel = summarize_repo(repo, graph, offline(MockBackend(), concurrency=8))
    assert serial == parallel


def test_summary_weights():
    summaries = [FileSummary('a.py', 'x' * 40), FileSummary('b.py', '')]
    assert summary_weights(summaries) == {'a.py': 10, 'b.py': 0}


def test_save_and_load(tmp_path, mini, mock_gateway):
    repo, graph = mini
    summaries = summarize_repo(repo, graph, mock_gateway)
    path = tmp_path / 'summaries.jsonl'
    save_summaries(path, summaries)
    loaded = load_summaries(path)
    assert loaded == summaries
    assert [item.diagnostics for item in loaded] == [item.diagnostics for item in summaries]


def test_load_bad_summaries(tmp_path):
    path = tmp_path / 'summaries.jsonl'
    path.write_text('{"path": "a.py"}\n')
    with pytest.raises(SchemaError):
        load_summaries(path)
    with pytest.raises(SchemaError):
        load_summaries(tmp_path / 'missing.jsonl')
