import pytest
from archrecon.agents.architect import (
    build_architecture, generate_partial, generate_partials, group_dependencies,
)
from archrecon.agents.readme import ReadmeDoc
from archrecon.agents.summarizer import FileSummary, summarize_repo
from archrecon.analysis.grouper import Group, GroupPlan, plan_groups
from archrecon.analysis.ref_index import build_reference_graph
from archrecon.analysis.repo_model import scan_repo
from archrecon.diagram.merge import merge_diagrams
from archrecon.llm.gateway import Gateway
from archrecon.llm.mock import MockBackend
from archrecon.util.errors import DiagramParseError, PreconditionError
from conftest import FIXTURES


README = ReadmeDoc.from_text('# r\n\n## Architecture\nA layered tool.\n')


class ScriptedDiagrams(MockBackend):
    backend_id = 'scripted-diagrams'

    def __init__(self, answers):
        self.answers = list(answers)
        self.requests = []

    def send(self, request):
        self.requests.append(request)
        return self.answers.pop(0)


def offline(backend, **kwargs):
    return Gateway(backend, sleep=lambda _: None, **kwargs)


@pytest.fixture(scope='module')
def polyglot():
    repo = scan_repo(FIXTURES / 'polyglot')
    graph = build_reference_graph(repo)
    summaries = summarize_repo(repo, graph, offline(MockBackend()))
    return repo, graph, summaries


def pair_summaries():
    return {'a.py': FileSummary('a.py', 'helper'), 'b.py': FileSummary('b.py', 'caller')}


def test_group_dependencies(pair_graph):
    assert group_dependencies(pair_graph, ['a.py', 'b.py']) == ['b.py -> a.py']
    assert group_dependencies(pair_graph, ['b.py']) == []


def test_partial_from_mock():
    repo = scan_repo(FIXTURES / 'mini')
    graph = build_reference_graph(repo)
    gateway = offline(MockBackend())
    summaries = {summary.path: summary for summary in summarize_repo(repo, graph, gateway)}
    group = Group(0, tuple(repo.paths), repo.total_tokens)
    part = generate_partial(group, summaries, README, gateway, graph, 'mini')
    assert part.group_index == 0
    assert {node.id for node in part.diagram.nodes} == {'a', 'b'}
    assert {(edge.src, edge.dst) for edge in part.diagram.edges} == {('b', 'a')}


def test_partial_prompt_lists_functions(pair_graph):
    backend = ScriptedDiagrams(['flowchart TD\n    a --> b\n'])
    generate_partial(Group(0, ('a.py', 'b.py'), 10), pair_summaries(), README,
                     offline(backend), pair_graph)
    sent = backend.requests[0].user_content
    assert '- a.py: g\n- b.py: f' in sent
    assert 'b.py -> a.py' in sent
    assert 'A layered tool.' in sent


def test_partial_preconditions(pair_graph):
    gateway = offline(MockBackend())
    with pytest.raises(PreconditionError):
        generate_partial(Group(0, (), 0), pair_summaries(), README, gateway, pair_graph)
    with pytest.raises(PreconditionError, match='b.py'):
        generate_partial(Group(0, ('a.py', 'b.py'), 10), {'a.py': FileSummary('a.py', 'x')},
                         README, gateway, pair_graph)


def test_unparsable_answer_is_repaired(pair_graph):
    backend = ScriptedDiagrams(['Sorry, no diagram.', 'flowchart TD\n    a --> b\n'])
    part = generate_partial(Group(3, ('a.py',), 5), pair_summaries(), README,
                            offline(backend), pair_graph)
    assert part.group_index == 3
    assert {(edge.src, edge.dst) for edge in part.diagram.edges} == {('a', 'b')}
    assert 'could not be parsed' in backend.requests[1].system_prompt


def test_repair_is_attempted_once(pair_graph):
    backend = ScriptedDiagrams(['no diagram', 'still none'])
    with pytest.raises(DiagramParseError):
        generate_partial(Group(0, ('a.py',), 5), pair_summaries(), README, offline(backend),
                         pair_graph)


def test_parser_diagnostics_are_collected(pair_graph):
    backend = ScriptedDiagrams(['flowchart TD\n    end\n    a --> b\n'])
    diagnostics = []
    generate_partial(Group(2, ('a.py',), 5), pair_summaries(), README, offline(backend),
                     pair_graph, diagnostics=diagnostics)
    assert diagnostics
    assert all(item.source.startswith('group 2 mermaid') for item in diagnostics)


def test_partials_keep_group_order(polyglot):
    repo, graph, summaries = polyglot
    paths = repo.paths
    plan = GroupPlan((Group(0, tuple(paths[:13]), 0),
                      Group(1, tuple(paths[12:]), 0, (paths[12],))), 100, 0)
    parts = generate_partials(plan, summaries, README, offline(MockBackend(), concurrency=2),
                              graph)
    assert [part.group_index for part in parts] == [0, 1]
    merged = build_architecture(plan, summaries, README, offline(MockBackend()), graph)
    assert merged == merge_diagrams(parts)
    assert {node.id for node in merged.nodes} == \
        {node.id for part in parts for node in part.diagram.nodes}


def test_architecture_is_deterministic(polyglot):
    repo, graph, summaries = polyglot
    plan = plan_groups(repo, max(file.token_count for file in repo) * 4)
    first = build_architecture(plan, summaries, README, offline(MockBackend()), graph)
    second = build_architecture(plan, summaries, README, offline(MockBackend(), concurrency=1),
                                graph)
    assert first == second
    assert first.to_json() == second.to_json()
