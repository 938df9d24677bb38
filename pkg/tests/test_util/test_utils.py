import pytest
from hypothesis import given, strategies as st
from archrecon.util import errors
from archrecon.util.utils import (
    Diagnostic, EntryKind, atomic_write_text, dump_json, normalize_id, read_jsonl, write_jsonl,
)


@pytest.mark.parametrize('text,expected', [
    ('Auth Service', 'auth_service'),
    ('api/v1--Gateway', 'api_v1_gateway'),
    ('__init__', 'init'),
    ('core', 'core'),
    ('???', 'n'),
])
def test_normalize_id(text, expected):
    assert normalize_id(text) == expected


@given(st.text())
def test_normalize_id_is_idempotent(text):
    normalized = normalize_id(text)
    assert normalize_id(normalized) == normalized
    assert '__' not in normalized
    assert normalized


def test_entry_kind_precedence():
    ordered = sorted(EntryKind, key=lambda kind: kind.precedence)
    assert ordered[0] is EntryKind.MANIFEST_DECLARED
    assert ordered[-1] is EntryKind.LLM_NOMINATED


def test_diagnostic_round_trip():
    diagnostic = Diagnostic('a.py', 'parse failure')
    assert Diagnostic.from_dict(diagnostic.to_dict()) == diagnostic
    assert str(diagnostic) == 'a.py: parse failure'


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / 'nested' / 'out.txt'
    atomic_write_text(target, 'one')
    atomic_write_text(target, 'two')
    assert target.read_text() == 'two'
    assert [path.name for path in target.parent.iterdir()] == ['out.txt']


def test_jsonl(tmp_path):
    rows = [{'b': 1, 'a': 'x'}, {'c': []}]
    write_jsonl(tmp_path / 'rows.jsonl', rows)
    assert read_jsonl(tmp_path / 'rows.jsonl') == rows
    assert (tmp_path / 'rows.jsonl').read_text().splitlines()[0] == '{"a": "x", "b": 1}'


def test_dump_json_is_sorted():
    assert dump_json({'b': 1, 'a': 2}) == '{\n  "a": 2,\n  "b": 1\n}\n'


@pytest.mark.parametrize('error,code', [
    (errors.RepoIOError, 3),
    (errors.SchemaError, 3),
    (errors.MalformedTableError, 3),
    (errors.PreconditionError, 3),
    (errors.ContextOverflowError, 4),
    (errors.AuthError, 4),
    (errors.SummarizationError, 4),
    (errors.NonConvergenceError, 5),
    (errors.ArchReconError, 5),
])
def test_exit_codes(error, code):
    assert error.exit_code == code


def test_unknown_file_error_message():
    assert str(errors.UnknownFileError('x.py is missing')) == 'x.py is missing'
