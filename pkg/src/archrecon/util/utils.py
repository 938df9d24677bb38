"""Enumerated labels and small helpers shared across the stages."""
from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
import json
import os
from pathlib import Path
import re
import tempfile
from typing import Any, Iterable


class Language(Enum):
    """Source languages recognised by a scan."""
    GO = 'Go'
    JAVA = 'Java'
    C = 'C'
    CPP = 'Cpp'
    PYTHON = 'Python'
    YAML = 'Yaml'
    JAVASCRIPT = 'JavaScript'
    TYPESCRIPT = 'TypeScript'
    RUST = 'Rust'
    OTHER = 'Other'


class Granularity(Enum):
    """Level of a reference graph node."""
    FILE = 'File'
    CLASS = 'Class'
    FUNCTION = 'Function'


class RefKind(Enum):
    """Kind of a reference graph edge."""
    IMPORT = 'Import'
    CALL = 'Call'
    INHERITANCE = 'Inheritance'


class EntryKind(Enum):
    """Entry point kinds, declared in precedence order."""
    MANIFEST_DECLARED = 'ManifestDeclared'
    MAIN_FUNCTION = 'MainFunction'
    SERVER_BOOTSTRAP = 'ServerBootstrap'
    CLI_BINARY = 'CliBinary'
    LLM_NOMINATED = 'LlmNominated'

    @property
    def precedence(self) -> int:
        return list(EntryKind).index(self)


class NodeKind(Enum):
    """Kind of an architecture diagram node."""
    MODULE = 'Module'
    FILE = 'File'
    SUBVIEW = 'Subview'


class EdgeKind(Enum):
    """Kind of an architecture diagram edge."""
    CALL = 'Call'
    DATA = 'Data'
    DEPENDENCY = 'Dependency'


class Category(Enum):
    """Sections of an evaluation table."""
    LAYERS = 'Layers'
    NODES = 'Nodes'
    EDGES = 'Edges'


@dataclass(frozen=True)
class Diagnostic:
    """A non fatal problem, attributed to a file, stage or element."""
    source: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {'source': self.source, 'message': self.message}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Diagnostic:
        return cls(str(data['source']), str(data['message']))

    def __str__(self):
        return f'{self.source}: {self.message}'


_NON_ALNUM = re.compile('[^0-9a-z]+')


def normalize_id(text: str) -> str:
    """Lowercase `text` and collapse every run of non alphanumerics to one underscore.

:param text: str
    label or raw identifier

:returns: str
    normalized identifier, never empty and never containing `__`"""
    normalized = _NON_ALNUM.sub('_', text.lower()).strip('_')
    return normalized or 'n'


def atomic_write_text(path: Path | str, text: str) -> None:
    """Write `text` to a temporary sibling of `path` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(handle, 'w', encoding='utf8', newline='\n') as tmp:
            tmp.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def dump_json(data: Any) -> str:
    """Deterministic JSON text with a trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + '\n'


def write_jsonl(path: Path | str, rows: Iterable[dict[str, Any]]) -> None:
    lines = [json.dumps(row, sort_keys=True, ensure_ascii=False) for row in rows]
    atomic_write_text(path, ''.join(line + '\n' for line in lines))


def read_jsonl(path: Path | str) -> list[dict[str, Any]]:
    with open(path, encoding='utf8') as handle:
        return [json.loads(line) for line in handle if line.strip()]
