"""Scan a repository from disk into an immutable model with a canonical DFS order."""
from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fnmatch import fnmatchcase
from functools import cached_property, lru_cache
import logging
import os
from pathlib import Path, PurePosixPath
from typing import Any, Callable, Iterator
import warnings

from archrecon.util.config import ScanConfig
from archrecon.util.errors import EmptyRepoError, RepoIOError, SchemaError, UndecodableFileWarning
from archrecon.util.parser import language_of
from archrecon.util.utils import Diagnostic, Language


logger = logging.getLogger(__name__)

TokenCounter = Callable[[str], int]

MANIFEST_NAMES = frozenset({'pyproject.toml', 'setup.cfg', 'package.json', 'Cargo.toml'})


def token_estimate(text: str) -> int:
    """Approximate model tokens as the ceiling of UTF-8 bytes / 4."""
    return (len(text.encode('utf8')) + 3) // 4


@lru_cache(maxsize=None)
def _tiktoken_counter() -> TokenCounter:
    try:
        import tiktoken
    except ImportError as error:
        raise SchemaError("token_counter 'tiktoken' needs the optional tiktoken package") \
                from error
    encoding = tiktoken.get_encoding('cl100k_base')
    return lambda text: len(encoding.encode(text, disallowed_special=()))


def get_token_counter(name: str = 'bytes4') -> TokenCounter:
    """Token counter by configuration name."""
    if name == 'bytes4':
        return token_estimate
    if name == 'tiktoken':
        return _tiktoken_counter()
    raise SchemaError(f'unknown token counter {name!r}')


@dataclass(frozen=True)
class SourceFile:
    path: str
    language: Language
    content: str
    token_count: int

    def __post_init__(self):
        if self.path.startswith('/') or '\\' in self.path:
            raise ValueError(f'path must be repo relative with / separators: {self.path!r}')
        if self.token_count < 0:
            raise ValueError('token_count must be non-negative')

    @classmethod
    def from_text(cls, path: str, content: str,
                  counter: TokenCounter = token_estimate) -> SourceFile:
        return cls(path, language_of(path), content, counter(content))

    def to_dict(self) -> dict[str, Any]:
        return {'path': self.path, 'language': self.language.value,
                'content': self.content, 'token_count': self.token_count}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SourceFile:
        return cls(data['path'], Language(data['language']), data['content'],
                   int(data['token_count']))

    def __repr__(self):
        return f'{self.__class__.__name__}({self.path!r}, {self.language.value}, ' \
               f'tokens={self.token_count})'


@dataclass(frozen=True)
class RepoModel:
    root_name: str
    files: tuple[SourceFile, ...]
    total_tokens: int
    manifests: tuple[tuple[str, str], ...] = ()
    diagnostics: tuple[Diagnostic, ...] = ()

    def __post_init__(self):
        paths = [file.path for file in self.files]
        if len(set(paths)) != len(paths):
            raise ValueError('file paths must be unique')
        if self.total_tokens != sum(file.token_count for file in self.files):
            raise ValueError('total_tokens must equal the sum of file token counts')

    @classmethod
    def from_files(cls, root_name: str, files: list[SourceFile] | tuple[SourceFile, ...],
                   manifests: dict[str, str] | None = None,
                   diagnostics: list[Diagnostic] | None = None) -> RepoModel:
        files = tuple(files)
        return cls(root_name, files, sum(file.token_count for file in files),
                   tuple(sorted((manifests or {}).items())), tuple(diagnostics or ()))

    @cached_property
    def _index(self) -> dict[str, SourceFile]:
        return {file.path: file for file in self.files}

    @property
    def paths(self) -> list[str]:
        return [file.path for file in self.files]

    @property
    def manifest_texts(self) -> dict[str, str]:
        """Build manifests by repo relative path. They do not count towards `total_tokens`."""
        return dict(self.manifests)

    def __contains__(self, path: object) -> bool:
        return path in self._index

    def __iter__(self) -> Iterator[SourceFile]:
        return iter(self.files)

    def __len__(self) -> int:
        return len(self.files)

    def get(self, path: str) -> SourceFile:
        return self._index[path]

    def position(self, path: str) -> int:
        """Index of `path` in canonical DFS order."""
        return self.paths.index(path)

    def to_dict(self) -> dict[str, Any]:
        return {'version': 1, 'root_name': self.root_name,
                'total_tokens': self.total_tokens,
                'files': [file.to_dict() for file in self.files],
                'manifests': dict(self.manifests),
                'diagnostics': [item.to_dict() for item in self.diagnostics]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RepoModel:
        try:
            files = [SourceFile.from_dict(item) for item in data['files']]
            manifests = tuple(sorted((str(key), str(value))
                                     for key, value in data.get('manifests', {}).items()))
            diagnostics = tuple(Diagnostic.from_dict(item) for item in data.get('diagnostics', []))
            return cls(data['root_name'], tuple(files), int(data['total_tokens']), manifests,
                       diagnostics)
        except (KeyError, TypeError, ValueError) as error:
            raise SchemaError(f'invalid repository document: {error}') from error

    def __repr__(self):
        return f'{self.__class__.__name__}({self.root_name!r}, files={len(self.files)}, ' \
               f'total_tokens={self.total_tokens})'


def is_excluded(rel_path: str, patterns: tuple[str, ...]) -> bool:
    """A path is excluded when a pattern matches the whole path or any of its components."""
    parts = rel_path.split('/')
    return any(fnmatchcase(rel_path, pattern) or any(fnmatchcase(part, pattern) for part in parts)
               for pattern in patterns)


def dfs_paths(root: Path, config: ScanConfig, manifests: list[str] | None = None) -> list[str]:
    """Repo relative paths of included files in lexicographic depth first order.

Build manifests met on the way are appended to `manifests` when given. A manifest with an
included extension is listed in both."""
    ordered: list[str] = []

    def visit(directory: Path, prefix: str) -> None:
        try:
            with os.scandir(directory) as iterator:
                entries = sorted(iterator, key=lambda entry: entry.name)
        except OSError as error:
            if not prefix:
                raise RepoIOError(f'cannot read repository root {root}: {error}') from error
            logger.warning('skipping unreadable directory %s: %s', prefix, error)
            return
        for entry in entries:
            rel_path = f'{prefix}{entry.name}'
            if is_excluded(rel_path, config.exclude_globs):
                continue
            if entry.is_dir(follow_symlinks=False):
                visit(Path(entry.path), f'{rel_path}/')
            elif entry.is_file():
                if manifests is not None and entry.name in MANIFEST_NAMES:
                    manifests.append(rel_path)
                if PurePosixPath(entry.name).suffix.lower() in config.include_extensions:
                    ordered.append(rel_path)

    visit(root, '')
    return ordered


def _read_text(path: Path) -> str | None:
    """Text of `path`, `None` for binary or undecodable content."""
    data = path.read_bytes()
    if b'\x00' in data:
        return None
    try:
        return data.decode('utf8')
    except UnicodeDecodeError:
        return None


def scan_repo(root: Path | str, config: ScanConfig | None = None) -> RepoModel:
    """Read every included file below `root` into a RepoModel.

:param root: str
    repository directory
:param config: ScanConfig
    extensions, exclusions and token counter

:returns: RepoModel

:raises: RepoIOError if root is missing or unreadable, EmptyRepoError if nothing matched."""
    config = config or ScanConfig()
    root = Path(root)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        raise RepoIOError(f'repository root {root} does not exist or is not readable')
    counter = get_token_counter(config.token_counter)

    manifest_paths: list[str] = []
    rel_paths = dfs_paths(root, config, manifest_paths)
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        contents = list(pool.map(lambda rel: _read_text(root / rel), rel_paths))

    files = []
    skipped: list[Diagnostic] = []
    for rel_path, content in zip(rel_paths, contents):
        if content is None:
            warnings.warn(f'skipping binary or non UTF-8 file {rel_path}', UndecodableFileWarning)
            skipped.append(Diagnostic(rel_path, 'skipped binary or non UTF-8 file'))
            continue
        files.append(SourceFile.from_text(rel_path, content, counter))
    if not files:
        raise EmptyRepoError(f'no file with an included extension below {root}')

    manifests = {}
    for rel_path in manifest_paths:
        text = _read_text(root / rel_path)
        if text is not None:
            manifests[rel_path] = text

    repo = RepoModel.from_files(root.resolve().name, files, manifests, skipped)
    logger.info('scanned %s: %d files, %d tokens', repo.root_name, len(repo), repo.total_tokens)
    return repo
