"""Select the language and the tree-sitter grammar for a source file."""
from __future__ import annotations
from functools import lru_cache
import importlib
from pathlib import PurePosixPath
from typing import Any, Protocol, runtime_checkable

from tree_sitter import Language as Grammar, Parser

from .utils import Language


EXTENSIONS: dict[str, Language] = {
    '.go': Language.GO,
    '.java': Language.JAVA,
    '.c': Language.C,
    '.h': Language.C,
    '.cc': Language.CPP,
    '.cpp': Language.CPP,
    '.cxx': Language.CPP,
    '.hh': Language.CPP,
    '.hpp': Language.CPP,
    '.hxx': Language.CPP,
    '.py': Language.PYTHON,
    '.yaml': Language.YAML,
    '.yml': Language.YAML,
    '.js': Language.JAVASCRIPT,
    '.jsx': Language.JAVASCRIPT,
    '.mjs': Language.JAVASCRIPT,
    '.cjs': Language.JAVASCRIPT,
    '.ts': Language.TYPESCRIPT,
    '.tsx': Language.TYPESCRIPT,
    '.rs': Language.RUST,
}

# module and attribute providing the grammar, keyed by language
_GRAMMARS: dict[Language, tuple[str, str]] = {
    Language.GO: ('tree_sitter_go', 'language'),
    Language.JAVA: ('tree_sitter_java', 'language'),
    Language.C: ('tree_sitter_c', 'language'),
    Language.CPP: ('tree_sitter_cpp', 'language'),
    Language.PYTHON: ('tree_sitter_python', 'language'),
    Language.JAVASCRIPT: ('tree_sitter_javascript', 'language'),
    Language.TYPESCRIPT: ('tree_sitter_typescript', 'language_typescript'),
    Language.RUST: ('tree_sitter_rust', 'language'),
}
_TSX = ('tree_sitter_typescript', 'language_tsx')


@runtime_checkable
class SyntaxParser(Protocol):
    """Parser Protocol which the extractors depend on."""
    def parse(self, source: bytes) -> Any:
        """parse source bytes into a syntax tree."""


def language_of(filename: PurePosixPath | str) -> Language:
    """Language of a file judged by its extension, `Language.OTHER` when unknown."""
    suffix = PurePosixPath(str(filename)).suffix.lower()
    return EXTENSIONS.get(suffix, Language.OTHER)


@lru_cache(maxsize=None)
def _load_grammar(module_name: str, attribute: str) -> Grammar:
    module = importlib.import_module(module_name)
    return Grammar(getattr(module, attribute)())


def has_grammar(language: Language) -> bool:
    return language in _GRAMMARS


def get_parser(filename: PurePosixPath | str, language: Language | None = None) -> SyntaxParser:
    """return a fresh parser for the file. Parsers are not shared between threads.

:param filename: str
    repo relative path, used to tell `.tsx` apart from `.ts`
:param language: Language
    overrides the extension based detection

:returns: SyntaxParser

:raises: ValueError
    if no grammar is available for the language."""
    language = language or language_of(filename)
    if language not in _GRAMMARS:
        raise ValueError(f'No grammar available for {language.value} sources')
    spec = _GRAMMARS[language]
    if str(filename).lower().endswith('.tsx'):
        spec = _TSX
    return Parser(_load_grammar(*spec))
