"""Settings with precedence CLI flags > environment > config file > defaults."""
from __future__ import annotations
from dataclasses import asdict, dataclass, field, fields, replace
import hashlib
import json
import os
from pathlib import Path
import sys
from typing import Any, Mapping

from .errors import SchemaError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


CONFIG_FILENAME = 'archrecon.toml'

DEFAULT_EXTENSIONS = (
    '.go', '.java', '.c', '.h', '.cc', '.cpp', '.cxx', '.hh', '.hpp', '.hxx',
    '.py', '.yaml', '.yml', '.js', '.jsx', '.mjs', '.cjs', '.ts', '.tsx', '.rs',
)
DEFAULT_EXCLUDES = (
    '.git', '.hg', '.svn', '.archrecon', '.tox', '.venv', 'venv', '.mypy_cache',
    '__pycache__', 'node_modules', 'vendor', 'third_party', 'build', 'dist', 'target',
    '*.egg-info',
)
TOKEN_COUNTERS = ('bytes4', 'tiktoken')


@dataclass(frozen=True)
class ScanConfig:
    include_extensions: tuple[str, ...] = DEFAULT_EXTENSIONS
    exclude_globs: tuple[str, ...] = DEFAULT_EXCLUDES
    token_counter: str = 'bytes4'
    workers: int = 8

    def __post_init__(self):
        if self.token_counter not in TOKEN_COUNTERS:
            raise SchemaError(f'token_counter must be one of {", ".join(TOKEN_COUNTERS)}, '
                              f'got {self.token_counter!r}')
        normalized = tuple(ext.lower() if ext.startswith('.') else f'.{ext.lower()}'
                           for ext in self.include_extensions)
        object.__setattr__(self, 'include_extensions', normalized)


@dataclass(frozen=True)
class LlmConfig:
    base_url: str = 'http://localhost:8000/v1'
    model: str = 'qwen3-32b'
    api_key: str = field(default='', repr=False)
    concurrency: int = 4
    context_limit: int = 128_000
    max_output_tokens: int = 2048
    timeout: float = 120.0
    max_attempts: int = 5
    backoff_base: float = 1.0


@dataclass(frozen=True)
class GroupingConfig:
    max_tokens: int = 64_000
    overlap_rate: float = 0.10


@dataclass(frozen=True)
class SummaryConfig:
    summary_tokens: int = 300
    max_related: int = 8
    max_file_tokens: int = 16_000
    failure_ratio: float = 0.20


@dataclass(frozen=True)
class ReadmeConfig:
    max_depth: int = 6


@dataclass(frozen=True)
class Settings:
    scan: ScanConfig = field(default_factory=ScanConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    grouping: GroupingConfig = field(default_factory=GroupingConfig)
    summary: SummaryConfig = field(default_factory=SummaryConfig)
    readme: ReadmeConfig = field(default_factory=ReadmeConfig)

    def fingerprint(self) -> str:
        """Stable hash of everything that influences generated artifacts."""
        data = asdict(self)
        for volatile in ('api_key', 'concurrency', 'timeout'):
            data['llm'].pop(volatile)
        data['scan'].pop('workers')
        text = json.dumps(data, sort_keys=True)
        return hashlib.sha256(text.encode('utf8')).hexdigest()


ENVIRONMENT = {
    'ARCH_LLM_BASE_URL': ('llm', 'base_url'),
    'ARCH_LLM_MODEL': ('llm', 'model'),
    'ARCH_LLM_API_KEY': ('llm', 'api_key'),
    'ARCH_LLM_CONCURRENCY': ('llm', 'concurrency'),
    'ARCH_LLM_CONTEXT_LIMIT': ('llm', 'context_limit'),
    'ARCH_LLM_TIMEOUT': ('llm', 'timeout'),
}


def _coerce(section: str, key: str, value: Any, default: Any) -> Any:
    try:
        if isinstance(default, tuple):
            if isinstance(value, str):
                value = [part.strip() for part in value.split(',') if part.strip()]
            if not isinstance(value, (list, tuple)):
                raise TypeError
            return tuple(str(item) for item in value)
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError) as error:
        raise SchemaError(f'[{section}] {key}: cannot use {value!r} as '
                          f'{type(default).__name__}') from error


def _apply(settings: Settings, layer: Mapping[str, Mapping[str, Any]], origin: str) -> Settings:
    for section, values in layer.items():
        if section not in {f.name for f in fields(Settings)}:
            raise SchemaError(f'{origin}: unknown section [{section}]')
        if not isinstance(values, Mapping):
            raise SchemaError(f'{origin}: section [{section}] must be a table')
        current = getattr(settings, section)
        known = {f.name for f in fields(current)}
        changes = {}
        for key, value in values.items():
            if key not in known:
                raise SchemaError(f'{origin}: unknown key {key!r} in [{section}]')
            if value is None:
                continue
            changes[key] = _coerce(section, key, value, getattr(current, key))
        settings = replace(settings, **{section: replace(current, **changes)})
    return settings


def read_config_file(path: Path | str) -> dict[str, Any]:
    """Read a TOML or JSON config file into nested dictionaries."""
    path = Path(path)
    try:
        if path.suffix.lower() == '.json':
            with open(path, encoding='utf8') as handle:
                data = json.load(handle)
        else:
            with open(path, 'rb') as handle:
                data = tomllib.load(handle)
    except OSError as error:
        raise SchemaError(f'cannot read config {path}: {error}') from error
    except (ValueError, tomllib.TOMLDecodeError) as error:
        raise SchemaError(f'invalid config {path}: {error}') from error
    if not isinstance(data, dict):
        raise SchemaError(f'config {path} must contain a table at top level')
    return data


def load_settings(config_path: Path | str | None = None,
                  env: Mapping[str, str] | None = None,
                  overrides: Mapping[str, Mapping[str, Any]] | None = None,
                  ) -> Settings:
    """Build the effective settings.

:param config_path: str
    explicit config file; when omitted `archrecon.toml` in the working directory is used if
    present.
:param env: Mapping
    environment, defaults to `os.environ`
:param overrides: Mapping
    values from command line flags, `{section: {key: value}}`; `None` values are ignored.

:returns: Settings

:raises: SchemaError on unknown keys or values of the wrong type."""
    settings = Settings()
    if config_path is None and Path(CONFIG_FILENAME).is_file():
        config_path = CONFIG_FILENAME
    if config_path is not None:
        settings = _apply(settings, read_config_file(config_path), str(config_path))

    env = os.environ if env is None else env
    from_env: dict[str, dict[str, Any]] = {}
    for variable, (section, key) in ENVIRONMENT.items():
        if env.get(variable):
            from_env.setdefault(section, {})[key] = env[variable]
    settings = _apply(settings, from_env, 'environment')

    if overrides:
        settings = _apply(settings, overrides, 'command line')
    return settings
