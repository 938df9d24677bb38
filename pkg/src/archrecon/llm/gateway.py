"""Chat completion access with a persistent cache, retries and a concurrency cap."""
from __future__ import annotations
from dataclasses import dataclass
import hashlib
import json
import logging
from pathlib import Path
import re
import threading
import time
from typing import Callable, Protocol, runtime_checkable

import requests

from archrecon.analysis.repo_model import TokenCounter, token_estimate
from archrecon.util.config import LlmConfig
from archrecon.util.errors import (
    AuthError, BackendUnavailableError, ContextOverflowError, UnknownTaskTagError,
)
from archrecon.util.utils import atomic_write_text


logger = logging.getLogger(__name__)

_TASK_TAG = re.compile(r'\[task:([a-z][a-z-]*)\]')
_TRANSIENT_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})


@dataclass(frozen=True)
class LlmRequest:
    system_prompt: str
    user_content: str
    max_output_tokens: int = 2048
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_output_tokens <= 0:
            raise ValueError('max_output_tokens must be positive')
        if self.temperature < 0:
            raise ValueError('temperature must be non-negative')

    @property
    def task(self) -> str:
        """The `[task:...]` tag of the system prompt."""
        match = _TASK_TAG.search(self.system_prompt)
        if match is None:
            raise UnknownTaskTagError('system prompt carries no [task:...] tag')
        return match.group(1)

    def cache_key(self, backend_id: str) -> str:
        payload = json.dumps([self.system_prompt, self.user_content, backend_id,
                              self.max_output_tokens, self.temperature])
        return hashlib.sha256(payload.encode('utf8')).hexdigest()


@dataclass(frozen=True)
class LlmResponse:
    text: str
    cached: bool
    backend_id: str


class TransientBackendError(BackendUnavailableError):
    """Raised by a backend for a failure worth retrying."""


@runtime_checkable
class Backend(Protocol):
    backend_id: str

    def send(self, request: LlmRequest) -> str:
        ...


class HttpBackend:
    """JSON over HTTP chat completion endpoint (`{base_url}/chat/completions`)."""
    def __init__(self, config: LlmConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()
        self.backend_id = f'http:{config.model}'

    def send(self, request: LlmRequest) -> str:
        url = f'{self.config.base_url.rstrip("/")}/chat/completions'
        headers = {'Content-Type': 'application/json'}
        if self.config.api_key:
            headers['Authorization'] = f'Bearer {self.config.api_key}'
        payload = {
            'model': self.config.model,
            'messages': [
                {'role': 'system', 'content': request.system_prompt},
                {'role': 'user', 'content': request.user_content},
            ],
            'max_tokens': request.max_output_tokens,
            'temperature': request.temperature,
        }
        try:
            response = self.session.post(url, json=payload, headers=headers,
                                         timeout=self.config.timeout)
        except requests.RequestException as error:
            raise TransientBackendError(f'{url}: {error}') from error
        if response.status_code in (401, 403):
            raise AuthError(f'{url} rejected the credentials (HTTP {response.status_code})')
        if response.status_code in _TRANSIENT_STATUS:
            raise TransientBackendError(f'{url}: HTTP {response.status_code}')
        if response.status_code >= 400:
            raise BackendUnavailableError(f'{url}: HTTP {response.status_code}: '
                                          f'{response.text[:500]}')
        try:
            return response.json()['choices'][0]['message']['content'] or ''
        except (ValueError, KeyError, IndexError, TypeError) as error:
            raise TransientBackendError(f'{url}: malformed completion payload') from error


class DiskCache:
    """Completion texts stored as one JSON file per request hash."""
    def __init__(self, directory: Path | str):
        self.directory = Path(directory)

    def _path(self, key: str) -> Path:
        return self.directory / key[:2] / f'{key}.json'

    def get(self, key: str) -> str | None:
        try:
            with open(self._path(key), encoding='utf8') as handle:
                return json.load(handle)['text']
        except FileNotFoundError:
            return None
        except (OSError, ValueError, KeyError, TypeError):
            logger.warning('ignoring unreadable cache entry %s', key)
            return None

    def put(self, key: str, text: str) -> None:
        atomic_write_text(self._path(key), json.dumps({'text': text}, ensure_ascii=False))


class Gateway:
    """Send requests to a backend.

:param backend: Backend
    target of uncached requests
:param cache: DiskCache
    optional persistent cache shared across runs
:param context_limit: int
    maximum estimated prompt tokens
:param max_attempts: int
    attempts per request, transient failures back off `backoff_base * 2 ** attempt` seconds
:param concurrency: int
    maximum requests in flight"""
    def __init__(self, backend: Backend, cache: DiskCache | None = None,
                 context_limit: int = 128_000, max_attempts: int = 5,
                 backoff_base: float = 1.0, concurrency: int = 4,
                 counter: TokenCounter = token_estimate,
                 sleep: Callable[[float], None] = time.sleep):
        if max_attempts < 1 or concurrency < 1:
            raise ValueError('max_attempts and concurrency must be positive')
        self.backend = backend
        self.cache = cache
        self.context_limit = context_limit
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.concurrency = concurrency
        self.counter = counter
        self.sleep = sleep
        self._slots = threading.BoundedSemaphore(concurrency)

    @classmethod
    def from_config(cls, config: LlmConfig, backend: Backend | None = None,
                    cache_dir: Path | str | None = None,
                    counter: TokenCounter = token_estimate) -> Gateway:
        return cls(backend or HttpBackend(config),
                   DiskCache(cache_dir) if cache_dir is not None else None,
                   context_limit=config.context_limit, max_attempts=config.max_attempts,
                   backoff_base=config.backoff_base, concurrency=config.concurrency,
                   counter=counter)

    @property
    def backend_id(self) -> str:
        return self.backend.backend_id

    def prompt_tokens(self, request: LlmRequest) -> int:
        return self.counter(request.system_prompt + request.user_content)

    def fits(self, system_prompt: str, user_content: str) -> bool:
        return self.counter(system_prompt + user_content) <= self.context_limit

    def complete(self, request: LlmRequest) -> LlmResponse:
        """Answer `request` from the cache or the backend.

:raises: ContextOverflowError before dispatch, AuthError, BackendUnavailableError after the
    last attempt."""
        tokens = self.prompt_tokens(request)
        if tokens > self.context_limit:
            raise ContextOverflowError(f'prompt of ~{tokens} tokens exceeds the context limit '
                                       f'of {self.context_limit}')
        key = request.cache_key(self.backend_id)
        if self.cache is not None:
            text = self.cache.get(key)
            if text is not None:
                logger.debug('cache hit %s', key[:12])
                return LlmResponse(text, True, self.backend_id)

        text = self._dispatch(request)
        if self.cache is not None:
            self.cache.put(key, text)
        return LlmResponse(text, False, self.backend_id)

    def _dispatch(self, request: LlmRequest) -> str:
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                with self._slots:
                    text = self.backend.send(request)
                if text.strip():
                    return text
                last_error = TransientBackendError('backend returned an empty completion')
            except TransientBackendError as error:
                last_error = error
            if attempt + 1 < self.max_attempts:
                wait = self.backoff_base * 2 ** attempt
                logger.warning('attempt %d/%d failed (%s), retrying in %.1fs',
                               attempt + 1, self.max_attempts, last_error, wait)
                self.sleep(wait)
        raise BackendUnavailableError(f'backend {self.backend_id} failed after '
                                      f'{self.max_attempts} attempts: {last_error}')
