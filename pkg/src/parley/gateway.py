"""Chat-completions HTTP client with retries, plus a deterministic stub provider.

The client speaks the OpenAI-compatible ``/chat/completions`` wire format and
retries on timeouts, 5xx, and 429 with exponential backoff. API keys come only
from the environment (``ARENA_API_KEY`` by default), never from config files
or logs. The stub provider is offline and deterministic so the entire primary
test suite runs with no network access.
"""

from __future__ import annotations

import hashlib
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

import httpx

logger = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "ARENA_API_KEY"

Message = dict[str, str]  # {"role": ..., "content": ...}


class GatewayError(RuntimeError):
    """Base class for provider-call failures."""


class TimeoutError_(GatewayError):
    pass


class RateLimitedError(GatewayError):
    pass


class ProviderError(GatewayError):
    def __init__(self, status: int, body: str):
        super().__init__(f"provider returned {status}")
        self.status = status
        self.body = body


class ExhaustedRetriesError(GatewayError):
    def __init__(self, attempts: int, last: Exception):
        super().__init__(f"gave up after {attempts} attempts: {last}")
        self.attempts = attempts
        self.last = last


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str
    model_id: str
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 30.0
    max_retries: int = 3
    backoff: float = 0.5
    requests_per_minute: int | None = None

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class ChatResult:
    text: str
    usage: dict[str, Any] = field(default_factory=dict)
    attempts: int = 1


class _TokenBucket:
    """Simple requests-per-minute limiter; serializes bursts across threads."""

    def __init__(self, per_minute: int, clock=time.monotonic, sleep=time.sleep):
        self.capacity = per_minute
        self.tokens = float(per_minute)
        self.rate = per_minute / 60.0
        self.updated = clock()
        self.clock = clock
        self.sleep = sleep
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            self.sleep(wait)


_buckets: dict[tuple[str, str], _TokenBucket] = {}
_buckets_lock = threading.Lock()


def _bucket_for(config: ProviderConfig) -> _TokenBucket | None:
    if config.requests_per_minute is None:
        return None
    key = (config.base_url, config.model_id)
    with _buckets_lock:
        if key not in _buckets:
            _buckets[key] = _TokenBucket(config.requests_per_minute)
        return _buckets[key]


def chat_complete(
    config: ProviderConfig,
    messages: Sequence[Message],
    params: dict[str, Any] | None = None,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatResult:
    """POST a chat-completions request, retrying on timeout/5xx/429.

    ``transport`` and ``sleep`` exist for tests; defaults hit the real network
    and real clock. Raises ExhaustedRetriesError once max_retries is spent.
    """
    if not messages:
        raise ValueError("messages must be nonempty")
    params = dict(params or {})
    body = {"model": config.model_id, "messages": list(messages), **params}
    headers = {}
    api_key = os.environ.get(config.api_key_env, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    bucket = _bucket_for(config)
    url = config.base_url.rstrip("/") + "/chat/completions"
    attempts = 0
    last_error: Exception | None = None

    with httpx.Client(timeout=config.timeout, transport=transport) as client:
        while attempts <= config.max_retries:
            attempts += 1
            if bucket is not None:
                bucket.acquire()
            try:
                response = client.post(url, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last_error = TimeoutError_(str(exc))
            else:
                if response.status_code == 200:
                    payload = response.json()
                    text = payload["choices"][0]["message"]["content"]
                    return ChatResult(text=text, usage=payload.get("usage", {}), attempts=attempts)
                if response.status_code == 429:
                    last_error = RateLimitedError(response.text[:500])
                elif response.status_code >= 500:
                    last_error = ProviderError(response.status_code, response.text[:500])
                else:
                    # 4xx other than 429 will not improve on retry
                    raise ProviderError(response.status_code, response.text[:500])
            if attempts <= config.max_retries:
                delay = config.backoff * (2 ** (attempts - 1))
                logger.debug("retrying after %s (attempt %d): %s", delay, attempts, last_error)
                sleep(delay)
    raise ExhaustedRetriesError(attempts, last_error)


# ---------------------------------------------------------------------------
# provider abstraction used by agents and judges


class Provider(Protocol):
    def complete(self, messages: Sequence[Message], **params) -> str: ...


class HttpProvider:
    """Provider backed by chat_complete against a real endpoint."""

    def __init__(self, config: ProviderConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self.transport = transport

    def complete(self, messages: Sequence[Message], **params) -> str:
        return chat_complete(self.config, messages, params, transport=self.transport).text


def _system_hash(messages: Sequence[Message]) -> str:
    system = next((m["content"] for m in messages if m.get("role") == "system"), "")
    return hashlib.sha256(system.encode("utf-8")).hexdigest()


class StubProviderError(GatewayError):
    """Deliberate failure injected by a stub fixture."""


class StubProvider:
    """Deterministic offline provider for tests and --stub-providers runs.

    Reply resolution order:

    1. ``by_hash``: sha256 of the system prompt -> reply (or list consumed in order);
    2. ``rules``: first (substring, reply) pair whose substring occurs in the
       rendered prompt (system + user contents);
    3. ``script``: next reply from an ordered list;
    4. ``default``.

    A reply equal to the FAIL sentinel raises StubProviderError, for testing
    the aborted-episode path. All calls are appended to ``calls``.
    """

    FAIL = "<<FAIL>>"

    def __init__(
        self,
        by_hash: dict[str, str | list[str]] | None = None,
        rules: Sequence[tuple[str, str]] = (),
        script: Sequence[str] = (),
        default: str = "Noted.",
    ):
        self.by_hash = {k: (list(v) if isinstance(v, list) else [v]) for k, v in (by_hash or {}).items()}
        self.rules = list(rules)
        self.script = list(script)
        self.default = default
        self.calls: list[dict[str, Any]] = []
        self._lock = threading.Lock()

    def complete(self, messages: Sequence[Message], **params) -> str:
        with self._lock:
            self.calls.append({"messages": [dict(m) for m in messages], "params": params})
            reply = self._resolve(messages)
        if reply == self.FAIL:
            raise StubProviderError("stub fixture requested failure")
        return reply

    def _resolve(self, messages: Sequence[Message]) -> str:
        digest = _system_hash(messages)
        if digest in self.by_hash and self.by_hash[digest]:
            queue = self.by_hash[digest]
            return queue.pop(0) if len(queue) > 1 else queue[0]
        blob = "\n".join(m.get("content", "") for m in messages)
        for needle, reply in self.rules:
            if needle in blob:
                return reply
        if self.script:
            return self.script.pop(0) if len(self.script) > 1 else self.script[0]
        return self.default
