"""Provider-agnostic chat-completion gateway with rate limiting, retry, and record/replay.

Modes:
  live   — call the provider, no persistence.
  record — call the provider on cache miss, persist (request digest -> response).
  replay — pure cache lookup, never touches the network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import httpx

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
MODES = ("live", "record", "replay")


class GatewayError(Exception):
    pass


class RateLimitExhausted(GatewayError):
    """Retry budget spent on transient failures."""


class FixtureMissing(GatewayError):
    """Replay-mode cache miss; carries the request digest."""

    def __init__(self, digest: str):
        super().__init__(f"no recorded response for request digest {digest}")
        self.digest = digest


class ProviderError(GatewayError):
    """Non-retryable provider failure."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class TransientProviderError(GatewayError):
    """Retryable failure: 429, 5xx, or a network error."""


@dataclass
class ChatRequest:
    model: str
    messages: list[dict[str, str]]
    temperature: float = 0.0
    max_tokens: int = 1024
    tag: str = ""

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for msg in self.messages:
            if msg.get("role") not in ROLES:
                raise ValueError(f"bad message role {msg.get('role')!r}")
            if "content" not in msg:
                raise ValueError("message missing content")
        if self.messages[0]["role"] not in ("system", "user"):
            raise ValueError("first message role must be system or user")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    @classmethod
    def user(cls, model: str, prompt: str, **kwargs) -> "ChatRequest":
        return cls(model=model, messages=[{"role": "user", "content": prompt}], **kwargs)


@dataclass(frozen=True)
class ChatResponse:
    content: str
    model: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cached: bool = False

    def to_dict(self) -> dict:
        return {
            "content": self.content,
            "model": self.model,
            "usage": {"prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens},
        }

    @classmethod
    def from_dict(cls, data: dict, cached: bool = False) -> "ChatResponse":
        usage = data.get("usage", {})
        return cls(
            content=data.get("content", ""),
            model=data.get("model", ""),
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            cached=cached,
        )


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str
    api_key_env: str = ""


@dataclass
class GatewayConfig:
    mode: str = "replay"
    cache_dir: str | None = None
    max_retries: int = 3
    backoff_base_ms: int = 250
    requests_per_minute: dict[str, int] = field(default_factory=dict)  # model -> rpm; "default" key applies otherwise
    providers: dict[str, ProviderConfig] = field(default_factory=dict)
    default_provider: str = ""
    model_providers: dict[str, str] = field(default_factory=dict)
    timeout_s: float = 60.0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "GatewayConfig":
        providers = {name: ProviderConfig(**p) for name, p in data.get("providers", {}).items()}
        return cls(
            mode=data.get("mode", "replay"),
            cache_dir=data.get("cache_dir"),
            max_retries=int(data.get("max_retries", 3)),
            backoff_base_ms=int(data.get("backoff_base_ms", 250)),
            requests_per_minute={k: int(v) for k, v in data.get("requests_per_minute", {}).items()},
            providers=providers,
            default_provider=data.get("default_provider", next(iter(providers), "")),
            model_providers=dict(data.get("model_providers", {})),
            timeout_s=float(data.get("timeout_s", 60.0)),
        )

    def rpm_for(self, model: str) -> int:
        return self.requests_per_minute.get(model, self.requests_per_minute.get("default", 60))

    def provider_for(self, model: str) -> ProviderConfig:
        name = self.model_providers.get(model, self.default_provider)
        if name not in self.providers:
            raise ProviderError(f"no provider configured for model {model!r}")
        return self.providers[name]


def request_digest(req: ChatRequest) -> str:
    """Deterministic, order-sensitive over messages; the tag is excluded."""
    payload = json.dumps(
        {
            "model": req.model,
            "messages": [[m["role"], m["content"]] for m in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        },
        sort_keys=True,
        ensure_ascii=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class SlidingWindowLimiter:
    """Admits at most rpm calls per model within any 60-second sliding window."""

    WINDOW_S = 60.0

    def __init__(
        self,
        rpm_for: Callable[[str], int],
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._rpm_for = rpm_for
        self._clock = clock
        self._sleep = sleep
        self._events: dict[str, deque[float]] = {}
        self._lock = threading.Lock()

    def acquire(self, model: str) -> None:
        while True:
            with self._lock:
                now = self._clock()
                window = self._events.setdefault(model, deque())
                while window and window[0] <= now - self.WINDOW_S:
                    window.popleft()
                if len(window) < max(1, self._rpm_for(model)):
                    window.append(now)
                    return
                wait = window[0] + self.WINDOW_S - now
            self._sleep(max(wait, 0.001))


class ResponseCache:
    """One file per digest under cache_dir/<first2>/<digest>.json."""

    def __init__(self, cache_dir: Path | str):
        self.root = Path(cache_dir)
        self._lock = threading.Lock()

    def path(self, digest: str) -> Path:
        return self.root / digest[:2] / f"{digest}.json"

    def get(self, digest: str) -> ChatResponse | None:
        path = self.path(digest)
        if not path.exists():
            return None
        entry = json.loads(path.read_text(encoding="utf-8"))
        return ChatResponse.from_dict(entry["response"], cached=True)

    def put(self, digest: str, req: ChatRequest, resp: ChatResponse) -> None:
        path = self.path(digest)
        with self._lock:
            if path.exists():  # at most one entry per digest
                return
            path.parent.mkdir(parents=True, exist_ok=True)
            entry = {
                "request": {
                    "model": req.model,
                    "messages": req.messages,
                    "temperature": req.temperature,
                    "max_tokens": req.max_tokens,
                    "tag": req.tag,
                },
                "response": resp.to_dict(),
                "recorded_at": datetime.now(timezone.utc).isoformat(),
            }
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(entry, ensure_ascii=False, indent=2), encoding="utf-8")
            tmp.replace(path)


class HttpChatTransport:
    """OpenAI-style chat-completions call over HTTPS."""

    def __init__(self, config: GatewayConfig):
        self._config = config
        self._client = httpx.Client(timeout=config.timeout_s)

    def __call__(self, req: ChatRequest) -> ChatResponse:
        provider = self._config.provider_for(req.model)
        headers = {}
        if provider.api_key_env:
            key = os.environ.get(provider.api_key_env, "")
            if not key:
                raise ProviderError(f"environment variable {provider.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        try:
            response = self._client.post(
                provider.base_url.rstrip("/") + "/chat/completions",
                headers=headers,
                json={
                    "model": req.model,
                    "messages": req.messages,
                    "temperature": req.temperature,
                    "max_tokens": req.max_tokens,
                },
            )
        except httpx.HTTPError as exc:
            raise TransientProviderError(f"network failure: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientProviderError(f"provider returned {response.status_code}")
        if response.status_code >= 400:
            raise ProviderError(f"provider returned {response.status_code}: {response.text[:200]}", response.status_code)
        body = response.json()
        try:
            content = body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc
        usage = body.get("usage", {})
        return ChatResponse(
            content=content,
            model=body.get("model", req.model),
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
        )


class LlmGateway:
    """Shared by concurrent pipeline workers; blocking-until-admitted rate contract.

    Empty or truncated content is surfaced to callers, never retried here.
    """

    def __init__(
        self,
        config: GatewayConfig,
        transport: Callable[[ChatRequest], ChatResponse] | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._transport = transport if transport is not None else HttpChatTransport(config)
        self._limiter = SlidingWindowLimiter(config.rpm_for, clock=clock, sleep=sleep)
        self._sleep = sleep
        self._cache = ResponseCache(config.cache_dir) if config.cache_dir else None
        if config.mode in ("record", "replay") and self._cache is None:
            raise ValueError(f"mode {config.mode!r} requires cache_dir")

    def complete(self, req: ChatRequest) -> ChatResponse:
        digest = request_digest(req)
        if self.config.mode == "replay":
            hit = self._cache.get(digest)
            if hit is None:
                raise FixtureMissing(digest)
            return hit
        if self.config.mode == "record":
            hit = self._cache.get(digest)
            if hit is not None:
                return hit
        resp = self._call_with_retry(req)
        if self.config.mode == "record":
            self._cache.put(digest, req, resp)
        return resp

    def _call_with_retry(self, req: ChatRequest) -> ChatResponse:
        last: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                backoff = self.config.backoff_base_ms / 1000.0 * (2 ** (attempt - 1))
                self._sleep(backoff)
            self._limiter.acquire(req.model)
            try:
                return self._transport(req)
            except TransientProviderError as exc:
                last = exc
                logger.warning("transient failure for %s (attempt %d/%d): %s", req.tag or req.model, attempt + 1, self.config.max_retries + 1, exc)
        raise RateLimitExhausted(f"retry budget exhausted for {req.tag or req.model}: {last}")


def scripted_transport(script: Callable[[ChatRequest], str]) -> Callable[[ChatRequest], ChatResponse]:
    """Wraps a text-producing function as a transport; used for fixture generation and tests."""

    def _transport(req: ChatRequest) -> ChatResponse:
        content = script(req)
        return ChatResponse(content=content, model=req.model, prompt_tokens=0, completion_tokens=0)

    return _transport
