"""Completion backends: live OpenAI-compatible HTTP, record, and replay."""

from __future__ import annotations

import collections
import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .errors import (
    BackendError,
    BackendUnavailable,
    CassetteMiss,
    ConfigError,
    IoError,
    ProtocolError,
    RateLimited,
    ServerError,
)
from .prompts import PromptRequest

log = logging.getLogger(__name__)

BACKEND_KINDS = ("live", "record", "replay")
FINISH_REASONS = ("stop", "length", "other")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "replay"
    endpoint_url: str | None = None
    auth_token_env: str | None = None
    cassette: str | None = None
    model_id: str = "gpt-3.5-turbo"
    max_in_flight: int = 4
    requests_per_minute: int = 20
    max_retries: int = 5
    backoff_base: float = 1.0
    timeout: float = 60.0

    def validate(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.kind in ("live", "record"):
            if not self.endpoint_url or not self.auth_token_env:
                raise ConfigError(f"{self.kind} backend needs endpoint_url and auth_token_env")
        if self.kind in ("record", "replay") and not self.cassette:
            raise ConfigError(f"{self.kind} backend needs a cassette path")
        if self.max_in_flight < 1 or self.requests_per_minute < 1 or self.max_retries < 0:
            raise ConfigError("max_in_flight and requests_per_minute must be >= 1, max_retries >= 0")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str
    request_digest: str


def digest(request: PromptRequest) -> str:
    """SHA-256 over the canonical JSON of the fields that shape a completion."""
    payload = {
        "max_output_tokens": int(request.max_output_tokens),
        "message": request.text,
        "model_id": request.model_id,
        "temperature": float(request.temperature),
    }
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class Cassette:
    entries: dict[str, CompletionResponse] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> Cassette:
        path = Path(path)
        cas = cls()
        try:
            fh = path.open(encoding="utf-8")
        except OSError as exc:
            raise IoError(path, exc.strerror or str(exc)) from exc
        with fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                if "meta" in row:
                    cas.metadata = row["meta"]
                else:
                    cas.entries[row["digest"]] = CompletionResponse(
                        row["text"], row["finish_reason"], row["digest"]
                    )
        return cas

    def get(self, key: str) -> CompletionResponse:
        try:
            return self.entries[key]
        except KeyError:
            raise CassetteMiss(key) from None

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def _entry_line(resp: CompletionResponse) -> str:
    row = {"digest": resp.request_digest, "finish_reason": resp.finish_reason, "text": resp.text}
    return json.dumps(row, ensure_ascii=False) + "\n"


class CassetteWriter:
    """Appends entries to a cassette file; safe to share between threads."""

    def __init__(self, path, model_id: str):
        self.path = Path(path)
        self._lock = threading.Lock()
        if not self.path.exists() or self.path.stat().st_size == 0:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            meta = {"model_id": model_id, "created_at": datetime.now(timezone.utc).isoformat()}
            self.path.write_text(json.dumps({"meta": meta}) + "\n", encoding="utf-8")

    def append(self, resp: CompletionResponse) -> None:
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(_entry_line(resp))


class Backend:
    max_in_flight = 1

    def complete(self, request: PromptRequest) -> CompletionResponse:
        raise NotImplementedError

    def complete_many(
        self, requests: Sequence[PromptRequest]
    ) -> list[CompletionResponse | BackendError]:
        """Complete every request; failures come back in place as exceptions."""

        def one(req):
            try:
                return self.complete(req)
            except BackendError as exc:
                return exc

        if self.max_in_flight <= 1 or len(requests) <= 1:
            return [one(r) for r in requests]
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(one, requests))


class ReplayBackend(Backend):
    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    def complete(self, request):
        return self.cassette.get(digest(request))


class StubBackend(Backend):
    """Answers from a local function of the prompt text; no I/O.

    ``respond`` returns either the reply text or ``(text, finish_reason)``.
    """

    def __init__(self, respond: Callable[[str], str | tuple[str, str]]):
        self.respond = respond

    def complete(self, request):
        out = self.respond(request.text)
        text, reason = out if isinstance(out, tuple) else (out, "stop")
        return CompletionResponse(text, reason, digest(request))


class RecordingBackend(Backend):
    def __init__(self, inner: Backend, writer: CassetteWriter):
        self.inner = inner
        self.writer = writer
        self.max_in_flight = inner.max_in_flight

    def complete(self, request):
        resp = self.inner.complete(request)
        self.writer.append(resp)
        return resp


class SlidingWindowLimiter:
    """At most ``limit`` acquisitions in any half-open interval of ``period`` seconds."""

    def __init__(self, limit: int, period: float = 60.0, clock=time.monotonic, sleep=time.sleep):
        self.limit = limit
        self.period = period
        self._clock = clock
        self._sleep = sleep
        self._issued: collections.deque[float] = collections.deque()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        with self._lock:
            while True:
                now = self._clock()
                while self._issued and self._issued[0] <= now - self.period:
                    self._issued.popleft()
                if len(self._issued) < self.limit:
                    self._issued.append(now)
                    return now
                self._sleep(max(self._issued[0] + self.period - now, 1e-3))


def _finish_reason(raw) -> str:
    return raw if raw in ("stop", "length") else "other"


class LiveBackend(Backend):
    """Chat-completions client with a request-rate ceiling and bounded concurrency."""

    def __init__(
        self,
        config: BackendConfig,
        *,
        transport: httpx.BaseTransport | None = None,
        clock=time.monotonic,
        sleep=time.sleep,
    ):
        token = os.environ.get(config.auth_token_env or "")
        if not token:
            raise ConfigError(f"environment variable {config.auth_token_env!r} is not set")
        self.config = config
        self.max_in_flight = config.max_in_flight
        url = config.endpoint_url.rstrip("/")
        self.url = url if url.endswith("/chat/completions") else url + "/chat/completions"
        self._client = httpx.Client(
            transport=transport,
            timeout=config.timeout,
            headers={"Authorization": f"Bearer {token}"},
        )
        self._limiter = SlidingWindowLimiter(config.requests_per_minute, 60.0, clock, sleep)
        self._slots = threading.BoundedSemaphore(config.max_in_flight)
        self._sleep = sleep

    def close(self):
        self._client.close()

    def complete(self, request):
        body = {
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.text}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
            "n": 1,
        }
        key = digest(request)
        cfg = self.config
        last_failure: BackendError | None = None
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                self._sleep(cfg.backoff_base * 2 ** (attempt - 1))
            self._limiter.acquire()
            with self._slots:
                try:
                    resp = self._client.post(self.url, json=body)
                except httpx.TransportError as exc:
                    log.warning("transport failure (attempt %d): %s", attempt + 1, exc)
                    last_failure = BackendUnavailable(f"{self.url}: {exc}")
                    continue
            status = resp.status_code
            if 200 <= status < 300:
                return self._decode(resp, key)
            if status == 429:
                last_failure = RateLimited(f"{self.url}: HTTP 429 persisted after retries")
            elif status >= 500:
                last_failure = ServerError(status)
            else:
                raise ProtocolError(status, resp.text[:200])
            log.warning("HTTP %d (attempt %d of %d)", status, attempt + 1, cfg.max_retries + 1)
        raise last_failure

    @staticmethod
    def _decode(resp: httpx.Response, key: str) -> CompletionResponse:
        try:
            choice = resp.json()["choices"][0]
            text = choice["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(resp.status_code, f"malformed completion body ({exc})") from None
        return CompletionResponse(text, _finish_reason(choice.get("finish_reason")), key)


def make_backend(config: BackendConfig, *, transport: httpx.BaseTransport | None = None) -> Backend:
    config.validate()
    if config.kind == "replay":
        return ReplayBackend(Cassette.load(config.cassette))
    live = LiveBackend(config, transport=transport)
    if config.kind == "record":
        return RecordingBackend(live, CassetteWriter(config.cassette, config.model_id))
    return live


def complete(config: BackendConfig, request: PromptRequest) -> CompletionResponse:
    return make_backend(config).complete(request)
