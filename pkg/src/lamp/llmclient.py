"""Provider-agnostic chat-completion client with live, record, and replay
modes.

Requests are canonicalized and hashed; record mode captures live responses
into a JSONL fixture keyed by that hash, and replay mode serves them back
without touching the network, so every pipeline run can be made hermetic.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Protocol

import requests

ENV_API_KEY = "LAMP_API_KEY"
ENV_BASE_URL = "LAMP_BASE_URL"
ENV_MODEL = "LAMP_MODEL"
ENV_MODE = "LAMP_PROVIDER_MODE"
ENV_FIXTURE = "LAMP_FIXTURE_PATH"

MAX_ATTEMPTS = 3
BACKOFF_BASE_SECONDS = 0.5


class ProviderError(RuntimeError):
    pass


class FixtureMissError(ProviderError):
    """Replay fixture has no entry for the request; never falls back to live."""


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    user: str
    system: str | None = None
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.user:
            raise ValueError("user message must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def canonical_bytes(self) -> bytes:
        # Sorted keys and fixed separators: the hash must not depend on
        # field ordering or whitespace.
        obj = {
            "max_tokens": self.max_tokens,
            "model": self.model,
            "system": self.system,
            "temperature": self.temperature,
            "user": self.user,
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()

    def summary(self) -> str:
        head = self.user if len(self.user) <= 80 else self.user[:77] + "..."
        return f"model={self.model} user={head!r}"


@dataclass(frozen=True)
class ProviderExchange:
    request_hash: str
    response_text: str
    provider_name: str
    recorded_at: str

    def to_json(self) -> dict:
        return {
            "request_hash": self.request_hash,
            "response_text": self.response_text,
            "provider_name": self.provider_name,
            "recorded_at": self.recorded_at,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ProviderExchange":
        return cls(
            request_hash=obj["request_hash"],
            response_text=obj["response_text"],
            provider_name=obj["provider_name"],
            recorded_at=obj["recorded_at"],
        )


class Provider(Protocol):
    name: str

    def complete(self, request: CompletionRequest) -> str: ...


class LiveProvider:
    """HTTP chat-completions client (POST /chat/completions, bearer token).

    Transient failures (connection errors, 429, 5xx) are retried up to
    MAX_ATTEMPTS with exponential backoff; other HTTP errors surface
    immediately.
    """

    name = "live"

    def __init__(
        self,
        base_url: str,
        api_key: str,
        timeout: float = 60.0,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        self.session = session or requests.Session()
        self._sleep = sleep

    def complete(self, request: CompletionRequest) -> str:
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.user})
        body = {
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(1, MAX_ATTEMPTS + 1):
            try:
                resp = self.session.post(
                    f"{self.base_url}/chat/completions",
                    json=body,
                    headers={"Authorization": f"Bearer {self.api_key}"},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (KeyError, IndexError, ValueError) as exc:
                        raise ProviderError(f"malformed completion response: {exc}") from exc
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if attempt < MAX_ATTEMPTS:
                self._sleep(BACKOFF_BASE_SECONDS * 2 ** (attempt - 1))
        raise ProviderError(
            f"request failed after {MAX_ATTEMPTS} attempts ({request.summary()}): {last_error}"
        )


def load_fixture(path: str | Path) -> dict[str, ProviderExchange]:
    """Load a fixture JSONL into a hash -> exchange map (last entry wins)."""
    exchanges: dict[str, ProviderExchange] = {}
    path = Path(path)
    if not path.exists():
        return exchanges
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                exchange = ProviderExchange.from_json(json.loads(line))
            except (KeyError, ValueError, TypeError) as exc:
                raise ProviderError(f"{path}: bad fixture line {lineno}: {exc}") from exc
            exchanges[exchange.request_hash] = exchange
    return exchanges


class ReplayProvider:
    """Serves recorded responses by request hash; misses are hard errors."""

    name = "replay"

    def __init__(self, fixture_path: str | Path) -> None:
        self.fixture_path = Path(fixture_path)
        self._exchanges = load_fixture(self.fixture_path)

    def __len__(self) -> int:
        return len(self._exchanges)

    def complete(self, request: CompletionRequest) -> str:
        digest = request.hash()
        exchange = self._exchanges.get(digest)
        if exchange is None:
            raise FixtureMissError(
                f"fixture {self.fixture_path} has no entry for {digest} ({request.summary()})"
            )
        return exchange.response_text


class RecordingProvider:
    """Wraps a live provider and appends every exchange to the fixture.

    Appends go through a single lock so concurrent rewrites cannot tear the
    JSONL file.
    """

    name = "record"

    def __init__(self, inner: Provider, fixture_path: str | Path) -> None:
        self.inner = inner
        self.fixture_path = Path(fixture_path)
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> str:
        text = self.inner.complete(request)
        exchange = ProviderExchange(
            request_hash=request.hash(),
            response_text=text,
            provider_name=self.inner.name,
            recorded_at=datetime.now(timezone.utc).isoformat(),
        )
        with self._lock:
            with open(self.fixture_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(exchange.to_json(), ensure_ascii=False))
                f.write("\n")
        return text


def complete(provider: Provider, request: CompletionRequest) -> str:
    """Run one completion through whichever provider is configured."""
    return provider.complete(request)


def provider_from_env(
    mode: str | None = None, fixture_path: str | Path | None = None
) -> Provider:
    """Build a provider from the LAMP_* environment, with optional overrides."""
    mode = mode or os.environ.get(ENV_MODE, "replay")
    fixture_path = fixture_path or os.environ.get(ENV_FIXTURE)
    if mode == "replay":
        if not fixture_path:
            raise ProviderError(f"replay mode needs a fixture path ({ENV_FIXTURE})")
        return ReplayProvider(fixture_path)
    base_url = os.environ.get(ENV_BASE_URL)
    api_key = os.environ.get(ENV_API_KEY, "")
    if not base_url:
        raise ProviderError(f"live/record mode needs {ENV_BASE_URL}")
    live = LiveProvider(base_url=base_url, api_key=api_key)
    if mode == "live":
        return live
    if mode == "record":
        if not fixture_path:
            raise ProviderError(f"record mode needs a fixture path ({ENV_FIXTURE})")
        return RecordingProvider(live, fixture_path)
    raise ProviderError(f"unknown provider mode {mode!r}")


def default_model() -> str:
    return os.environ.get(ENV_MODEL, "gpt-4o")
