"""Chat-completion backends: a scripted mock and an OpenAI-compatible HTTP client.

Mock script format (JSON lines, one object per scripted stage response)::

    {"id": "q1", "stage": "representation", "round": 0, "response": "<representation>...</representation>"}

``id`` defaults to ``"*"`` (any item) and ``round`` to 0. A request for round
*k* uses the entry with the highest round not above *k*, so a single entry
serves every round unless later rounds are scripted separately. Answer
requests carry the number of reflection rounds completed, which lets a
script answer differently with and without reflection.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Protocol

import httpx

from .errors import BackendError, SymtimeError


@dataclass(frozen=True)
class BackendRequest:
    system_prompt: str
    user_prompt: str
    temperature: float = 0.1
    max_tokens: int = 1024
    stage: str = ""
    round: int = 0
    item_id: str = ""
    run: int = 0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


class ModelBackend(Protocol):
    def complete(self, request: BackendRequest) -> str:
        """Return the model's text, or raise :class:`BackendError` on transport failure."""
        ...


class MockScriptError(SymtimeError):
    """The mock script has no response for a request; not retryable."""


class MockBackend:
    """Deterministic backend answering from a script keyed by (item, stage, round)."""

    def __init__(self, entries: Iterable[dict]):
        self._script: dict[tuple[str, str], dict[int, str]] = {}
        for entry in entries:
            key = (str(entry.get("id", "*")), str(entry["stage"]))
            self._script.setdefault(key, {})[int(entry.get("round", 0))] = str(entry["response"])
        self._lock = threading.Lock()
        self.calls: list[BackendRequest] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "MockBackend":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    entries.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise MockScriptError(f"{path}: line {lineno}: {exc.msg}") from None
        return cls(entries)

    @property
    def call_count(self) -> int:
        with self._lock:
            return len(self.calls)

    def complete(self, request: BackendRequest) -> str:
        with self._lock:
            self.calls.append(request)
        rounds = self._script.get((request.item_id, request.stage)) or self._script.get(("*", request.stage))
        if not rounds:
            raise MockScriptError(f"no scripted response for item {request.item_id!r} stage {request.stage!r}")
        eligible = [r for r in rounds if r <= request.round]
        if not eligible:
            raise MockScriptError(
                f"no scripted response for item {request.item_id!r} stage {request.stage!r} round {request.round}"
            )
        return rounds[max(eligible)]


class OpenAIChatBackend:
    """Client for a ``POST /v1/chat/completions`` compatible endpoint."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "OPENAI_API_KEY",
        timeout: float = 120.0,
        client: Optional[httpx.Client] = None,
    ):
        endpoint = endpoint.rstrip("/")
        if not endpoint.endswith("/chat/completions"):
            endpoint += "/chat/completions" if endpoint.endswith("/v1") else "/v1/chat/completions"
        self.url = endpoint
        self.model = model
        self.api_key = os.environ.get(api_key_env, "")
        self._client = client or httpx.Client(timeout=timeout)

    def complete(self, request: BackendRequest) -> str:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._client.post(self.url, json=payload, headers=headers)
            resp.raise_for_status()
            data = resp.json()
            content = data["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise BackendError(f"{self.url}: {exc}") from exc
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"{self.url}: malformed completion response ({exc})") from exc
        if not isinstance(content, str):
            raise BackendError(f"{self.url}: completion content is not text")
        return content
