"""Completion backends: live HTTP, scripted, and the transcript store that
records or replays either of them."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from pathlib import Path
from typing import Callable, Mapping, Protocol

import httpx

from .conversation import Conversation, Message, UsageRecord

log = logging.getLogger(__name__)


class GatewayError(RuntimeError):
    pass


class CredentialMissingError(GatewayError):
    pass


class TransportFailedError(GatewayError):
    pass


class ReplayMissError(GatewayError):
    pass


class DigestMismatchError(GatewayError):
    pass


class Backend(Protocol):
    def send(self, request: dict, purpose: str) -> dict:
        """Return {"content": str, "usage": {"input_tokens", "output_tokens"}}."""


def request_digest(request: Mapping) -> str:
    """sha256 over model id, rendered messages and sampling params."""
    canonical = json.dumps(
        {
            "model": request["model"],
            "messages": request["messages"],
            "params": {k: v for k, v in request.items() if k not in ("model", "messages")},
        },
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# --- live HTTP -------------------------------------------------------------

RETRY_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class HttpBackend:
    """POSTs to {base_url}/chat/completions with a bearer credential read
    from the environment variable `credential_env`."""

    def __init__(
        self,
        base_url: str,
        credential_env: str,
        attempts: int = 3,
        backoff: float = 1.0,
        timeout: float = 300.0,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.credential_env = credential_env
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self._client = client
        self._sleep = sleep

    def _credential(self) -> str:
        key = os.environ.get(self.credential_env)
        if not key:
            raise CredentialMissingError(f"environment variable {self.credential_env} is not set")
        return key

    def send(self, request: dict, purpose: str) -> dict:
        headers = {"Authorization": f"Bearer {self._credential()}"}
        client = self._client or httpx.Client(timeout=self.timeout)
        last = None
        try:
            for attempt in range(self.attempts):
                try:
                    resp = client.post(f"{self.base_url}/chat/completions", json=request, headers=headers)
                    if resp.status_code in RETRY_STATUS:
                        last = f"HTTP {resp.status_code}"
                    else:
                        resp.raise_for_status()
                        return parse_completion(resp.json())
                except httpx.TransportError as exc:
                    last = repr(exc)
                except httpx.HTTPStatusError as exc:
                    raise GatewayError(f"{purpose}: {exc}") from exc
                if attempt + 1 < self.attempts:
                    delay = self.backoff * 2**attempt
                    delay += random.uniform(0, delay)
                    log.warning("%s: attempt %d failed (%s), retrying in %.1fs", purpose, attempt + 1, last, delay)
                    self._sleep(delay)
        finally:
            if self._client is None:
                client.close()
        raise TransportFailedError(f"{purpose}: giving up after {self.attempts} attempts ({last})")


def parse_completion(body: Mapping) -> dict:
    try:
        content = body["choices"][0]["message"]["content"]
        usage = body["usage"]
    except (KeyError, IndexError, TypeError) as exc:
        raise GatewayError(f"malformed completion response: {exc!r}") from exc
    tin = usage.get("prompt_tokens", usage.get("input_tokens"))
    tout = usage.get("completion_tokens", usage.get("output_tokens"))
    if tin is None or tout is None:
        raise GatewayError("completion response lacks token usage")
    return {"content": content or "", "usage": {"input_tokens": int(tin), "output_tokens": int(tout)}}


# --- scripted --------------------------------------------------------------

def word_count(text: str) -> int:
    return len(text.split())


class ScriptedBackend:
    """Answers from a Python callable (request, purpose) -> text.

    Usage is reported as whitespace word counts so runs stay deterministic.
    """

    def __init__(self, responder: Callable[[dict, str], str]):
        self.responder = responder
        self.calls: list[tuple[str, dict]] = []
        self._lock = threading.Lock()

    def send(self, request: dict, purpose: str) -> dict:
        with self._lock:
            self.calls.append((purpose, request))
        text = self.responder(request, purpose)
        tin = sum(word_count(m["content"]) for m in request["messages"])
        return {"content": text, "usage": {"input_tokens": tin, "output_tokens": word_count(text)}}


# --- transcripts -----------------------------------------------------------

MODES = ("record", "replay", "live")
_SAFE = re.compile(r"[^A-Za-z0-9_.-]+")


def _stream_name(purpose: str) -> str:
    return _SAFE.sub("_", purpose) or "call"


class TranscriptStore:
    """Keyed call sequences persisted as one JSON file per call.

    Calls are keyed by purpose tag; the n-th call with a given purpose maps to
    `<purpose>.<n>.json`. Keying by purpose keeps replay deterministic even
    when distinct conversations run concurrently.
    """

    def __init__(self, directory, mode: str, inner: Backend | None = None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if mode != "replay" and inner is None:
            raise ValueError(f"{mode} mode needs an inner backend")
        self.directory = Path(directory)
        self.mode = mode
        self.inner = inner
        self._counters: dict[str, int] = {}
        self._lock = threading.Lock()
        if mode == "record":
            self.directory.mkdir(parents=True, exist_ok=True)
        elif mode == "replay" and not self.directory.is_dir():
            raise ReplayMissError(f"no transcript directory at {self.directory}")

    def _next_key(self, purpose: str) -> tuple[str, int]:
        with self._lock:
            n = self._counters.get(purpose, 0)
            self._counters[purpose] = n + 1
        return purpose, n

    def path_for(self, purpose: str, seq: int) -> Path:
        return self.directory / f"{_stream_name(purpose)}.{seq:04d}.json"

    def send(self, request: dict, purpose: str) -> dict:
        purpose, seq = self._next_key(purpose)
        digest = request_digest(request)
        path = self.path_for(purpose, seq)
        if self.mode == "replay":
            if not path.exists():
                raise ReplayMissError(f"no recorded response for call {purpose}#{seq}")
            rec = json.loads(path.read_text())
            if rec["digest"] != digest:
                raise DigestMismatchError(
                    f"request for call {purpose}#{seq} differs from the recording (prompt drift?)"
                )
            return rec["response"]
        response = self.inner.send(request, purpose)
        if self.mode == "record":
            rec = {"seq": seq, "purpose": purpose, "digest": digest, "request": request, "response": response,
                   "usage": response["usage"]}
            tmp = path.with_suffix(".tmp")
            with self._lock:
                tmp.write_text(json.dumps(rec, indent=2, sort_keys=True, ensure_ascii=False))
                os.replace(tmp, path)
        return response


def record_transcripts(directory, mode: str, inner: Backend | None = None) -> TranscriptStore:
    return TranscriptStore(directory, mode, inner)


def complete(conversation: Conversation, backend: Backend, purpose: str) -> tuple[Message, UsageRecord]:
    """One completion. The caller owns `conversation` and appends the reply."""
    conversation.validate()
    response = backend.send(conversation.request_body(), purpose)
    usage = response["usage"]
    rec = UsageRecord(int(usage["input_tokens"]), int(usage["output_tokens"]), conversation.model_id, purpose)
    return Message("assistant", response["content"]), rec
