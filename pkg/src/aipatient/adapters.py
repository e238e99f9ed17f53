"""Pluggable language-model completion adapters.

`LMAdapter` is the one contract every agent talks to: `complete(prompt,
role)` returns completion text.  Adapters are stateless between calls; every
call is appended to a shared `CallLog` with a monotonically increasing
sequence number so tests and audits can replay what happened.

`MockAdapter` provides deterministic canned completions from an ordered rule
table and backs the whole offline test regime; `HttpAdapter` speaks to an
OpenAI-style chat-completions endpoint for live use.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import requests

DEFAULT_TEMPERATURE = 1.0
DEFAULT_MAX_OUTPUT_TOKENS = 4096


class AdapterFailure(Exception):
    """Transport-level failure talking to the model endpoint."""


@dataclass
class AdapterParams:
    model: str = "mock"
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    endpoint: str | None = None
    api_key_env: str | None = None  # name of the env var holding the key, never the key


@dataclass(frozen=True)
class CallRecord:
    seq: int
    role: str
    prompt_sha256: str
    completion_sha256: str
    latency_s: float


class CallLog:
    """Thread-safe, append-only record of adapter calls."""

    def __init__(self) -> None:
        self._records: list[CallRecord] = []
        self._lock = threading.Lock()
        self._seq = itertools.count(1)

    def record(self, role: str, prompt: str, completion: str, latency_s: float) -> CallRecord:
        entry = CallRecord(
            seq=next(self._seq),
            role=role,
            prompt_sha256=hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
            completion_sha256=hashlib.sha256(completion.encode("utf-8")).hexdigest(),
            latency_s=latency_s,
        )
        with self._lock:
            self._records.append(entry)
        return entry

    def records(self, role: str | None = None) -> list[CallRecord]:
        with self._lock:
            snapshot = list(self._records)
        if role is None:
            return snapshot
        return [r for r in snapshot if r.role == role]

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.records():
                fh.write(
                    json.dumps(
                        {
                            "seq": record.seq,
                            "role": record.role,
                            "prompt_sha256": record.prompt_sha256,
                            "completion_sha256": record.completion_sha256,
                            "latency_s": record.latency_s,
                        }
                    )
                    + "\n"
                )


class LMAdapter(Protocol):
    params: AdapterParams
    call_log: CallLog

    def complete(self, prompt: str, role: str) -> str: ...


def reprompt_suffix(attempt: int, error: str) -> str:
    """Correction note appended when a completion failed to parse.

    Includes the attempt number so deterministic mocks can key rules on it.
    """
    return (
        f"\n\n<format_correction attempt=\"{attempt + 1}\">"
        f"The previous output could not be used ({error}). "
        f"Reply again following the requested format exactly."
        f"</format_correction>"
    )


@dataclass
class MockRule:
    """One deterministic rule: fires when `role` matches and `predicate`
    accepts the prompt; `respond` maps the prompt to the canned completion."""

    role: str
    predicate: Callable[[str], bool]
    respond: Callable[[str], str]


class MockAdapter:
    """Deterministic adapter driven by an ordered rule table.

    The first rule whose role and predicate match wins; the optional default
    is the fallthrough.  Identical inputs always give identical outputs.
    """

    def __init__(self, rules: list[MockRule] | None = None, default: str = "",
                 params: AdapterParams | None = None, call_log: CallLog | None = None):
        self.rules = list(rules or [])
        self.default = default
        self.params = params or AdapterParams(model="mock")
        self.call_log = call_log or CallLog()

    def prepend_rule(self, rule: MockRule) -> None:
        self.rules.insert(0, rule)

    def complete(self, prompt: str, role: str) -> str:
        started = time.perf_counter()
        completion = self.default
        for rule in self.rules:
            if rule.role == role and rule.predicate(prompt):
                completion = rule.respond(prompt)
                break
        self.call_log.record(role, prompt, completion, time.perf_counter() - started)
        return completion


class HttpAdapter:
    """Chat-completions client for a live endpoint.

    The API key is read from the environment variable named in the params at
    call time; it is never stored in config files or logs.
    """

    def __init__(self, params: AdapterParams, call_log: CallLog | None = None,
                 timeout_s: float = 120.0):
        if not params.endpoint:
            raise ValueError("HttpAdapter requires an endpoint URL")
        self.params = params
        self.call_log = call_log or CallLog()
        self.timeout_s = timeout_s

    def complete(self, prompt: str, role: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.params.api_key_env:
            key = os.environ.get(self.params.api_key_env)
            if not key:
                raise AdapterFailure(
                    f"environment variable {self.params.api_key_env} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": self.params.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.params.temperature,
            "max_tokens": self.params.max_output_tokens,
        }
        started = time.perf_counter()
        try:
            response = requests.post(
                self.params.endpoint, json=payload, headers=headers, timeout=self.timeout_s
            )
            response.raise_for_status()
            body = response.json()
            completion = body["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            raise AdapterFailure(f"model endpoint call failed: {exc}") from exc
        self.call_log.record(role, prompt, completion, time.perf_counter() - started)
        return completion
