"""Chat-completion client with a remote HTTP backend and a scripted backend.

The remote backend speaks the common chat-completions JSON shape so any
compatible server works unmodified. The scripted backend answers from an
ordered rule list matched against the last user message, which makes every
pipeline above it a pure function of its fixtures — used for tests and
offline demos.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import requests

API_KEY_ENV = "RA_REC_LLM_API_KEY"
ROLES = ("system", "user", "assistant")


class LlmError(Exception):
    """Backend failure: transport, protocol, or scripted no-match."""


class LlmNoMatchError(LlmError):
    """No scripted rule matched the last user message."""


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        if not isinstance(self.content, str) or not self.content.strip():
            raise ValueError("message content must be a non-empty string")


@dataclass(frozen=True)
class LlmRequest:
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_tokens: int = 512

    def __post_init__(self):
        if not self.messages:
            raise ValueError("request needs at least one message")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be positive, got {self.max_tokens}")


def user_request(text: str, max_tokens: int = 512) -> LlmRequest:
    """Single-user-message request — the shape every pipeline prompt uses."""
    return LlmRequest(messages=(Message("user", text),), max_tokens=max_tokens)


class LlmBackend:
    """Interface: complete(request) -> non-empty response text."""

    def complete(self, request: LlmRequest) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class ScriptedRule:
    """Canned response for prompts matching a pattern.

    A pattern containing '*' is an anchored wildcard match over the whole
    message ('*' spans anything, including newlines); otherwise it is a plain
    substring test.
    """

    pattern: str
    response: str
    priority: int = 0

    def matches(self, text: str) -> bool:
        if "*" in self.pattern:
            regex = ".*".join(re.escape(part) for part in self.pattern.split("*"))
            return re.fullmatch(regex, text, flags=re.DOTALL) is not None
        return self.pattern in text


class ScriptedBackend(LlmBackend):
    """Deterministic backend: first matching rule (priority desc, then load order) wins."""

    def __init__(self, rules: Sequence[ScriptedRule]):
        seen: set[tuple[str, int]] = set()
        for rule in rules:
            key = (rule.pattern, rule.priority)
            if key in seen:
                raise LlmError(f"duplicate scripted rule (pattern={rule.pattern!r}, priority={rule.priority})")
            seen.add(key)
        self.rules = sorted(rules, key=lambda r: -r.priority)

    def complete(self, request: LlmRequest) -> str:
        last_user = next((m.content for m in reversed(request.messages) if m.role == "user"), None)
        if last_user is None:
            raise LlmError("scripted backend needs at least one user message")
        for rule in self.rules:
            if rule.matches(last_user):
                return rule.response
        raise LlmNoMatchError(f"no scripted rule matches prompt starting: {last_user[:80]!r}")


def load_script(path) -> list[ScriptedRule]:
    """Read a JSON array of {pattern, response, priority?} into an ordered rule list."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise LlmError(f"script file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise LlmError(f"script file {path} must hold a JSON array of rules")
    rules: list[ScriptedRule] = []
    seen: set[tuple[str, int]] = set()
    for i, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise LlmError(f"script rule {i} must be an object")
        try:
            pattern = entry["pattern"]
            response = entry["response"]
        except KeyError as exc:
            raise LlmError(f"script rule {i} missing key {exc}") from None
        priority = entry.get("priority", 0)
        if not isinstance(pattern, str) or not pattern:
            raise LlmError(f"script rule {i} pattern must be a non-empty string")
        if not isinstance(response, str) or not response:
            raise LlmError(f"script rule {i} response must be a non-empty string")
        if not isinstance(priority, int):
            raise LlmError(f"script rule {i} priority must be an integer")
        key = (pattern, priority)
        if key in seen:
            raise LlmError(f"script rule {i} duplicates (pattern, priority) of an earlier rule")
        seen.add(key)
        rules.append(ScriptedRule(pattern=pattern, response=response, priority=priority))
    return sorted(rules, key=lambda r: -r.priority)


class RemoteLlmBackend(LlmBackend):
    """Client for POST <base_url>/v1/chat/completions.

    Bearer auth comes from the RA_REC_LLM_API_KEY environment variable when
    set. Transient transport failures and 5xx responses retry with
    exponential backoff; 4xx responses fail immediately.
    """

    def __init__(
        self,
        base_url: str,
        model: str = "default",
        timeout: float = 30.0,
        retries: int = 2,
        backoff: float = 0.5,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = session or requests.Session()

    def complete(self, request: LlmRequest) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        url = f"{self.base_url}/v1/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = self._session.post(url, json=payload, headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
            else:
                if response.status_code >= 500:
                    last_error = LlmError(f"server error {response.status_code} from {url}")
                elif response.status_code >= 400:
                    raise LlmError(f"request rejected ({response.status_code}) by {url}: {response.text[:200]}")
                else:
                    return self._extract_content(response)
            if attempt < self.retries:
                time.sleep(self.backoff * (2**attempt))
        raise LlmError(f"chat completion failed after {self.retries + 1} attempts: {last_error}")

    @staticmethod
    def _extract_content(response: requests.Response) -> str:
        try:
            body = response.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise LlmError(f"malformed chat-completion response: {exc}") from exc
        if not isinstance(content, str) or not content.strip():
            raise LlmError("chat-completion response content is empty")
        return content
