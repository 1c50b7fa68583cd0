"""Chat-completion client contract plus the HTTP backend.

Callers are backend-agnostic: they build a ChatRequest (or use ``ask``) and
get text back. Accounting (calls, tokens) is tracked per client instance and
is thread-safe; in-flight parallelism is bounded by a semaphore.
"""
from __future__ import annotations

import os
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from ..errors import AuthFailure, LlmUnavailable, MalformedLlmOutput


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant
    text: str


@dataclass(frozen=True)
class ChatRequest:
    messages: Tuple[Message, ...]
    temperature: Optional[float] = None
    max_tokens: Optional[int] = None
    tag: str = ""

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("ChatRequest needs at least one message")
        if self.messages[0].role not in ("system", "user"):
            raise ValueError("first message must be system or user")


@dataclass
class ChatResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency_s: float
    backend: str


@dataclass
class Accounting:
    calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    by_tag: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        return {
            "calls": self.calls,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "by_tag": dict(sorted(self.by_tag.items())),
        }


class LlmClient:
    """Base class: subclasses implement ``_complete``."""

    backend_id = "base"

    def __init__(self, max_parallel: int = 4) -> None:
        self.accounting = Accounting()
        self._lock = threading.Lock()
        self._slots = threading.Semaphore(max_parallel)

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._slots:
            started = time.monotonic()
            response = self._complete(request)
            response.latency_s = time.monotonic() - started
        with self._lock:
            self.accounting.calls += 1
            self.accounting.prompt_tokens += response.prompt_tokens
            self.accounting.completion_tokens += response.completion_tokens
            self.accounting.by_tag[request.tag or "untagged"] += 1
        return response

    def _complete(self, request: ChatRequest) -> ChatResponse:
        raise NotImplementedError

    # convenience wrappers ----------------------------------------------------

    def ask(self, prompt: str, system: Optional[str] = None, tag: str = "") -> str:
        messages: List[Message] = []
        if system:
            messages.append(Message("system", system))
        messages.append(Message("user", prompt))
        return self.complete(ChatRequest(tuple(messages), tag=tag)).text


def ask_structured(llm: LlmClient, prompt: str, parser, system: Optional[str] = None, tag: str = ""):
    """Ask, parse, and on a parse failure re-ask exactly once.

    ``parser`` raises MalformedLlmOutput (or ValueError) on bad output.
    Returns (parsed, raw_text); raises MalformedLlmOutput after the retry.
    """
    text = llm.ask(prompt, system=system, tag=tag)
    try:
        return parser(text), text
    except (MalformedLlmOutput, ValueError):
        pass
    retry = (
        prompt
        + "\n\nYour previous reply could not be parsed. "
        + "Answer again using exactly the required output format, nothing else."
    )
    text = llm.ask(retry, system=system, tag=tag)
    try:
        return parser(text), text
    except (MalformedLlmOutput, ValueError) as exc:
        raise MalformedLlmOutput(f"unparseable output for {tag or 'request'}: {exc}")


class HttpLlm(LlmClient):
    """Backend speaking the prevailing open chat-completions convention."""

    backend_id = "http"

    def __init__(
        self,
        endpoint: Optional[str] = None,
        model: str = "default",
        api_key: Optional[str] = None,
        temperature: float = 0.5,
        max_tokens: int = 2048,
        max_retries: int = 4,
        backoff_s: float = 0.5,
        max_parallel: int = 4,
        timeout_s: float = 120.0,
    ) -> None:
        super().__init__(max_parallel=max_parallel)
        self.endpoint = endpoint or os.environ.get("NOTETABLE_LLM_URL")
        self.api_key = api_key or os.environ.get("NOTETABLE_LLM_KEY")
        if not self.endpoint:
            raise LlmUnavailable(
                "no endpoint configured (set NOTETABLE_LLM_URL or pass endpoint=)"
            )
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s

    def _complete(self, request: ChatRequest) -> ChatResponse:
        import requests

        body = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.text} for m in request.messages],
            "temperature": self.temperature
            if request.temperature is None
            else request.temperature,
            "max_tokens": self.max_tokens
            if request.max_tokens is None
            else request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        delay = self.backoff_s
        last_error: Optional[str] = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = requests.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_error = str(exc)
            else:
                if resp.status_code in (401, 403):
                    raise AuthFailure(f"endpoint rejected credentials ({resp.status_code})")
                if resp.status_code == 200:
                    doc = resp.json()
                    text = doc["choices"][0]["message"]["content"]
                    usage = doc.get("usage", {})
                    return ChatResponse(
                        text=text,
                        prompt_tokens=int(usage.get("prompt_tokens", 0)),
                        completion_tokens=int(usage.get("completion_tokens", 0)),
                        latency_s=0.0,
                        backend=f"{self.backend_id}:{self.model}",
                    )
                if resp.status_code not in (429, 500, 502, 503, 504):
                    raise LlmUnavailable(
                        f"endpoint error {resp.status_code}: {resp.text[:200]}"
                    )
                last_error = f"HTTP {resp.status_code}"
            if attempt < self.max_retries:
                time.sleep(delay)
                delay = min(delay * 2, 8.0)
        raise LlmUnavailable(f"endpoint kept failing: {last_error}")
