"""Deterministic scripted backend: every test runs against this, never a
live endpoint.

Rules are ordered (matcher, responses) pairs. The first rule whose matcher
hits the rendered prompt answers; a rule's response list is consumed in order
and its last entry repeats once exhausted. In strict mode an unmatched prompt
is an error.
"""
from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import yaml

from ..errors import UnmatchedPrompt
from .client import ChatRequest, ChatResponse, LlmClient


@dataclass
class ScriptRule:
    match: str
    responses: List[str]
    regex: bool = False
    _pos: int = field(default=0, repr=False)

    def matches(self, prompt: str) -> bool:
        if self.regex:
            return re.search(self.match, prompt) is not None
        return self.match in prompt

    def next_response(self) -> str:
        response = self.responses[min(self._pos, len(self.responses) - 1)]
        self._pos += 1
        return response


class ScriptedLlm(LlmClient):
    backend_id = "scripted"

    def __init__(self, rules: Sequence[ScriptRule], strict: bool = True) -> None:
        super().__init__(max_parallel=64)
        self.rules = list(rules)
        self.strict = strict
        self.call_log: List[Tuple[str, str, str]] = []  # (tag, prompt, response)
        self._rule_lock = threading.Lock()

    @classmethod
    def of(cls, *pairs: Tuple[str, str], strict: bool = True) -> "ScriptedLlm":
        """Shorthand: substring matchers with single responses."""
        return cls([ScriptRule(m, [r]) for m, r in pairs], strict=strict)

    @classmethod
    def from_file(cls, path: Path | str) -> "ScriptedLlm":
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
        rules = []
        for entry in doc.get("rules", []):
            responses = entry.get("responses")
            if responses is None:
                responses = [entry["response"]]
            rules.append(
                ScriptRule(
                    match=entry["match"],
                    responses=[str(r) for r in responses],
                    regex=bool(entry.get("regex", False)),
                )
            )
        return cls(rules, strict=bool(doc.get("strict", True)))

    def _complete(self, request: ChatRequest) -> ChatResponse:
        prompt = "\n".join(m.text for m in request.messages)
        with self._rule_lock:
            response: Optional[str] = None
            for rule in self.rules:
                if rule.matches(prompt):
                    response = rule.next_response()
                    break
            if response is None:
                if self.strict:
                    raise UnmatchedPrompt(
                        "no scripted rule matches prompt starting: "
                        + json.dumps(prompt[:160])
                    )
                response = ""
            self.call_log.append((request.tag, prompt, response))
        return ChatResponse(
            text=response,
            prompt_tokens=len(prompt.split()),
            completion_tokens=len(response.split()),
            latency_s=0.0,
            backend=self.backend_id,
        )
