"""The agent loop: alternate completions with tool dispatches until the model
asks for final verification or the call budget runs out.

Wire grammar the model must follow (documented in the tool-calling template):

    Selected tool: [Tool_Name(arg1, arg2, ...)]

Arguments are positional in the tool's declared order; ``key=value`` pairs are
also accepted. The loop ends on ``Selected tool: [Final_Verification]`` or any
line beginning with "Final verification".
"""
from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..errors import LlmUnavailable
from ..tools import ToolCall, ToolRegistry, ToolResult, ToolRuntime
from .client import ChatRequest, LlmClient, Message

# greedy capture: tool args may themselves contain brackets ("90[more]")
_SELECTED_RE = re.compile(r"Selected tool:\s*\[(.+)\]", re.IGNORECASE)
_FINAL_LINE_RE = re.compile(r"^\s*final verification\b", re.IGNORECASE | re.MULTILINE)
_FINAL_NAMES = {"final_verification", "final verification"}


def _split_args(text: str) -> List[str]:
    """Split a parenthesized arg list on commas, honoring quotes."""
    parts: List[str] = []
    buf = []
    quote = None
    for ch in text:
        if quote:
            if ch == quote:
                quote = None
            else:
                buf.append(ch)
        elif ch in "'\"":
            quote = ch
        elif ch == ",":
            parts.append("".join(buf).strip())
            buf = []
        else:
            buf.append(ch)
    tail = "".join(buf).strip()
    if tail:
        parts.append(tail)
    return parts


def parse_selected_tool(
    text: str, registry: ToolRegistry, call_id: str = "call"
) -> Tuple[Optional[ToolCall], bool]:
    """Extract (tool call, is_final_request) from a model reply.

    Positional args are mapped onto the tool's declared argument order.
    Returns (None, False) when the reply contains neither. ``call_id`` is
    caller-assigned so traces stay deterministic.
    """
    m = _SELECTED_RE.search(text)
    if m is None:
        if _FINAL_LINE_RE.search(text):
            return None, True
        return None, False
    inner = m.group(1).strip()
    name, sep, rest = inner.partition("(")
    name = name.strip()
    if name.casefold().replace("-", "_") in _FINAL_NAMES:
        return None, True
    raw_args = _split_args(rest.rstrip(")")) if sep else []
    args: Dict[str, str] = {}
    positional: List[str] = []
    for token in raw_args:
        key, eq, value = token.partition("=")
        if eq and key.strip().isidentifier():
            args[key.strip()] = value.strip()
        else:
            positional.append(token)
    if positional:
        try:
            schema = registry.spec(name).arg_schema
        except Exception:
            schema = tuple()
        names = [n for n, _, _ in schema if n not in args]
        for value, arg_name in zip(positional, names):
            args[arg_name] = value
        # surplus positionals are kept under numbered keys so validation
        # can name the offender instead of silently dropping it
        for i, value in enumerate(positional[len(names):]):
            args[f"arg{i + len(names)}"] = value
    return ToolCall(name=name, args=args, call_id=call_id), False


@dataclass
class LoopTurn:
    """One exchange: the model reply plus the tool call it triggered, if any."""

    response: str
    tool_call: Optional[ToolCall] = None
    tool_result: Optional[ToolResult] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        doc: dict = {"response": self.response}
        if self.tool_call is not None:
            doc["tool_call"] = self.tool_call.to_dict()
        if self.tool_result is not None:
            doc["tool_result"] = self.tool_result.to_dict()
        if self.error is not None:
            doc["error"] = self.error
        return doc


@dataclass
class LoopOutcome:
    final_text: str
    trace: List[LoopTurn] = field(default_factory=list)
    budget_exhausted: bool = False
    marker_hit: bool = False

    @property
    def tool_calls(self) -> int:
        """Dispatched calls only; a selection denied by the budget has a
        recorded tool_call but no tool_result."""
        return sum(1 for turn in self.trace if turn.tool_result is not None)


def tool_loop(
    llm: LlmClient,
    registry: ToolRegistry,
    runtime: ToolRuntime,
    system_prompt: str,
    user_context: str,
    budget: int,
    tag: str = "tool_loop",
    stop_marker: Optional[str] = None,
) -> LoopOutcome:
    """Run the select/dispatch cycle. Dispatch errors feed back into the
    conversation as error results; completion errors are recorded in the
    trace and re-raised for the caller to handle. A reply containing
    ``stop_marker`` ends the loop immediately (marker_hit=True)."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    messages: List[Message] = [
        Message("system", system_prompt),
        Message("user", user_context),
    ]
    trace: List[LoopTurn] = []
    calls = 0
    nudged = False
    ids = itertools.count(1)
    while True:
        try:
            response = llm.complete(ChatRequest(tuple(messages), tag=tag)).text
        except LlmUnavailable as exc:
            trace.append(LoopTurn(response="", error=f"LlmUnavailable: {exc}"))
            raise
        if stop_marker is not None and stop_marker in response:
            trace.append(LoopTurn(response=response))
            return LoopOutcome(
                final_text=response, trace=trace, budget_exhausted=False, marker_hit=True
            )
        call, is_final = parse_selected_tool(response, registry, f"c{next(ids):03d}")
        if is_final:
            trace.append(LoopTurn(response=response))
            return LoopOutcome(final_text=response, trace=trace, budget_exhausted=False)
        if call is None:
            trace.append(LoopTurn(response=response, error="no tool selected"))
            if nudged:
                return LoopOutcome(final_text=response, trace=trace, budget_exhausted=True)
            nudged = True
            messages.append(Message("assistant", response))
            messages.append(
                Message(
                    "user",
                    "Reply with either 'Selected tool: [Tool_Name(arguments)]' or "
                    "'Selected tool: [Final_Verification]'.",
                )
            )
            continue
        if calls >= budget:
            trace.append(LoopTurn(response=response, tool_call=call))
            return LoopOutcome(final_text=response, trace=trace, budget_exhausted=True)
        result = registry.dispatch(call, runtime)
        calls += 1
        trace.append(LoopTurn(response=response, tool_call=call, tool_result=result))
        messages.append(Message("assistant", response))
        messages.append(
            Message(
                "user",
                "Tool result:\n" + json.dumps(result.to_dict(), sort_keys=True)
                + "\n\nSelect the next tool, or request 'Selected tool: [Final_Verification]'.",
            )
        )
