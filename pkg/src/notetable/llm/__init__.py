"""LLM access layer: templates, client contract, scripted mock, agent loop."""

from .client import (
    Accounting,
    ChatRequest,
    ChatResponse,
    HttpLlm,
    LlmClient,
    Message,
    ask_structured,
)
from .loop import LoopOutcome, LoopTurn, parse_selected_tool, tool_loop
from .scripted import ScriptedLlm, ScriptRule
from .templates import PromptTemplate, list_templates, load_template, render_prompt

__all__ = [
    "Accounting",
    "ChatRequest",
    "ChatResponse",
    "HttpLlm",
    "LlmClient",
    "LoopOutcome",
    "LoopTurn",
    "Message",
    "PromptTemplate",
    "ScriptRule",
    "ScriptedLlm",
    "ask_structured",
    "list_templates",
    "load_template",
    "parse_selected_tool",
    "render_prompt",
    "tool_loop",
]
