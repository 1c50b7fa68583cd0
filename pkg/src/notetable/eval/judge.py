"""LLM-as-a-judge matching: Harsh (verdict must match gold) and Lenient
(defensible alternative reasoning also counts)."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence

from ..errors import LlmUnavailable, MalformedLlmOutput
from ..llm import LlmClient, ask_structured, load_template, render_prompt
from .gold import GoldAnnotation, PredictionRecord

logger = logging.getLogger(__name__)

MODES = ("harsh", "lenient")
_RESULT_RE = re.compile(r"Result:\s*\(?\s*(Correct|Incorrect)\s*\)?", re.IGNORECASE)
_REASON_RE = re.compile(r"Reason:\s*\(?(.*?)\)?\s*$", re.MULTILINE)


@dataclass
class JudgeVerdict:
    gold_entity: str
    gold_line: int
    verdict: str  # Correct | Incorrect
    reason: str
    mode: str
    flags: List[str]

    def to_dict(self) -> dict:
        return {
            "gold_entity": self.gold_entity,
            "gold_line": self.gold_line,
            "verdict": self.verdict,
            "reason": self.reason,
            "mode": self.mode,
            "flags": list(self.flags),
        }


def parse_judge_reply(text: str) -> tuple:
    m = _RESULT_RE.search(text)
    if not m:
        raise MalformedLlmOutput("no 'Result: (Correct or Incorrect)' line")
    reason_m = _REASON_RE.search(text)
    return m[1].capitalize(), (reason_m[1].strip() if reason_m else "")


def judge(
    gold_item: GoldAnnotation,
    predictions: Sequence[PredictionRecord],
    mode: str,
    llm: LlmClient,
    templates_dir=None,
) -> JudgeVerdict:
    """Judge one gold item against the full prediction set.

    Cache-skipped predictions are presented under their own heading so the
    judge credits them per the protocol. An unparseable reply (after one
    re-ask) degrades to Incorrect with a flag.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if llm is None:
        raise LlmUnavailable("judge modes require an LLM backend")
    verified = [p for p in predictions if not p.cache_hit]
    skipped = [p for p in predictions if p.cache_hit]
    prompt = render_prompt(
        load_template(f"judge_{mode}", templates_dir),
        {
            "GOLD_ITEM": gold_item.render(),
            "PREDICTIONS": "\n".join(p.render() for p in verified) or "(none)",
            "CACHE_SKIPS": "\n".join(p.render() for p in skipped) or "(none)",
        },
    )
    flags: List[str] = []
    try:
        (verdict, reason), _ = ask_structured(
            llm, prompt, parse_judge_reply, tag=f"judge_{mode}"
        )
    except MalformedLlmOutput:
        logger.warning("judge reply unparseable for %r", gold_item.entity)
        verdict, reason = "Incorrect", "judge reply could not be parsed"
        flags.append("unparsed")
    return JudgeVerdict(
        gold_entity=gold_item.entity,
        gold_line=gold_item.line,
        verdict=verdict,
        reason=reason,
        mode=mode,
        flags=flags,
    )
