"""Global temporal-anchor extraction (``- yyyy-mm-dd - Event`` lines)."""
from __future__ import annotations

import logging
import re
from typing import List

from ..llm import LlmClient, load_template, render_prompt
from ..temporal import try_parse_time_point
from .note import ClinicalNote, TemporalAnchor

logger = logging.getLogger(__name__)

_ANCHOR_RE = re.compile(
    r"^\s*-\s*(\d{4}-\d{2}-\d{2}(?:[ T]\d{2}:\d{2}(?::\d{2})?)?)\s*-\s*(.+?)\s*$"
)


def parse_anchor_lines(text: str) -> List[TemporalAnchor]:
    """Anchor lines with invalid dates are dropped, not fatal."""
    anchors: List[TemporalAnchor] = []
    for line in text.splitlines():
        m = _ANCHOR_RE.match(line)
        if not m:
            continue
        tp = try_parse_time_point(m[1])
        if tp is None:
            logger.warning("dropping anchor with invalid date: %s", line.strip())
            continue
        anchors.append(TemporalAnchor(date=tp, description=m[2]))
    return anchors


def extract_temporal_anchors(
    note: ClinicalNote, llm: LlmClient, templates_dir=None
) -> List[TemporalAnchor]:
    template = load_template("temporal_anchors", templates_dir)
    prompt = render_prompt(template, {"CLINICAL_NOTE": "\n".join(note.lines)})
    return parse_anchor_lines(llm.ask(prompt, tag="temporal_anchors"))
