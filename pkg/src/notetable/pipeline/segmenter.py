"""Note segmentation: prompt, parse, and the repair pass.

Raw model output is never trusted: whatever ranges come back are clamped,
ordered, de-overlapped and gap-filled until they partition [0, n-1].
"""
from __future__ import annotations

import logging
import re
from typing import List, Optional, Tuple

from ..errors import MalformedLlmOutput
from ..llm import LlmClient, ask_structured, load_template, render_prompt
from .note import ClinicalNote, Segment

logger = logging.getLogger(__name__)

_RANGE_RE = re.compile(r"^\s*-?\s*(\d+)\s*[-~]\s*(\d+)\s*$")


def parse_segment_ranges(text: str) -> List[Tuple[int, int]]:
    """Pull ``- a-b`` lines out of a segmentation reply."""
    ranges: List[Tuple[int, int]] = []
    for line in text.splitlines():
        m = _RANGE_RE.match(line)
        if m:
            ranges.append((int(m[1]), int(m[2])))
    if not ranges:
        raise MalformedLlmOutput("no '- a-b' ranges in segmentation output")
    return ranges


def repair_segments(ranges: List[Tuple[int, int]], line_count: int) -> List[Segment]:
    """Normalize arbitrary ranges into a partition of [0, line_count-1].

    Steps: clamp into bounds (swapping reversed pairs), sort, force the first
    segment to start at 0, push overlapping starts past the previous end
    (dropping fully-contained ranges), extend the previous segment across
    gaps, and extend the last segment to the final line.
    """
    if line_count < 1:
        raise ValueError("line_count must be >= 1")
    cleaned: List[Tuple[int, int]] = []
    for a, b in ranges:
        if a > b:
            a, b = b, a
        a = max(0, min(a, line_count - 1))
        b = max(0, min(b, line_count - 1))
        cleaned.append((a, b))
    cleaned.sort()
    if not cleaned:
        cleaned = [(0, line_count - 1)]

    result: List[Tuple[int, int]] = []
    for a, b in cleaned:
        if not result:
            result.append((0, b))
            continue
        prev_a, prev_b = result[-1]
        if b <= prev_b:
            continue  # fully contained
        if a <= prev_b:
            a = prev_b + 1
        elif a > prev_b + 1:
            result[-1] = (prev_a, a - 1)
        result.append((a, b))
    last_a, _ = result[-1]
    result[-1] = (last_a, line_count - 1)
    return [Segment(a, b, index=i) for i, (a, b) in enumerate(result)]


def segment_note(
    note: ClinicalNote, llm: LlmClient, templates_dir=None
) -> List[Segment]:
    """LLM segmentation with repair; falls back to one whole-note segment."""
    template = load_template("segmentation", templates_dir)
    prompt = render_prompt(template, {"CLINICAL_NOTE": note.numbered()})
    try:
        ranges, _ = ask_structured(llm, prompt, parse_segment_ranges, tag="segment_note")
    except MalformedLlmOutput:
        logger.warning("note %s: unusable segmentation, using one segment", note.note_id)
        return [Segment(0, len(note.lines) - 1, index=0)]
    return repair_segments(ranges, len(note.lines))
