"""Temporal status classification and hospital-scope filtering.

The questionnaire's yes answers map onto effects via a configurable table:
``past`` / ``plan`` force the status, ``exclude:<flag>`` keeps the entity
Active but bars it from verification, ``info:<flag>`` is recorded only.
"""
from __future__ import annotations

import enum
import logging
import re
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

from ..errors import MalformedLlmOutput
from ..llm import LlmClient, ask_structured, load_template, render_prompt
from ..temporal import Duration, Exact, TimeQuery, try_parse_time_point
from .note import ClinicalNote, TemporalAnchor
from .entities import CandidateEntity

logger = logging.getLogger(__name__)


class TemporalStatus(enum.Enum):
    PAST = "Past"
    ACTIVE = "Active"
    PLAN = "Plan"


#: question number -> effect of a Yes answer
DEFAULT_QUESTION_EFFECTS: Dict[int, str] = {
    1: "past",              # happened in the ED
    2: "past",              # past medical history
    3: "past",              # earlier hospitalization
    4: "plan",              # future plan / suggestion / recommendation
    5: "exclude:opinion",   # opinion or preference
    6: "past",              # discontinued, timing unclear
    7: "info:diagnosis",    # formal diagnosis (informational only)
    8: "exclude:total_io",  # total intake/output aggregate
    9: "exclude:refusal",   # patient refusal
    10: "exclude:imaging",  # imaging interpretation summary
}

_NUMBER_RE = re.compile(r"(?m)^\s*(\d+)\s*[.)]")
_ANSWER_RE = re.compile(r"Answer:\s*\(?\s*(Yes|No)\b", re.IGNORECASE)
_EVENT_TIME_RE = re.compile(r"Event time:\s*\(?\s*([^\n)]*)", re.IGNORECASE)


def parse_questionnaire(text: str) -> Tuple[Dict[int, bool], Optional[TimeQuery]]:
    """Pair each Answer with the nearest preceding question number."""
    marks: List[Tuple[int, str, str]] = []
    for m in _NUMBER_RE.finditer(text):
        marks.append((m.start(), "q", m[1]))
    for m in _ANSWER_RE.finditer(text):
        marks.append((m.start(), "a", m[1]))
    marks.sort()
    answers: Dict[int, bool] = {}
    current: Optional[int] = None
    for _, kind, value in marks:
        if kind == "q":
            current = int(value)
        elif current is not None:
            answers[current] = value.casefold() == "yes"
    if not answers:
        raise MalformedLlmOutput("no questionnaire answers in response")

    event_time: Optional[TimeQuery] = None
    m = _EVENT_TIME_RE.search(text)
    if m:
        raw = m[1].strip().strip(".")
        if raw and raw.casefold() not in ("unknown", "n/a", "-"):
            if "~" in raw:
                a, _, b = raw.partition("~")
                ta, tb = try_parse_time_point(a), try_parse_time_point(b)
                if ta and tb:
                    event_time = Duration(ta, tb)
            else:
                tp = try_parse_time_point(raw)
                if tp:
                    event_time = Exact(tp)
    return answers, event_time


def apply_effects(
    answers: Dict[int, bool], effects: Dict[int, str]
) -> Tuple[TemporalStatus, set, set]:
    """Fold yes answers into (status, exclusion flags, info flags).

    Past outranks Plan; anything else is Active. Exclusions accumulate
    independently of the status."""
    status = TemporalStatus.ACTIVE
    exclusions = set()
    info = set()
    saw_plan = False
    for number, yes in answers.items():
        if not yes:
            continue
        effect = effects.get(number, "")
        if effect == "past":
            status = TemporalStatus.PAST
        elif effect == "plan":
            saw_plan = True
        elif effect.startswith("exclude:"):
            exclusions.add(effect.split(":", 1)[1])
        elif effect.startswith("info:"):
            info.add(effect.split(":", 1)[1])
    if saw_plan and status is TemporalStatus.ACTIVE:
        status = TemporalStatus.PLAN
    return status, exclusions, info


def classify_temporal_status(
    entity: CandidateEntity,
    anchors: Sequence[TemporalAnchor],
    note: ClinicalNote,
    llm: LlmClient,
    templates_dir=None,
    effects: Optional[Dict[int, str]] = None,
) -> Tuple[TemporalStatus, set, Optional[TimeQuery]]:
    """Run the questionnaire for one entity.

    A doubly-unparseable reply degrades to Active plus the "unclassified"
    exclusion flag (conservative: such entities are not verified).
    """
    template = load_template("scope_filter", templates_dir)
    prompt = render_prompt(
        template,
        {
            "ENTITY": entity.name,
            "NOTE_CONTEXT": note.context_window(entity.line),
            "TEMPORAL_ANCHORS": "\n".join(a.render() for a in anchors) or "(none)",
            "CHART_DATE": str(note.chart_time) if note.chart_time else "(unknown)",
        },
    )
    try:
        (answers, event_time), _ = ask_structured(
            llm, prompt, parse_questionnaire, tag="classify_status"
        )
    except MalformedLlmOutput:
        logger.warning("entity %r: unparseable questionnaire", entity.name)
        return TemporalStatus.ACTIVE, {"unclassified"}, None
    status, exclusions, info = apply_effects(answers, effects or DEFAULT_QUESTION_EFFECTS)
    entity.info_flags |= info
    return status, exclusions, event_time


def default_event_time(note: ClinicalNote, ctx) -> TimeQuery:
    """Without explicit cues, the charting date stands in for the event date;
    failing that, the whole admission span."""
    if note.chart_time is not None:
        return Exact(note.chart_time)
    return Duration(ctx.admit_time, ctx.discharge_time)


def filter_scope(
    entities: Sequence[CandidateEntity],
) -> Tuple[List[CandidateEntity], Counter]:
    """Keep Active entities with no exclusion flags; count removals by reason."""
    kept: List[CandidateEntity] = []
    removed: Counter = Counter()
    for entity in entities:
        if entity.status != TemporalStatus.ACTIVE.value:
            removed[f"status:{entity.status}"] += 1
        elif entity.exclusion_flags:
            for flag in sorted(entity.exclusion_flags):
                removed[f"flag:{flag}"] += 1
        else:
            kept.append(entity)
    return kept, removed
