"""Two-path entity extraction: patient-record guided and ontology guided."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from ..errors import MalformedLlmOutput
from ..llm import LlmClient, ask_structured, load_template, render_prompt
from ..ontology import Ontology, candidate_items, select_groups, select_subgroups
from ..temporal import TimeQuery
from ..util import collapse_key
from .note import ClinicalNote, Segment

logger = logging.getLogger(__name__)

_PATIENT_LINE_RE = re.compile(
    r"^\s*Line number\s+(\d+)\.\s*(.+?):\s*\[(.*?)\]\s*-\s*\[(.*?)\]\s*$"
)
_ONTOLOGY_LINE_RE = re.compile(
    r"^\s*Line number\s+(\d+)\.\s*(.+?)\s*-\s*\((.*?)\)\s*-\s*\((.*?)\)\s*$"
)
_EMPTY_ANSWERS = ("", "none", "(none)", "none.", "no entities", "no entities.")


@dataclass
class CandidateEntity:
    """A note mention alignable to table items; the unit of verification."""

    name: str
    line: int
    associated_values: List[str] = field(default_factory=list)
    linked_items: List[str] = field(default_factory=list)
    source: str = "patient"  # patient | ontology
    resolved_time: Optional[TimeQuery] = None
    status: Optional[str] = None
    exclusion_flags: Set[str] = field(default_factory=set)
    info_flags: Set[str] = field(default_factory=set)
    segment_index: int = 0

    @property
    def key(self) -> Tuple[str, int]:
        return (collapse_key(self.name), self.line)


def _split_list(text: str) -> List[str]:
    return [part.strip().strip("'\"") for part in text.split(",") if part.strip().strip("'\"")]


def _parse_extraction(text: str, pattern: re.Pattern) -> List[Tuple[int, str, List[str], List[str]]]:
    if text.strip().casefold() in _EMPTY_ANSWERS:
        return []
    rows = []
    for line in text.splitlines():
        m = pattern.match(line)
        if m:
            rows.append((int(m[1]), m[2].strip(), _split_list(m[3]), _split_list(m[4])))
    if not rows:
        raise MalformedLlmOutput("no extraction lines in response")
    return rows


def render_profiles(profiles: Dict[str, List[str]]) -> str:
    lines = []
    for label in sorted(profiles):
        values = ", ".join(f"'{v}'" for v in profiles[label])
        lines.append(f"{label}: [{values}]")
    return "\n".join(lines) if lines else "(none)"


def extract_patient_entities(
    note: ClinicalNote,
    segment: Segment,
    patient_labels: Set[str],
    profiles: Dict[str, List[str]],
    llm: LlmClient,
    templates_dir=None,
) -> List[CandidateEntity]:
    """Extraction against the patient's own item set; linked items outside
    that set are stripped (and the entity dropped when nothing remains)."""
    if not patient_labels:
        return []
    canonical = {collapse_key(l): l for l in patient_labels}
    template = load_template("patient_extraction", templates_dir)
    prompt = render_prompt(
        template,
        {
            "PREDEFINED_VALUES": render_profiles(profiles),
            "CLINICAL_NOTE": note.numbered(segment.start_line, segment.end_line),
        },
    )
    try:
        rows, _ = ask_structured(
            llm,
            prompt,
            lambda t: _parse_extraction(t, _PATIENT_LINE_RE),
            tag="extract_patient",
        )
    except MalformedLlmOutput:
        logger.warning(
            "note %s segment %d: unusable patient extraction", note.note_id, segment.index
        )
        return []
    out: List[CandidateEntity] = []
    for line, name, values, items in rows:
        kept = [canonical[collapse_key(i)] for i in items if collapse_key(i) in canonical]
        if not kept:
            logger.info("dropping %r: linked items %s outside patient record", name, items)
            continue
        out.append(
            CandidateEntity(
                name=name,
                line=line,
                associated_values=values,
                linked_items=kept,
                source="patient",
                segment_index=segment.index,
            )
        )
    return out


def render_already_extracted(entities: Sequence[CandidateEntity]) -> str:
    if not entities:
        return "(none)"
    parts = []
    for e in entities:
        value = e.associated_values[0] if e.associated_values else ""
        recorded = e.linked_items[0] if e.linked_items else ""
        parts.append(f"('{e.name}', '{e.line}', '{value}', '{recorded}')")
    return ",\n".join(parts)


def extract_ontology_entities(
    note: ClinicalNote,
    segment: Segment,
    ontology: Ontology,
    patient_labels: Set[str],
    already_extracted: Sequence[CandidateEntity],
    llm: LlmClient,
    templates_dir=None,
) -> List[CandidateEntity]:
    """Coarse-to-fine: pick groups, then subgroups, then extract against the
    narrowed candidate list, suppressing previously extracted mentions."""
    segment_text = note.numbered(segment.start_line, segment.end_line)
    groups = select_groups(segment_text, ontology, llm, templates_dir)
    if not groups:
        return []
    subgroups = select_subgroups(segment_text, groups, ontology, llm, templates_dir)
    if not subgroups:
        return []
    candidates = candidate_items(subgroups, ontology, patient_labels)
    if not candidates:
        return []
    canonical = {collapse_key(c): c for c in candidates}
    template = load_template("ontology_extraction", templates_dir)
    prompt = render_prompt(
        template,
        {
            "CHECKED_LIST": "(" + ", ".join(candidates) + ")",
            "LAST_EXTRACTED": render_already_extracted(already_extracted),
            "CLINICAL_NOTE": segment_text,
        },
    )
    try:
        rows, _ = ask_structured(
            llm,
            prompt,
            lambda t: _parse_extraction(t, _ONTOLOGY_LINE_RE),
            tag="extract_ontology",
        )
    except MalformedLlmOutput:
        logger.warning(
            "note %s segment %d: unusable ontology extraction", note.note_id, segment.index
        )
        return []
    suppressed = {e.key for e in already_extracted}
    out: List[CandidateEntity] = []
    for line, name, items, values in rows:
        key = (collapse_key(name), line)
        if key in suppressed:
            logger.info("suppressing re-extracted %r (line %d)", name, line)
            continue
        kept = [canonical[collapse_key(i)] for i in items if collapse_key(i) in canonical]
        if not kept:
            logger.info("dropping %r: linked items %s outside candidates", name, items)
            continue
        out.append(
            CandidateEntity(
                name=name,
                line=line,
                associated_values=values,
                linked_items=kept,
                source="ontology",
                segment_index=segment.index,
            )
        )
    return out


def merge_entities(
    patient_entities: Sequence[CandidateEntity],
    ontology_entities: Sequence[CandidateEntity],
) -> List[CandidateEntity]:
    """Union with (normalized name, line) dedup; the patient path wins ties."""
    merged: List[CandidateEntity] = []
    seen: Set[Tuple[str, int]] = set()
    for entity in list(patient_entities) + list(ontology_entities):
        if entity.key in seen:
            continue
        seen.add(entity.key)
        merged.append(entity)
    return merged
