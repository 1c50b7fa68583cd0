"""Tool-augmented verification of one entity against the tables.

Flow: deterministic cache pre-check -> agent loop (cache entries injected, so
the model may declare coverage instead of calling tools) -> final-verification
prompt over the retrieved rows -> per-claim parse -> verdict aggregation ->
cache insertion.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from ..errors import (
    LlmUnavailable,
    MalformedLlmOutput,
    UnparseableVerdict,
)
from ..llm import (
    LlmClient,
    LoopTurn,
    ask_structured,
    load_template,
    render_prompt,
    tool_loop,
)
from ..temporal import format_time_query
from ..tools import ToolRegistry, ToolRuntime
from ..util import collapse_key
from .cache import CacheEntry, ValidationCache
from .entities import CandidateEntity
from .note import ClinicalNote, Segment

logger = logging.getLogger(__name__)

CONSISTENT = "Consistent"
INCONSISTENT = "Inconsistent"
CONTRADICTORY = "ContradictoryEvidence"
MISSING = "InformationMissing"

CACHE_SKIP_MARKER = "Consistency check was already completed"
_COVERED_BY_RE = re.compile(r"Covered by:\s*(.+)", re.IGNORECASE)
_STATUS_RE = re.compile(r"Consistency status:\s*(Consistent|Inconsistent)", re.IGNORECASE)
_SUBTYPE_RE = re.compile(
    r"Inconsistency type:\s*(Contradictory Evidence|Information Missing)", re.IGNORECASE
)
_REASON_RE = re.compile(r"Reason:\s*(.+)")
_EVIDENCE_RE = re.compile(r"Evidence index:\s*(.*)")


@dataclass
class Claim:
    fact: str
    status: str
    reason: str
    evidence_row_ids: List[str] = field(default_factory=list)
    declared_subtype: Optional[str] = None

    def to_dict(self) -> dict:
        doc = {
            "fact": self.fact,
            "status": self.status,
            "reason": self.reason,
            "evidence_row_ids": list(self.evidence_row_ids),
        }
        if self.declared_subtype:
            doc["declared_subtype"] = self.declared_subtype
        return doc


@dataclass
class VerificationResult:
    entity: CandidateEntity
    label: Optional[str] = None  # Consistent | Inconsistent | None on abort
    inconsistency_subtype: Optional[str] = None
    reason: str = ""
    evidence_row_ids: List[str] = field(default_factory=list)
    claims: List[Claim] = field(default_factory=list)
    tool_trace: List[LoopTurn] = field(default_factory=list)
    cache_hit: bool = False
    budget_exhausted: bool = False
    error: Optional[str] = None
    flags: Set[str] = field(default_factory=set)

    def to_dict(self) -> dict:
        return {
            "entity": self.entity.name,
            "line": self.entity.line,
            "source": self.entity.source,
            "linked_items": list(self.entity.linked_items),
            "associated_values": list(self.entity.associated_values),
            "time": format_time_query(self.entity.resolved_time)
            if self.entity.resolved_time
            else None,
            "label": self.label,
            "inconsistency_subtype": self.inconsistency_subtype,
            "reason": self.reason,
            "evidence_row_ids": list(self.evidence_row_ids),
            "claims": [c.to_dict() for c in self.claims],
            "cache_hit": self.cache_hit,
            "budget_exhausted": self.budget_exhausted,
            "error": self.error,
            "flags": sorted(self.flags),
            "tool_trace": [turn.to_dict() for turn in self.tool_trace],
        }


def parse_final_verification(text: str, known_row_ids: Set[str]) -> List[Claim]:
    """Split the reply into 'Single Fact' blocks; cited row ids are filtered
    to ones that really exist."""
    chunks = re.split(r"Single Fact:", text)[1:]
    claims: List[Claim] = []
    for chunk in chunks:
        fact = chunk.splitlines()[0].strip() if chunk.splitlines() else ""
        status_m = _STATUS_RE.search(chunk)
        if not status_m:
            continue
        status = status_m[1].capitalize()
        reason_m = _REASON_RE.search(chunk)
        subtype_m = _SUBTYPE_RE.search(chunk)
        declared = None
        if subtype_m:
            declared = (
                CONTRADICTORY
                if subtype_m[1].casefold().startswith("contradictory")
                else MISSING
            )
        evidence: List[str] = []
        evidence_m = _EVIDENCE_RE.search(chunk)
        if evidence_m:
            for token in re.split(r"[,\s]+", evidence_m[1].strip()):
                token = token.strip().strip(".;")
                if token and token in known_row_ids:
                    evidence.append(token)
        claims.append(
            Claim(
                fact=fact,
                status=status,
                reason=reason_m[1].strip() if reason_m else "",
                evidence_row_ids=evidence,
                declared_subtype=declared,
            )
        )
    if not claims:
        raise UnparseableVerdict("no claim blocks in final verification reply")
    return claims


def aggregate_claims(claims: Sequence[Claim]) -> Tuple[str, Optional[str], str, List[str]]:
    """Entity verdict from claim verdicts.

    Consistent only when every claim is; the subtype is ContradictoryEvidence
    when any inconsistent claim actually cites rows, else InformationMissing.
    """
    label = CONSISTENT if all(c.status == CONSISTENT for c in claims) else INCONSISTENT
    subtype = None
    if label == INCONSISTENT:
        cites = any(
            c.status == INCONSISTENT and c.evidence_row_ids for c in claims
        )
        subtype = CONTRADICTORY if cites else MISSING
    reasons = "; ".join(c.reason for c in claims if c.reason)
    evidence: List[str] = []
    for c in claims:
        for row_id in c.evidence_row_ids:
            if row_id not in evidence:
                evidence.append(row_id)
    return label, subtype, reasons, evidence


def _rows_in_trace(trace: Sequence[LoopTurn]) -> List[dict]:
    rows: List[dict] = []
    seen: Set[str] = set()
    for turn in trace:
        if turn.tool_result is None or turn.tool_result.status != "ok":
            continue
        payload = turn.tool_result.payload
        groups = payload.get("groups", [])
        candidates = payload.get("rows", []) + [
            row for group in groups for row in group.get("rows", [])
        ]
        for row in candidates:
            row_id = row.get("row_id")
            if row_id and row_id not in seen:
                seen.add(row_id)
                rows.append(row)
    return rows


def _render_evidence_table(rows: Sequence[dict]) -> str:
    if not rows:
        return "(no rows retrieved)"
    lines = []
    for row in rows:
        value = row.get("value")
        unit = row.get("unit")
        shown = f"{value} {unit}".strip() if value is not None else "-"
        lines.append(
            f"{row['row_id']} | {row.get('table', '-')} | {row.get('time') or '-'} | "
            f"{row.get('item') or '-'} | {shown}"
        )
    return "\n".join(lines)


def _summary_from_claims(claims: Sequence[Claim], entity: CandidateEntity) -> str:
    if claims:
        parts = [f"{c.fact or entity.name}: {c.status}" for c in claims]
        return "; ".join(parts)
    values = ", ".join(entity.associated_values) or "no stated values"
    return f"attributes: {values}"


def verify_entity(
    entity: CandidateEntity,
    cache: ValidationCache,
    runtime: ToolRuntime,
    registry: ToolRegistry,
    llm: LlmClient,
    note: ClinicalNote,
    segment: Segment,
    budget: int,
    templates_dir=None,
    dataset_row_ids: Optional[Set[str]] = None,
) -> VerificationResult:
    """Verify one scope-filtered entity; see module docstring for the flow."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    result = VerificationResult(entity=entity)
    time_text = (
        format_time_query(entity.resolved_time) if entity.resolved_time else "(unknown)"
    )

    # deterministic short-circuit for identical (name, time) repeats
    exact = cache.find_exact(entity.name, time_text)
    if exact is not None:
        result.cache_hit = True
        result.label = exact.label
        result.inconsistency_subtype = exact.subtype
        result.reason = f"Identical to cached validation of {exact.entity_name}: {exact.summary}"
        result.evidence_row_ids = list(exact.evidence_row_ids)
        return result

    system_prompt = render_prompt(load_template("tool_system", templates_dir), {})
    user_context = render_prompt(
        load_template("tool_call", templates_dir),
        {
            "LINE_NUMBER": str(entity.line),
            "ENTITY": entity.name,
            "VALUES": ", ".join(entity.associated_values) or "(none)",
            "TIME": time_text,
            "CLINICAL_NOTE": note.numbered(segment.start_line, segment.end_line),
            "CACHE_ENTRIES": cache.render_for_prompt(),
        },
    )

    try:
        outcome = tool_loop(
            llm,
            registry,
            runtime,
            system_prompt,
            user_context,
            budget,
            tag="verify_entity",
            stop_marker=CACHE_SKIP_MARKER,
        )
    except LlmUnavailable as exc:
        result.error = f"LlmUnavailable: {exc}"
        return result
    result.tool_trace = outcome.trace
    result.budget_exhausted = outcome.budget_exhausted

    if outcome.marker_hit:
        entry = None
        m = _COVERED_BY_RE.search(outcome.final_text)
        if m:
            entry = cache.find_by_name(m[1].strip().strip(".'\""))
        if entry is None:
            entry = cache.most_recent()
        if entry is not None:
            result.cache_hit = True
            result.label = entry.label
            result.inconsistency_subtype = entry.subtype
            result.reason = (
                f"Covered by cached validation of {entry.entity_name}: {entry.summary}"
            )
            result.evidence_row_ids = list(entry.evidence_row_ids)
            cache.insert(
                CacheEntry(
                    entity_name=entity.name,
                    temporal_context=time_text,
                    summary=entry.summary,
                    evidence_row_ids=list(entry.evidence_row_ids),
                    label=entry.label,
                    subtype=entry.subtype,
                )
            )
            return result
        logger.warning(
            "entity %r declared cache coverage but the cache is empty", entity.name
        )

    rows = _rows_in_trace(outcome.trace)
    known_ids = {row["row_id"] for row in rows}
    if dataset_row_ids is not None:
        known_ids &= dataset_row_ids
    final_prompt = render_prompt(
        load_template("final_verification", templates_dir),
        {
            "ENTITY": entity.name,
            "CLAIM_CONTEXT": f"{entity.line}: {note.lines[entity.line]}"
            if 0 <= entity.line < len(note.lines)
            else entity.name,
            "EVIDENCE_TABLE": _render_evidence_table(rows),
        },
    )
    try:
        claims, _ = ask_structured(
            llm,
            final_prompt,
            lambda t: parse_final_verification(t, known_ids),
            tag="final_verification",
        )
    except (MalformedLlmOutput, UnparseableVerdict):
        result.label = INCONSISTENT
        result.inconsistency_subtype = MISSING
        result.reason = "final verification reply could not be parsed"
        result.flags.add("unparsed")
        claims = []
    except LlmUnavailable as exc:
        result.error = f"LlmUnavailable: {exc}"
        return result

    if claims:
        label, subtype, reason, evidence = aggregate_claims(claims)
        result.claims = list(claims)
        result.label = label
        result.inconsistency_subtype = subtype
        result.reason = reason
        result.evidence_row_ids = evidence

    cache.insert(
        CacheEntry(
            entity_name=entity.name,
            temporal_context=time_text,
            summary=_summary_from_claims(result.claims, entity),
            evidence_row_ids=list(result.evidence_row_ids),
            label=result.label or INCONSISTENT,
            subtype=result.inconsistency_subtype,
        )
    )
    return result
