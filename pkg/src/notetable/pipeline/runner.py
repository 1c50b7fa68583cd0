"""End-to-end orchestration of one note's verification run."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

from ..datastore import Dataset, global_value_profile, patient_items
from ..errors import NotetableError
from ..lexicon import AbbreviationLexicon
from ..llm import LlmClient
from ..ontology import Ontology
from ..temporal import format_time_query
from ..tools import REGISTRY, ToolRuntime
from ..util import collapse_key
from .anchors import extract_temporal_anchors
from .cache import ValidationCache
from .entities import (
    CandidateEntity,
    extract_ontology_entities,
    extract_patient_entities,
    merge_entities,
)
from .note import ClinicalNote, Segment, TemporalAnchor
from .scope import (
    DEFAULT_QUESTION_EFFECTS,
    classify_temporal_status,
    default_event_time,
    filter_scope,
)
from .segmenter import segment_note
from .verify import VerificationResult, verify_entity

logger = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    tool_budget: int = 8
    cache_size: int = 5
    top_values_k: int = 10
    top_n: int = 10
    ontology_window: int = 200
    max_result_rows: int = 50
    templates_dir: Optional[str] = None
    question_effects: Dict[int, str] = field(
        default_factory=lambda: dict(DEFAULT_QUESTION_EFFECTS)
    )

    def __post_init__(self) -> None:
        if min(self.tool_budget, self.cache_size, self.top_values_k, self.ontology_window) < 1:
            raise ValueError("budget, cache size, k and window must all be >= 1")


@dataclass
class NoteReport:
    note_id: str
    note_type: str
    segments: List[Segment] = field(default_factory=list)
    anchors: List[TemporalAnchor] = field(default_factory=list)
    patient_entities: List[CandidateEntity] = field(default_factory=list)
    ontology_entities: List[CandidateEntity] = field(default_factory=list)
    merged_entities: List[CandidateEntity] = field(default_factory=list)
    scoped_entities: List[CandidateEntity] = field(default_factory=list)
    removals: Dict[str, int] = field(default_factory=dict)
    results: List[VerificationResult] = field(default_factory=list)
    accounting: Dict[str, object] = field(default_factory=dict)
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    timings_s: Dict[str, float] = field(default_factory=dict)

    def _entity_doc(self, entity: CandidateEntity) -> dict:
        return {
            "name": entity.name,
            "line": entity.line,
            "values": list(entity.associated_values),
            "linked_items": list(entity.linked_items),
            "source": entity.source,
            "status": entity.status,
            "exclusion_flags": sorted(entity.exclusion_flags),
            "time": format_time_query(entity.resolved_time)
            if entity.resolved_time
            else None,
        }

    def to_dict(self, include_timings: bool = False) -> dict:
        """Deterministic report body; wall-clock timings only on request."""
        doc = {
            "note_id": self.note_id,
            "note_type": self.note_type,
            "segments": [[s.start_line, s.end_line] for s in self.segments],
            "anchors": [
                {"date": str(a.date), "description": a.description} for a in self.anchors
            ],
            "counts": {
                "patient_entities": len(self.patient_entities),
                "ontology_entities": len(self.ontology_entities),
                "merged_entities": len(self.merged_entities),
                "scoped_entities": len(self.scoped_entities),
                "verified": len(self.results),
            },
            "entities": {
                "patient": [self._entity_doc(e) for e in self.patient_entities],
                "ontology": [self._entity_doc(e) for e in self.ontology_entities],
                "scoped": [self._entity_doc(e) for e in self.scoped_entities],
            },
            "removals": dict(sorted(self.removals.items())),
            "results": [r.to_dict() for r in self.results],
            "accounting": self.accounting,
            "failed_stage": self.failed_stage,
            "error": self.error,
        }
        if include_timings:
            doc["timings_s"] = dict(self.timings_s)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def entity_records(self) -> List[dict]:
        """One line-delimited record per verified entity (for evaluation)."""
        records = []
        for result in self.results:
            records.append(
                {
                    "note_id": self.note_id,
                    "note_type": self.note_type,
                    "entity": result.entity.name,
                    "line": result.entity.line,
                    "label": result.label,
                    "inconsistency_subtype": result.inconsistency_subtype,
                    "reason": result.reason,
                    "evidence_row_ids": list(result.evidence_row_ids),
                    "cache_hit": result.cache_hit,
                    "budget_exhausted": result.budget_exhausted,
                    "error": result.error,
                }
            )
        return records


def run_pipeline(
    note: ClinicalNote,
    dataset: Dataset,
    llm: LlmClient,
    ontology: Optional[Ontology] = None,
    config: Optional[PipelineConfig] = None,
    lexicon: Optional[AbbreviationLexicon] = None,
) -> NoteReport:
    """Segment, anchor, extract, scope-filter, verify; emit the full report.

    A stage-fatal error leaves a partial report with the failing stage marked.
    """
    config = config or PipelineConfig()
    report = NoteReport(note_id=note.note_id, note_type=note.note_type)
    tdir = config.templates_dir
    stage = "context"
    started = time.monotonic()

    def mark(name: str) -> None:
        nonlocal stage, started
        report.timings_s[stage] = round(time.monotonic() - started, 6)
        stage = name
        started = time.monotonic()

    try:
        ctx = dataset.patient_context(
            note.patient_id,
            note.admission_id,
            note_chart_time=note.chart_time,
            admit_time=note.admit_time,
            discharge_time=note.discharge_time,
        )

        mark("segment")
        report.segments = segment_note(note, llm, tdir)

        mark("anchors")
        report.anchors = extract_temporal_anchors(note, llm, tdir)

        mark("extract_patient")
        p_labels = patient_items(dataset, note.patient_id, note.admission_id)
        profiles = {
            label: global_value_profile(dataset, label, config.top_values_k)
            for label in sorted(p_labels)
        }
        for segment in report.segments:
            report.patient_entities.extend(
                extract_patient_entities(note, segment, p_labels, profiles, llm, tdir)
            )

        mark("extract_ontology")
        if ontology is not None:
            already: List[CandidateEntity] = list(report.patient_entities)
            for segment in report.segments:
                found = extract_ontology_entities(
                    note, segment, ontology, p_labels, already, llm, tdir
                )
                report.ontology_entities.extend(found)
                already.extend(found)

        mark("merge")
        report.merged_entities = merge_entities(
            report.patient_entities, report.ontology_entities
        )

        mark("classify_status")
        for entity in report.merged_entities:
            status, exclusions, event_time = classify_temporal_status(
                entity, report.anchors, note, llm, tdir, config.question_effects
            )
            entity.status = status.value
            entity.exclusion_flags |= exclusions
            entity.resolved_time = event_time or default_event_time(note, ctx)

        mark("filter_scope")
        report.scoped_entities, removed = filter_scope(report.merged_entities)
        report.removals = dict(removed)

        mark("verify")
        runtime = ToolRuntime(
            dataset,
            ctx=ctx,
            llm=llm,
            lexicon=lexicon,
            max_rows=config.max_result_rows,
            top_values_k=config.top_values_k,
        )
        cache = ValidationCache(config.cache_size)
        dataset_row_ids = {r.row_id for rows in dataset.rows.values() for r in rows}
        segment_of = {s.index: s for s in report.segments}
        ordered = sorted(
            report.scoped_entities, key=lambda e: (e.line, collapse_key(e.name))
        )
        for entity in ordered:
            segment = segment_of.get(entity.segment_index, report.segments[0])
            report.results.append(
                verify_entity(
                    entity,
                    cache,
                    runtime,
                    REGISTRY,
                    llm,
                    note,
                    segment,
                    config.tool_budget,
                    tdir,
                    dataset_row_ids,
                )
            )
        mark("done")
    except NotetableError as exc:
        report.failed_stage = stage
        report.error = f"{type(exc).__name__}: {exc}"
        logger.error("note %s failed at stage %s: %s", note.note_id, stage, exc)

    if hasattr(llm, "accounting"):
        report.accounting = llm.accounting.to_dict()
    return report
