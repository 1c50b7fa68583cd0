"""The per-note verification pipeline."""

from .anchors import extract_temporal_anchors, parse_anchor_lines
from .cache import CacheEntry, ValidationCache
from .entities import (
    CandidateEntity,
    extract_ontology_entities,
    extract_patient_entities,
    merge_entities,
)
from .note import ClinicalNote, Segment, TemporalAnchor, load_note
from .runner import NoteReport, PipelineConfig, run_pipeline
from .scope import (
    TemporalStatus,
    classify_temporal_status,
    filter_scope,
    parse_questionnaire,
)
from .segmenter import parse_segment_ranges, repair_segments, segment_note
from .verify import (
    Claim,
    VerificationResult,
    aggregate_claims,
    parse_final_verification,
    verify_entity,
)

__all__ = [
    "CacheEntry",
    "CandidateEntity",
    "Claim",
    "ClinicalNote",
    "NoteReport",
    "PipelineConfig",
    "Segment",
    "TemporalAnchor",
    "TemporalStatus",
    "ValidationCache",
    "VerificationResult",
    "aggregate_claims",
    "classify_temporal_status",
    "extract_ontology_entities",
    "extract_patient_entities",
    "extract_temporal_anchors",
    "filter_scope",
    "load_note",
    "merge_entities",
    "parse_anchor_lines",
    "parse_final_verification",
    "parse_questionnaire",
    "parse_segment_ranges",
    "repair_segments",
    "run_pipeline",
    "segment_note",
    "verify_entity",
]
