"""Gold annotation records and prediction records (line-delimited JSON)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from ..errors import ConfigError

_KNOWLEDGE_CODES = {
    "c": "commonsense",
    "m": "medical",
    "none": "none",
    "commonsense": "commonsense",
    "medical": "medical",
}


@dataclass
class GoldAnnotation:
    note_id: str
    entity: str
    line: int
    label: str  # consistent | inconsistent
    evidence_row_ids: List[str] = field(default_factory=list)
    knowledge_kind: str = "none"
    medical_knowledge_source: Optional[str] = None
    consistency_check_path: Optional[str] = None
    note_type: Optional[str] = None

    def __post_init__(self) -> None:
        self.label = self.label.strip().casefold()
        if self.label not in ("consistent", "inconsistent"):
            raise ConfigError(f"gold label must be binary, got {self.label!r}")
        if self.knowledge_kind not in ("commonsense", "medical", "none"):
            raise ConfigError(f"bad knowledge kind {self.knowledge_kind!r}")

    def render(self) -> str:
        rows = ", ".join(self.evidence_row_ids) or "none"
        return (
            f"entity: {self.entity} (line {self.line})\n"
            f"label: {self.label}\n"
            f"evidence_row_ids: {rows}"
        )


@dataclass
class PredictionRecord:
    note_id: str
    entity: str
    line: int
    label: Optional[str]
    note_type: Optional[str] = None
    reason: str = ""
    evidence_row_ids: List[str] = field(default_factory=list)
    cache_hit: bool = False

    def render(self) -> str:
        return (
            f"entity: {self.entity} (line {self.line}) -> {self.label or 'aborted'}; "
            f"reason: {self.reason or '-'}"
        )


@dataclass
class GoldTotals:
    entities: int = 0
    consistent: int = 0
    inconsistent: int = 0
    by_note: Dict[str, int] = field(default_factory=dict)

    def summary_lines(self) -> List[str]:
        return [
            f"entities: {self.entities}",
            f"consistent: {self.consistent}",
            f"inconsistent: {self.inconsistent}",
            f"notes: {len(self.by_note)}",
        ]


def load_gold(path: Path | str) -> tuple[List[GoldAnnotation], GoldTotals]:
    """Load gold JSONL; totals come back alongside for cross-checking against
    published dataset counts."""
    items: List[GoldAnnotation] = []
    totals = GoldTotals()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{line_no}: bad JSON: {exc}")
            kind_raw = str(
                doc.get("knowledge_kind", doc.get("commonsense_medical_none", "none"))
            ).casefold()
            kind = _KNOWLEDGE_CODES.get(kind_raw)
            if kind is None:
                raise ConfigError(f"{path}:{line_no}: bad knowledge kind {kind_raw!r}")
            item = GoldAnnotation(
                note_id=str(doc["note_id"]),
                entity=str(doc["entity"]),
                line=int(doc.get("line", 0)),
                label=str(doc["label"]),
                evidence_row_ids=[str(r) for r in doc.get("evidence_row_ids", [])],
                knowledge_kind=kind,
                medical_knowledge_source=doc.get("medical_knowledge_source"),
                consistency_check_path=doc.get("consistency_check_path"),
                note_type=doc.get("note_type"),
            )
            # only omission-type inconsistencies may carry no evidence rows
            if item.label == "consistent" and not item.evidence_row_ids:
                raise ConfigError(
                    f"{path}:{line_no}: consistent item {item.entity!r} lacks evidence rows"
                )
            items.append(item)
            totals.entities += 1
            if item.label == "consistent":
                totals.consistent += 1
            else:
                totals.inconsistent += 1
            totals.by_note[item.note_id] = totals.by_note.get(item.note_id, 0) + 1
    return items, totals


def load_predictions(path: Path | str) -> List[PredictionRecord]:
    records: List[PredictionRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{line_no}: bad JSON: {exc}")
            records.append(
                PredictionRecord(
                    note_id=str(doc["note_id"]),
                    entity=str(doc["entity"]),
                    line=int(doc.get("line", 0)),
                    label=doc.get("label"),
                    note_type=doc.get("note_type"),
                    reason=doc.get("reason", ""),
                    evidence_row_ids=[str(r) for r in doc.get("evidence_row_ids", [])],
                    cache_hit=bool(doc.get("cache_hit", False)),
                )
            )
    return records
