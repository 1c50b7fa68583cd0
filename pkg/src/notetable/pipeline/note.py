"""Clinical note input format and segment/anchor types."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from ..errors import ConfigError
from ..temporal import TimePoint, parse_time_point

NOTE_TYPES = ("discharge", "physician", "nursing")


@dataclass
class ClinicalNote:
    note_id: str
    note_type: str
    patient_id: str
    admission_id: str
    lines: List[str]
    chart_time: Optional[TimePoint] = None
    # optional explicit admission frame (overrides the admissions table)
    admit_time: Optional[TimePoint] = None
    discharge_time: Optional[TimePoint] = None

    def __post_init__(self) -> None:
        if self.note_type not in NOTE_TYPES:
            raise ConfigError(
                f"note_type must be one of {NOTE_TYPES}, got {self.note_type!r}"
            )
        if not self.lines:
            raise ConfigError("note has no lines")

    def numbered(self, start: int = 0, end: Optional[int] = None) -> str:
        """Line-numbered text for prompts; ``end`` is inclusive."""
        end = len(self.lines) - 1 if end is None else min(end, len(self.lines) - 1)
        return "\n".join(f"{i}: {self.lines[i]}" for i in range(start, end + 1))

    def context_window(self, line: int, radius: int = 2) -> str:
        lo = max(0, line - radius)
        hi = min(len(self.lines) - 1, line + radius)
        return self.numbered(lo, hi)


def load_note(path: Path | str) -> ClinicalNote:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("note_id", "note_type", "patient_id", "admission_id", "text"):
        if key not in doc:
            raise ConfigError(f"note file missing field {key!r}")
    def tp(key: str) -> Optional[TimePoint]:
        return parse_time_point(doc[key]) if doc.get(key) else None

    return ClinicalNote(
        note_id=str(doc["note_id"]),
        note_type=doc["note_type"],
        patient_id=str(doc["patient_id"]),
        admission_id=str(doc["admission_id"]),
        lines=str(doc["text"]).split("\n"),
        chart_time=tp("chart_time"),
        admit_time=tp("admit_time"),
        discharge_time=tp("discharge_time"),
    )


@dataclass(frozen=True)
class Segment:
    start_line: int
    end_line: int  # inclusive
    index: int = 0

    def __post_init__(self) -> None:
        if self.start_line < 0 or self.end_line < self.start_line:
            raise ValueError(f"bad segment ({self.start_line}, {self.end_line})")


@dataclass(frozen=True)
class TemporalAnchor:
    date: TimePoint
    description: str

    def render(self) -> str:
        return f"- {self.date} - {self.description}"
