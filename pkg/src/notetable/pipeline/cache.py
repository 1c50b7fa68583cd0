"""Per-note validation cache: a FIFO sliding window of recent verdicts.

Entries are injected into the verification prompt so the model can declare
coverage instead of re-querying the tables; a deterministic exact-match
pre-check short-circuits identical (name, time) repeats without any LLM call.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional

from ..util import collapse_key

DEFAULT_CAPACITY = 5


@dataclass
class CacheEntry:
    entity_name: str
    temporal_context: str
    summary: str
    evidence_row_ids: List[str]
    label: str  # Consistent | Inconsistent
    subtype: Optional[str] = None

    def render(self) -> str:
        rows = ", ".join(self.evidence_row_ids) if self.evidence_row_ids else "none"
        verdict = self.label + (f" ({self.subtype})" if self.subtype else "")
        return (
            f"- {self.entity_name} @ {self.temporal_context} -> {verdict}; "
            f"{self.summary}; evidence rows: {rows}"
        )


class ValidationCache:
    def __init__(self, capacity: int = DEFAULT_CAPACITY) -> None:
        if capacity < 1:
            raise ValueError("cache capacity must be >= 1")
        self.capacity = capacity
        self._entries: Deque[CacheEntry] = deque()

    def __len__(self) -> int:
        return len(self._entries)

    def insert(self, entry: CacheEntry) -> None:
        """FIFO append; the oldest entry falls out beyond capacity."""
        if len(self._entries) >= self.capacity:
            self._entries.popleft()
        self._entries.append(entry)

    def snapshot(self) -> List[CacheEntry]:
        """Entries in insertion order, oldest first."""
        return list(self._entries)

    def clear(self) -> None:
        self._entries.clear()

    def find_by_name(self, name: str) -> Optional[CacheEntry]:
        """Most recent entry whose entity name matches (normalized)."""
        key = collapse_key(name)
        for entry in reversed(self._entries):
            if collapse_key(entry.entity_name) == key:
                return entry
        return None

    def most_recent(self) -> Optional[CacheEntry]:
        return self._entries[-1] if self._entries else None

    def find_exact(self, name: str, temporal_context: str) -> Optional[CacheEntry]:
        """Identical (name, time) pre-check used to skip the LLM entirely."""
        name_key = collapse_key(name)
        time_key = collapse_key(temporal_context)
        for entry in reversed(self._entries):
            if (
                collapse_key(entry.entity_name) == name_key
                and collapse_key(entry.temporal_context) == time_key
            ):
                return entry
        return None

    def render_for_prompt(self) -> str:
        if not self._entries:
            return "(cache empty)"
        return "\n".join(entry.render() for entry in self._entries)
