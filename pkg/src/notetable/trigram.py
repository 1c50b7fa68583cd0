"""Character-trigram term-frequency vectors and cosine scoring over label sets.

Labels are lowercased, whitespace-collapsed and padded with one space on each
side before trigram extraction. The per-label vectors are packed CSR-style so
the scoring loop can run in the compiled kernel.
"""
from __future__ import annotations

import math
from collections import Counter
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from . import _kernels


def trigrams(text: str) -> Counter:
    padded = " " + " ".join(text.split()).casefold() + " "
    if len(padded) < 3:
        return Counter()
    return Counter(padded[i : i + 3] for i in range(len(padded) - 2))


def cosine(a: str, b: str) -> float:
    """Plain two-string trigram cosine (convenience; index path below)."""
    va = trigrams(a)
    vb = trigrams(b)
    if not va or not vb:
        return 0.0
    dot = sum(c * vb.get(t, 0) for t, c in va.items())
    na = math.sqrt(sum(c * c for c in va.values()))
    nb = math.sqrt(sum(c * c for c in vb.values()))
    return dot / (na * nb) if dot else 0.0


class TrigramIndex:
    """Packed trigram vectors for a fixed label list."""

    def __init__(self, labels: Sequence[str]) -> None:
        self.labels: List[str] = list(labels)
        self._vocab: Dict[str, int] = {}
        ids_parts: List[np.ndarray] = []
        count_parts: List[np.ndarray] = []
        indptr = np.zeros(len(self.labels) + 1, dtype=np.int64)
        norms = np.zeros(len(self.labels), dtype=np.float64)
        total = 0
        for j, label in enumerate(self.labels):
            vec = trigrams(label)
            pairs = sorted(
                (self._vocab.setdefault(t, len(self._vocab)), float(c))
                for t, c in vec.items()
            )
            ids_parts.append(np.fromiter((p[0] for p in pairs), dtype=np.int32, count=len(pairs)))
            count_parts.append(np.fromiter((p[1] for p in pairs), dtype=np.float64, count=len(pairs)))
            total += len(pairs)
            indptr[j + 1] = total
            norms[j] = math.sqrt(sum(c * c for _, c in pairs))
        self._ids = (
            np.concatenate(ids_parts) if ids_parts else np.empty(0, dtype=np.int32)
        )
        self._counts = (
            np.concatenate(count_parts) if count_parts else np.empty(0, dtype=np.float64)
        )
        self._indptr = indptr
        self._norms = norms

    def __len__(self) -> int:
        return len(self.labels)

    def _query_vector(self, text: str) -> Tuple[np.ndarray, np.ndarray, float]:
        vec = trigrams(text)
        # the norm covers every query trigram, including ones no label has
        norm = math.sqrt(sum(c * c for c in vec.values()))
        pairs = sorted(
            (self._vocab[t], float(c)) for t, c in vec.items() if t in self._vocab
        )
        ids = np.fromiter((p[0] for p in pairs), dtype=np.int32, count=len(pairs))
        counts = np.fromiter((p[1] for p in pairs), dtype=np.float64, count=len(pairs))
        return ids, counts, norm

    def score(self, variants: Iterable[str]) -> np.ndarray:
        """Per-label max cosine over the query variants."""
        best = np.zeros(len(self.labels), dtype=np.float64)
        scratch = np.zeros(len(self.labels), dtype=np.float64)
        for text in variants:
            ids, counts, norm = self._query_vector(text)
            if norm == 0.0:
                continue
            _kernels.score_labels(
                ids, counts, norm, self._ids, self._counts, self._indptr, self._norms, scratch
            )
            np.maximum(best, scratch, out=best)
        return best
