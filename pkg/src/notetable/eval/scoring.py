"""Per-note recall/precision/F1 and macro aggregation.

Recall = correctly classified entities / gold entities; precision divides by
the number of entities the framework recognized. Degenerate denominators give
0. Matching gold items to predictions is greedy one-to-one (judge-free mode);
in judge mode the per-gold verdicts stand in for matching.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from ..errors import NoteMismatch
from ..util import collapse_key
from .gold import GoldAnnotation, PredictionRecord

MATCH_LINE_RADIUS = 2


@dataclass
class NoteScore:
    note_id: str
    gold_count: int
    predicted_count: int
    correct_count: int
    recall: float
    precision: float
    f1: float
    note_type: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "note_id": self.note_id,
            "note_type": self.note_type,
            "gold": self.gold_count,
            "predicted": self.predicted_count,
            "correct": self.correct_count,
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
        }


def compute_score(
    note_id: str,
    gold_count: int,
    predicted_count: int,
    correct_count: int,
    note_type: Optional[str] = None,
) -> NoteScore:
    recall = correct_count / gold_count if gold_count else 0.0
    precision = correct_count / predicted_count if predicted_count else 0.0
    f1 = (
        2 * recall * precision / (recall + precision)
        if (recall + precision) > 0
        else 0.0
    )
    return NoteScore(
        note_id=note_id,
        gold_count=gold_count,
        predicted_count=predicted_count,
        correct_count=correct_count,
        recall=recall,
        precision=precision,
        f1=f1,
        note_type=note_type,
    )


def _match_strength(gold: GoldAnnotation, pred: PredictionRecord) -> int:
    """0 = no match; 2 = containment either way; 3 = normalized equality."""
    if abs(gold.line - pred.line) > MATCH_LINE_RADIUS:
        return 0
    g = collapse_key(gold.entity)
    p = collapse_key(pred.entity)
    if not g or not p:
        return 0
    if g == p:
        return 3
    if g in p or p in g:
        return 2
    return 0


def deterministic_match(
    gold: GoldAnnotation, predictions: Sequence[PredictionRecord]
) -> Optional[PredictionRecord]:
    """Best single prediction for one gold item (containment within two
    lines), or None. Judge-free fallback for CI."""
    best = None
    best_key = (0, -1)
    for pred in predictions:
        strength = _match_strength(gold, pred)
        if strength == 0:
            continue
        key = (strength, -abs(gold.line - pred.line))
        if key > best_key:
            best_key = key
            best = pred
    return best


def greedy_match(
    gold_items: Sequence[GoldAnnotation], predictions: Sequence[PredictionRecord]
) -> List[Tuple[int, int]]:
    """One-to-one assignment: strongest matches first, ties by line proximity
    then input order. Returns (gold index, prediction index) pairs."""
    candidates = []
    for gi, gold in enumerate(gold_items):
        for pi, pred in enumerate(predictions):
            strength = _match_strength(gold, pred)
            if strength:
                gap = abs(gold.line - pred.line)
                candidates.append((-strength, gap, gi, pi))
    candidates.sort()
    taken_gold = set()
    taken_pred = set()
    pairs: List[Tuple[int, int]] = []
    for _, _, gi, pi in candidates:
        if gi in taken_gold or pi in taken_pred:
            continue
        taken_gold.add(gi)
        taken_pred.add(pi)
        pairs.append((gi, pi))
    return pairs


def _label_agrees(gold: GoldAnnotation, pred: PredictionRecord) -> bool:
    return pred.label is not None and pred.label.casefold() == gold.label


def score_note(
    gold_items: Sequence[GoldAnnotation],
    predictions: Sequence[PredictionRecord],
    note_type: Optional[str] = None,
) -> NoteScore:
    """Deterministic (judge-free) scoring of one note."""
    note_ids = {g.note_id for g in gold_items} | {p.note_id for p in predictions}
    if len(note_ids) > 1:
        raise NoteMismatch(f"gold and predictions span notes: {sorted(note_ids)}")
    note_id = next(iter(note_ids)) if note_ids else "?"
    pairs = greedy_match(gold_items, predictions)
    correct = sum(
        1 for gi, pi in pairs if _label_agrees(gold_items[gi], predictions[pi])
    )
    if note_type is None:
        for source in list(gold_items) + list(predictions):
            if source.note_type:
                note_type = source.note_type
                break
    return compute_score(note_id, len(gold_items), len(predictions), correct, note_type)


def score_note_judged(
    gold_items: Sequence[GoldAnnotation],
    predictions: Sequence[PredictionRecord],
    verdicts: Sequence[str],
    note_type: Optional[str] = None,
) -> NoteScore:
    """Scoring when an LLM judge produced one Correct/Incorrect per gold item."""
    if len(verdicts) != len(gold_items):
        raise ValueError("one judge verdict per gold item required")
    note_id = gold_items[0].note_id if gold_items else "?"
    correct = sum(1 for v in verdicts if v == "Correct")
    if note_type is None:
        for source in list(gold_items) + list(predictions):
            if source.note_type:
                note_type = source.note_type
                break
    return compute_score(note_id, len(gold_items), len(predictions), correct, note_type)


def aggregate(
    scores: Sequence[NoteScore], group_by_type: bool = True, micro: bool = False
) -> Dict[str, dict]:
    """Macro (per-note mean) summary, overall and per note type.

    ``micro`` switches to pooled counts (diagnostic only).
    """

    def summarize(subset: Sequence[NoteScore]) -> dict:
        if not subset:
            return {"notes": 0, "recall": 0.0, "precision": 0.0, "f1": 0.0}
        if micro:
            gold = sum(s.gold_count for s in subset)
            pred = sum(s.predicted_count for s in subset)
            correct = sum(s.correct_count for s in subset)
            pooled = compute_score("micro", gold, pred, correct)
            return {
                "notes": len(subset),
                "recall": pooled.recall,
                "precision": pooled.precision,
                "f1": pooled.f1,
            }
        n = len(subset)
        # fsum: exactly-rounded, so means are permutation-invariant
        return {
            "notes": n,
            "recall": math.fsum(s.recall for s in subset) / n,
            "precision": math.fsum(s.precision for s in subset) / n,
            "f1": math.fsum(s.f1 for s in subset) / n,
        }

    summary = {"overall": summarize(scores)}
    if group_by_type:
        types = sorted({s.note_type for s in scores if s.note_type})
        for t in types:
            summary[t] = summarize([s for s in scores if s.note_type == t])
    return summary
