"""Scoring and judging of framework outputs against gold annotations."""

from .gold import (
    GoldAnnotation,
    GoldTotals,
    PredictionRecord,
    load_gold,
    load_predictions,
)
from .judge import JudgeVerdict, judge, parse_judge_reply
from .scoring import (
    NoteScore,
    aggregate,
    compute_score,
    deterministic_match,
    greedy_match,
    score_note,
    score_note_judged,
)

__all__ = [
    "GoldAnnotation",
    "GoldTotals",
    "JudgeVerdict",
    "NoteScore",
    "PredictionRecord",
    "aggregate",
    "compute_score",
    "deterministic_match",
    "greedy_match",
    "judge",
    "load_gold",
    "load_predictions",
    "parse_judge_reply",
    "score_note",
    "score_note_judged",
]
