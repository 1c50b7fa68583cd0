"""Time points, spans, window queries and their resolution rules.

All datetimes are naive (the store's de-identified dates are shifted far into
the future; there is no timezone to respect). Resolution is one second.
"""
from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass
from typing import Optional, Union

from .errors import AnchorUnavailable

_EPOCH = dt.datetime(1970, 1, 1)
#: sentinel for "row has no time" in the packed column arrays
NO_TIME = -(2 ** 62)

_DATE_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_DATETIME_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[ T](\d{2}):(\d{2})(?::(\d{2}))?$"
)


@dataclass(frozen=True)
class TimePoint:
    """A calendar date with an optional time of day."""

    day: dt.date
    tod: Optional[dt.time] = None

    @property
    def has_time(self) -> bool:
        return self.tod is not None

    def lower(self) -> dt.datetime:
        """Earliest instant covered: the timestamp itself, or start of day."""
        return dt.datetime.combine(self.day, self.tod or dt.time(0, 0, 0))

    def upper(self) -> dt.datetime:
        """Latest instant covered: the timestamp itself, or 23:59:59."""
        if self.tod is not None:
            return dt.datetime.combine(self.day, self.tod)
        return dt.datetime.combine(self.day, dt.time(23, 59, 59))

    def __str__(self) -> str:
        if self.tod is None:
            return self.day.isoformat()
        return f"{self.day.isoformat()} {self.tod.strftime('%H:%M:%S')}"


def parse_time_point(text: str) -> TimePoint:
    """Parse ``yyyy-mm-dd`` or ``yyyy-mm-dd hh:mm[:ss]``.

    Raises ValueError for anything else, including impossible dates.
    """
    text = text.strip()
    m = _DATE_RE.match(text)
    if m:
        return TimePoint(dt.date(int(m[1]), int(m[2]), int(m[3])))
    m = _DATETIME_RE.match(text)
    if m:
        day = dt.date(int(m[1]), int(m[2]), int(m[3]))
        tod = dt.time(int(m[4]), int(m[5]), int(m[6] or 0))
        return TimePoint(day, tod)
    raise ValueError(f"unrecognized time point: {text!r}")


def try_parse_time_point(text: str) -> Optional[TimePoint]:
    try:
        return parse_time_point(text)
    except ValueError:
        return None


@dataclass(frozen=True)
class TimeSpan:
    """What a row occupies on the timeline: an instant, a day, or an interval.

    ``start``/``end`` are inclusive instants. A date-only point covers its
    whole day; a date-only interval endpoint covers up to end of that day.
    """

    start: dt.datetime
    end: dt.datetime

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError("TimeSpan start after end")

    @classmethod
    def point(cls, tp: TimePoint) -> "TimeSpan":
        return cls(tp.lower(), tp.upper())

    @classmethod
    def interval(cls, start: TimePoint, end: TimePoint) -> "TimeSpan":
        return cls(start.lower(), end.upper())

    def intersects(self, window: "Interval") -> bool:
        return self.start <= window.hi and self.end >= window.lo


@dataclass(frozen=True)
class Interval:
    """An inclusive query window."""

    lo: dt.datetime
    hi: dt.datetime

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError("Interval lower bound after upper bound")

    def __str__(self) -> str:
        return f"[{self.lo.isoformat(' ')}, {self.hi.isoformat(' ')}]"


def to_seconds(instant: dt.datetime) -> int:
    return int((instant - _EPOCH).total_seconds())


def from_seconds(seconds: int) -> dt.datetime:
    return _EPOCH + dt.timedelta(seconds=seconds)


# -- time queries -------------------------------------------------------------

@dataclass(frozen=True)
class Exact:
    """A concrete timestamp; date-only expands to the whole day."""

    point: TimePoint


@dataclass(frozen=True)
class Narrative:
    """A narrative anchor ("admission", "discharge", "note") or a bare date
    mentioned as an anchor; resolved to a one-day pad on each side."""

    anchor: str


@dataclass(frozen=True)
class Duration:
    """An explicit start/end pair, padded one day on each side."""

    start: TimePoint
    end: TimePoint


TimeQuery = Union[Exact, Narrative, Duration]

NARRATIVE_ANCHORS = ("admission", "discharge", "note")


@dataclass(frozen=True)
class PatientContext:
    """The admission frame narrative time expressions resolve against."""

    patient_id: str
    admission_id: str
    admit_time: TimePoint
    discharge_time: TimePoint
    note_chart_time: Optional[TimePoint] = None

    def __post_init__(self) -> None:
        if self.admit_time.lower() > self.discharge_time.upper():
            raise ValueError("admit_time after discharge_time")


def _day_window(day: dt.date, pad_days: int) -> Interval:
    lo = dt.datetime.combine(day - dt.timedelta(days=pad_days), dt.time.min)
    hi = dt.datetime.combine(
        day + dt.timedelta(days=pad_days), dt.time(23, 59, 59)
    )
    return Interval(lo, hi)


def resolve_time_window(query: TimeQuery, ctx: Optional[PatientContext]) -> Interval:
    """Turn a time query into an inclusive instant window.

    Exact dates cover their whole day; exact timestamps are degenerate
    intervals. Narrative anchors and durations get one full day of padding on
    each side, aligned to day boundaries.
    """
    if isinstance(query, Exact):
        tp = query.point
        return Interval(tp.lower(), tp.upper())
    if isinstance(query, Duration):
        lo = _day_window(query.start.day, 1).lo
        hi = _day_window(query.end.day, 1).hi
        return Interval(lo, hi)
    if isinstance(query, Narrative):
        anchor = query.anchor.strip().lower()
        tp: Optional[TimePoint]
        if anchor == "admission":
            tp = ctx.admit_time if ctx else None
        elif anchor == "discharge":
            tp = ctx.discharge_time if ctx else None
        elif anchor in ("note", "chart", "note_chart_time"):
            tp = ctx.note_chart_time if ctx else None
        else:
            tp = try_parse_time_point(query.anchor)
        if tp is None:
            raise AnchorUnavailable(f"anchor not available: {query.anchor!r}")
        return _day_window(tp.day, 1)
    raise TypeError(f"not a time query: {query!r}")


def parse_time_query(text: str) -> TimeQuery:
    """Parse the textual time-argument grammar used on the tool wire.

    ``admission`` / ``discharge`` / ``note`` -> Narrative;
    ``yyyy-mm-dd[ hh:mm[:ss]]`` -> Exact;
    ``t1~t2`` -> Duration.
    """
    text = text.strip()
    if not text:
        raise ValueError("empty time query")
    if "~" in text:
        a, _, b = text.partition("~")
        return Duration(parse_time_point(a), parse_time_point(b))
    if text.lower() in NARRATIVE_ANCHORS:
        return Narrative(text.lower())
    tp = try_parse_time_point(text)
    if tp is not None:
        return Exact(tp)
    # an unknown word is still a narrative anchor attempt; resolution will
    # raise AnchorUnavailable with a useful message
    return Narrative(text)


def format_time_query(query: TimeQuery) -> str:
    if isinstance(query, Exact):
        return str(query.point)
    if isinstance(query, Narrative):
        return query.anchor
    if isinstance(query, Duration):
        return f"{query.start}~{query.end}"
    raise TypeError(f"not a time query: {query!r}")
