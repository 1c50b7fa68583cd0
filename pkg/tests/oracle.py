"""Independent brute-force oracles plus a randomized synthetic store builder.

The oracle path never touches the packed arrays or the query kernel: it keeps
its own plain-record list (built from the same generated source data the CSVs
are written from) and applies the documented predicates with datetime and
float comparisons directly.
"""
from __future__ import annotations

import datetime as dt
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from notetable.datastore import ingest_tables
from notetable.schema import schema_config_from_dict
from notetable.temporal import PatientContext, TimePoint

from conftest import write_csv


@dataclass
class PlainRow:
    table: str
    row_id: str
    patient: str
    admission: str
    item: Optional[str]
    category: Optional[str]
    t_lo: Optional[dt.datetime]
    t_hi: Optional[dt.datetime]
    vnum: Optional[float]
    vtext: Optional[str]


def norm(text: str) -> str:
    return " ".join(text.split()).casefold()


def oracle_query(
    rows: List[PlainRow],
    patient: Optional[str] = None,
    admission: Optional[str] = None,
    table: Optional[str] = None,
    item: Optional[str] = None,
    window: Optional[Tuple[dt.datetime, dt.datetime]] = None,
    constraint: Optional[Tuple[str, float, float]] = None,
) -> Set[str]:
    """The documented row predicate, evaluated the slow way."""
    out: Set[str] = set()
    for row in rows:
        if patient is not None and row.patient != patient:
            continue
        if admission is not None and row.admission != admission:
            continue
        if table is not None and row.table != table:
            continue
        if item is not None:
            if row.item is None or norm(row.item) != norm(item):
                continue
        if window is not None:
            if row.t_lo is None:
                continue
            lo, hi = window
            if not (row.t_lo <= hi and row.t_hi >= lo):
                continue
        if constraint is not None:
            if row.vnum is None:
                continue
            kind, a, b = constraint
            if kind == "more" and not row.vnum > a:
                continue
            if kind == "less" and not row.vnum < a:
                continue
            if kind == "between" and not (a <= row.vnum <= b):
                continue
        out.add(row.row_id)
    return out


def oracle_value_text(row: PlainRow) -> Optional[str]:
    if row.vnum is not None:
        return str(int(row.vnum)) if float(row.vnum).is_integer() else repr(float(row.vnum))
    return row.vtext


def oracle_profile(rows: List[PlainRow], item: str, k: int) -> List[str]:
    counts: Counter = Counter()
    for row in rows:
        if row.item is None or norm(row.item) != norm(item):
            continue
        text = oracle_value_text(row)
        if text is not None:
            counts[text] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [t for t, _ in ranked[:k]]


def oracle_category_trend(
    rows: List[PlainRow], table: str, limit: int
) -> List[Tuple[str, List[str]]]:
    freq: Dict[Tuple[str, str], int] = {}
    for row in rows:
        if row.table != table or row.item is None:
            continue
        cat = row.category if row.category is not None else "(uncategorized)"
        freq[(cat, row.item)] = freq.get((cat, row.item), 0) + 1
    grouped: Dict[str, List[Tuple[str, int]]] = {}
    for (cat, item), n in freq.items():
        grouped.setdefault(cat, []).append((item, n))
    ordered = sorted(grouped.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    out = []
    for cat, pairs in ordered:
        pairs.sort(key=lambda p: (-p[1], p[0]))
        out.append((cat, [i for i, _ in pairs[:limit]]))
    return out


# -- synthetic store -------------------------------------------------------------

CATEGORIES = ["Vitals", "Labs", "Output", "Meds", "General"]
TEXT_VALUES = ["Small", "Medium", "Large", "Clear", "Cloudy", "Soft", "Firm"]


@dataclass
class SyntheticStore:
    dataset: object
    rows: List[PlainRow]
    items: List[str]
    patients: List[Tuple[str, str]]
    span_start: dt.datetime
    span_days: int

    def ctx(self, patient: str, admission: str) -> PatientContext:
        admit = TimePoint(self.span_start.date() + dt.timedelta(days=1))
        discharge = TimePoint(self.span_start.date() + dt.timedelta(days=self.span_days - 1))
        return PatientContext(patient, admission, admit, discharge)


def build_synthetic_store(
    tmp_path: Path,
    rng: random.Random,
    n_rows: int = 1000,
    n_items: int = 50,
    span_days: int = 30,
    n_patients: int = 3,
) -> SyntheticStore:
    """Write randomized CSVs for three differently-shaped tables and ingest
    them; the parallel plain-record list is the oracle's source of truth."""
    span_start = dt.datetime(2170, 6, 1)
    items = [f"Item {i:02d}" for i in range(n_items)]
    item_cat = {label: CATEGORIES[i % len(CATEGORIES)] for i, label in enumerate(items)}
    patients = [(f"P{i}", f"A{i}") for i in range(n_patients)]

    plain: List[PlainRow] = []
    point_rows = []
    interval_rows = []
    text_rows = []
    for i in range(n_rows):
        table = ("events_point", "events_interval", "events_text")[i % 3]
        patient, admission = patients[rng.randrange(n_patients)]
        item = items[rng.randrange(n_items)]
        row_id = f"r{i:05d}"
        start = span_start + dt.timedelta(
            days=rng.randrange(span_days), hours=rng.randrange(24), minutes=rng.randrange(60)
        )
        if table == "events_point":
            missing_time = rng.random() < 0.05
            vnum = None if rng.random() < 0.15 else round(rng.uniform(0, 200), 1)
            time_text = "" if missing_time else start.strftime("%Y-%m-%d %H:%M:%S")
            point_rows.append(
                [row_id, patient, admission, item, item_cat[item], time_text,
                 "" if vnum is None else str(vnum)]
            )
            plain.append(
                PlainRow(table, row_id, patient, admission, item, item_cat[item],
                         None if missing_time else start,
                         None if missing_time else start, vnum, None)
            )
        elif table == "events_interval":
            dur = dt.timedelta(hours=rng.randrange(1, 96))
            end = start + dur
            vnum = None if rng.random() < 0.3 else float(rng.randrange(1, 1000))
            interval_rows.append(
                [row_id, patient, admission, item,
                 start.strftime("%Y-%m-%d %H:%M:%S"), end.strftime("%Y-%m-%d %H:%M:%S"),
                 "" if vnum is None else str(vnum)]
            )
            plain.append(
                PlainRow(table, row_id, patient, admission, item, None,
                         start, end, vnum, None)
            )
        else:
            vtext = TEXT_VALUES[rng.randrange(len(TEXT_VALUES))]
            text_rows.append(
                [row_id, patient, admission, item, item_cat[item],
                 start.strftime("%Y-%m-%d"), vtext]
            )
            day = start.date()
            plain.append(
                PlainRow(table, row_id, patient, admission, item, item_cat[item],
                         dt.datetime.combine(day, dt.time.min),
                         dt.datetime.combine(day, dt.time(23, 59, 59)), None, vtext)
            )

    write_csv(tmp_path / "POINT.csv",
              ["RID", "PAT", "ADM", "ITEM", "CAT", "TIME", "NUM"], point_rows)
    write_csv(tmp_path / "INTERVAL.csv",
              ["RID", "PAT", "ADM", "ITEM", "START", "END", "NUM"], interval_rows)
    write_csv(tmp_path / "TEXT.csv",
              ["RID", "PAT", "ADM", "ITEM", "CAT", "DAY", "VAL"], text_rows)

    config = schema_config_from_dict(
        {
            "tables": {
                "events_point": {
                    "file": "POINT.csv",
                    "roles": {
                        "RID": "row_id", "PAT": "patient_id", "ADM": "admission_id",
                        "ITEM": "item_label", "CAT": "category",
                        "TIME": "time_point", "NUM": "value_num",
                    },
                },
                "events_interval": {
                    "file": "INTERVAL.csv",
                    "roles": {
                        "RID": "row_id", "PAT": "patient_id", "ADM": "admission_id",
                        "ITEM": "item_label", "START": "time_start", "END": "time_end",
                        "NUM": "value_num",
                    },
                },
                "events_text": {
                    "file": "TEXT.csv",
                    "roles": {
                        "RID": "row_id", "PAT": "patient_id", "ADM": "admission_id",
                        "ITEM": "item_label", "CAT": "category",
                        "DAY": "time_point", "VAL": "value_text",
                    },
                },
            }
        },
        base_dir=tmp_path,
    )
    dataset, _ = ingest_tables(config)
    return SyntheticStore(dataset, plain, items, patients, span_start, span_days)
