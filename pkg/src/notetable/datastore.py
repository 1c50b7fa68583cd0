"""Read-only in-process store over delimited EHR-style tables.

Everything downstream (the eight exploration tools, the verification agent)
funnels into ``query_rows``: a patient-scoped, time-windowed, value-constrained
scan kernel over packed column arrays. The store is immutable after ingest and
safe for unrestricted concurrent reads.
"""
from __future__ import annotations

import concurrent.futures
import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from . import _kernels
from .constraints import Between, Less, More, ValueConstraint
from .errors import (
    ConfigError,
    DuplicateRowId,
    ItemUnknown,
    TableUnknown,
)
from .schema import SchemaConfig, TableSchema
from .temporal import (
    NO_TIME,
    Interval,
    PatientContext,
    TimePoint,
    TimeSpan,
    from_seconds,
    to_seconds,
    try_parse_time_point,
)


def norm_label(text: str) -> str:
    """Matching key for item labels: whitespace-collapsed, casefolded."""
    return " ".join(text.split()).casefold()


def format_value(value: float) -> str:
    """Canonical text of a numeric value (no trailing .0 on integers)."""
    return str(int(value)) if float(value).is_integer() else repr(float(value))


@dataclass
class RecordRow:
    """One table row in resolved form; the unit of evidence."""

    row_id: str
    table_name: str
    patient_id: str
    admission_id: Optional[str]
    span: Optional[TimeSpan]
    item_label: Optional[str]
    value_text: Optional[str]
    value_num: Optional[float]
    value_unit: Optional[str]
    category: Optional[str]
    extra: Dict[str, str] = field(default_factory=dict)

    def display_value(self) -> Optional[str]:
        if self.value_num is not None:
            return format_value(self.value_num)
        return self.value_text

    def to_payload(self) -> dict:
        """Wire shape used in tool results and reports."""
        time_text = None
        if self.span is not None:
            if self.span.start == self.span.end:
                time_text = self.span.start.isoformat(" ")
            else:
                time_text = (
                    f"{self.span.start.isoformat(' ')} .. {self.span.end.isoformat(' ')}"
                )
        payload = {
            "row_id": self.row_id,
            "table": self.table_name,
            "time": time_text,
            "item": self.item_label,
            "value": self.display_value(),
            "unit": self.value_unit,
        }
        if self.category is not None:
            payload["category"] = self.category
        if self.extra:
            payload["extra"] = dict(self.extra)
        return payload


@dataclass
class TableIngestReport:
    rows_read: int = 0
    rows_kept: int = 0
    value_coercion_failures: int = 0
    unresolved_item_refs: int = 0
    invalid_times: int = 0


@dataclass
class IngestReport:
    tables: Dict[str, TableIngestReport] = field(default_factory=dict)

    def summary_lines(self) -> List[str]:
        lines = []
        for name in sorted(self.tables):
            t = self.tables[name]
            lines.append(
                f"{name}: read={t.rows_read} kept={t.rows_kept} "
                f"bad_values={t.value_coercion_failures} "
                f"unresolved_items={t.unresolved_item_refs} bad_times={t.invalid_times}"
            )
        return lines

    def to_dict(self) -> dict:
        return {name: vars(rep) for name, rep in sorted(self.tables.items())}


class _Packed:
    """Column arrays for the filter kernel, parallel to the row list."""

    def __init__(self, rows: Sequence[RecordRow], dataset: "Dataset") -> None:
        n = len(rows)
        self.t_start = np.full(n, NO_TIME, dtype=np.int64)
        self.t_end = np.full(n, NO_TIME, dtype=np.int64)
        self.value = np.full(n, np.nan, dtype=np.float64)
        self.item_id = np.full(n, -1, dtype=np.int32)
        self.pat_id = np.full(n, -1, dtype=np.int32)
        self.adm_id = np.full(n, -1, dtype=np.int32)
        self.scratch = np.empty(n, dtype=np.int32)
        for i, row in enumerate(rows):
            if row.span is not None:
                self.t_start[i] = to_seconds(row.span.start)
                self.t_end[i] = to_seconds(row.span.end)
            if row.value_num is not None:
                self.value[i] = row.value_num
            if row.item_label is not None:
                self.item_id[i] = dataset.item_match_id(row.item_label)
            self.pat_id[i] = dataset._intern_patient(row.patient_id)
            if row.admission_id is not None:
                self.adm_id[i] = dataset._intern_admission(row.admission_id)


class Dataset:
    """Immutable collection of ingested tables plus lookup indexes."""

    def __init__(self, config: SchemaConfig) -> None:
        self.config = config
        self.schemas: Dict[str, TableSchema] = {}
        self.rows: Dict[str, List[RecordRow]] = {}
        self.dictionaries: Dict[str, Dict[str, Tuple[str, Optional[str]]]] = {}
        self.admission_times: Dict[Tuple[str, str], Tuple[TimePoint, TimePoint]] = {}
        self._packed: Dict[str, _Packed] = {}
        self._patients: Dict[str, int] = {}
        self._admissions: Dict[str, int] = {}
        # matching key -> match id; display labels listed per match id
        self._label_ids: Dict[str, int] = {}
        self._labels_display: List[str] = []
        self._display_seen: Set[str] = set()

    # -- interning -----------------------------------------------------------

    def _intern_patient(self, pid: str) -> int:
        return self._patients.setdefault(pid, len(self._patients))

    def _intern_admission(self, adm: str) -> int:
        return self._admissions.setdefault(adm, len(self._admissions))

    def item_match_id(self, label: str) -> int:
        key = norm_label(label)
        if key not in self._label_ids:
            self._label_ids[key] = len(self._label_ids)
        display = label.strip()
        if display not in self._display_seen:
            self._display_seen.add(display)
            self._labels_display.append(display)
        return self._label_ids[key]

    def lookup_item(self, label: str) -> Optional[int]:
        return self._label_ids.get(norm_label(label))

    # -- views ---------------------------------------------------------------

    @property
    def table_names(self) -> List[str]:
        return list(self.rows)

    @property
    def item_labels(self) -> List[str]:
        """The global item set L: distinct trimmed labels across all tables,
        dictionaries included (items may exist without current rows)."""
        return list(self._labels_display)

    def table_rows(self, table: str) -> List[RecordRow]:
        if table not in self.rows:
            raise TableUnknown(f"no table named {table!r}")
        return self.rows[table]

    def all_row_ids(self) -> Set[Tuple[str, str]]:
        return {
            (t, r.row_id) for t, rows in self.rows.items() for r in rows
        }

    def has_row_id(self, row_id: str) -> bool:
        for rows in self.rows.values():
            for r in rows:
                if r.row_id == row_id:
                    return True
        return False

    # -- context ---------------------------------------------------------------

    def patient_context(
        self,
        patient_id: str,
        admission_id: str,
        note_chart_time: Optional[TimePoint] = None,
        admit_time: Optional[TimePoint] = None,
        discharge_time: Optional[TimePoint] = None,
    ) -> PatientContext:
        """Build the admission frame, preferring explicit times, then the
        admissions table, then the observed event span."""
        if admit_time is None or discharge_time is None:
            stored = self.admission_times.get((patient_id, admission_id))
            if stored is not None:
                admit_time = admit_time or stored[0]
                discharge_time = discharge_time or stored[1]
        if admit_time is None or discharge_time is None:
            lo, hi = self._observed_span(patient_id, admission_id)
            admit_time = admit_time or lo
            discharge_time = discharge_time or hi
        return PatientContext(
            patient_id=patient_id,
            admission_id=admission_id,
            admit_time=admit_time,
            discharge_time=discharge_time,
            note_chart_time=note_chart_time,
        )

    def _observed_span(self, patient_id: str, admission_id: str) -> Tuple[TimePoint, TimePoint]:
        lo = None
        hi = None
        for rows in self.rows.values():
            for row in rows:
                if row.patient_id != patient_id or row.span is None:
                    continue
                if row.admission_id is not None and row.admission_id != admission_id:
                    continue
                if lo is None or row.span.start < lo:
                    lo = row.span.start
                if hi is None or row.span.end > hi:
                    hi = row.span.end
        if lo is None or hi is None:
            raise ConfigError(
                f"cannot determine admission window for ({patient_id}, {admission_id}); "
                "provide admit/discharge times or an admissions table"
            )
        return (
            TimePoint(lo.date(), lo.time()),
            TimePoint(hi.date(), hi.time()),
        )


# -- ingest --------------------------------------------------------------------


def _read_delimited(path: Path, delimiter: str) -> Tuple[List[str], List[List[str]]]:
    with open(path, "r", encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file, expected a header row")
        return [h.strip() for h in header], [row for row in reader]


def _load_dictionary(spec, path: Path) -> Dict[str, Tuple[str, Optional[str]]]:
    header, data = _read_delimited(path, spec.delimiter)
    for col in (spec.key, spec.label) + ((spec.category,) if spec.category else ()):
        if col not in header:
            from .errors import MissingColumn

            raise MissingColumn(f"dictionary {spec.name}: column {col!r} not in {path.name}")
    ki = header.index(spec.key)
    li = header.index(spec.label)
    ci = header.index(spec.category) if spec.category else None
    out: Dict[str, Tuple[str, Optional[str]]] = {}
    for row in data:
        if ki >= len(row):
            continue
        key = row[ki].strip()
        label = row[li].strip() if li < len(row) else ""
        category = row[ci].strip() if ci is not None and ci < len(row) else None
        if key and label:
            out[key] = (label, category or None)
    return out


def _parse_table(
    schema: TableSchema,
    path: Path,
    dictionary: Optional[Dict[str, Tuple[str, Optional[str]]]],
) -> Tuple[List[RecordRow], TableIngestReport]:
    from .errors import MissingColumn

    header, data = _read_delimited(path, schema.delimiter)
    col_index: Dict[str, int] = {}
    for col in schema.column_roles:
        if col not in header:
            raise MissingColumn(
                f"table {schema.table_name}: column {col!r} not in {path.name} header"
            )
        col_index[col] = header.index(col)

    def get(role: str, row: List[str]) -> Optional[str]:
        col = schema.column_for(role)
        if col is None:
            return None
        i = col_index[col]
        if i >= len(row):
            return None
        text = row[i].strip()
        return text or None

    role_cols = set(schema.column_roles)
    extra_cols = [
        (c, header.index(c))
        for c in header
        if c not in role_cols or schema.column_roles.get(c) == "other"
    ]

    report = TableIngestReport()
    rows: List[RecordRow] = []
    seen_ids: Set[str] = set()
    for raw in data:
        report.rows_read += 1
        row_id = get("row_id", raw)
        if row_id is None:
            row_id = str(report.rows_read - 1)
        if row_id in seen_ids:
            raise DuplicateRowId(
                f"table {schema.table_name}: duplicate row_id {row_id!r}"
            )
        seen_ids.add(row_id)

        value_text = get("value_text", raw)
        value_num: Optional[float] = None
        raw_num = get("value_num", raw)
        if raw_num is not None:
            try:
                value_num = float(raw_num)
                if not math.isfinite(value_num):
                    raise ValueError
            except ValueError:
                value_num = None
                report.value_coercion_failures += 1
                if value_text is None:
                    value_text = raw_num

        span: Optional[TimeSpan] = None
        point_text = get("time_point", raw)
        start_text = get("time_start", raw)
        end_text = get("time_end", raw)
        if point_text is not None:
            tp = try_parse_time_point(point_text)
            if tp is None:
                report.invalid_times += 1
            else:
                span = TimeSpan.point(tp)
        elif start_text is not None or end_text is not None:
            stp = try_parse_time_point(start_text) if start_text else None
            etp = try_parse_time_point(end_text) if end_text else None
            if stp is not None and etp is not None:
                if stp.lower() <= etp.upper():
                    span = TimeSpan.interval(stp, etp)
                else:
                    report.invalid_times += 1
            elif stp is not None:
                span = TimeSpan.point(stp)
            elif etp is not None:
                span = TimeSpan.point(etp)
            else:
                report.invalid_times += 1

        item_label = get("item_label", raw)
        category = get("category", raw)
        ref = get("item_ref", raw)
        if item_label is None and ref is not None:
            entry = dictionary.get(ref) if dictionary else None
            if entry is None:
                report.unresolved_item_refs += 1
            else:
                item_label = entry[0]
                if category is None:
                    category = entry[1]

        patient = get("patient_id", raw) or ""
        rows.append(
            RecordRow(
                row_id=row_id,
                table_name=schema.table_name,
                patient_id=patient,
                admission_id=get("admission_id", raw),
                span=span,
                item_label=item_label,
                value_text=value_text,
                value_num=value_num,
                value_unit=get("value_unit", raw),
                category=category,
                extra={
                    c: raw[i].strip()
                    for c, i in extra_cols
                    if i < len(raw) and raw[i].strip()
                },
            )
        )
        report.rows_kept += 1
    return rows, report


def ingest_tables(
    config: SchemaConfig,
    files: Optional[Iterable[str | Path]] = None,
    jobs: int = 1,
) -> Tuple[Dataset, IngestReport]:
    """Load every table declared by the config into a Dataset.

    ``files``, when given, restricts ingestion to tables whose declared file
    name matches one of the paths (and resolves them to those paths).
    """
    dataset = Dataset(config)
    report = IngestReport()

    overrides: Dict[str, Path] = {}
    if files is not None:
        for f in files:
            overrides[Path(f).name] = Path(f)

    def path_for(declared: str) -> Optional[Path]:
        name = Path(declared).name
        if overrides:
            return overrides.get(name)
        return config.resolve(declared)

    for name, spec in config.dictionaries.items():
        path = path_for(spec.file)
        if path is None:
            continue
        dataset.dictionaries[name] = _load_dictionary(spec, path)
        # dictionary labels belong to the global item set even when no event
        # row currently references them (the search space is the whole
        # item universe, not just charted items)
        for label, _category in dataset.dictionaries[name].values():
            dataset.item_match_id(label)

    work = []
    for name, schema in config.tables.items():
        path = path_for(schema.file)
        if path is None:
            continue
        work.append((name, schema, path))

    def run_one(item):
        name, schema, path = item
        dictionary = (
            dataset.dictionaries.get(schema.item_dictionary_ref)
            if schema.item_dictionary_ref
            else None
        )
        return name, schema, _parse_table(schema, path, dictionary)

    if jobs > 1 and len(work) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, work))
    else:
        results = [run_one(item) for item in work]

    for name, schema, (rows, table_report) in results:
        dataset.schemas[name] = schema
        dataset.rows[name] = rows
        report.tables[name] = table_report

    if config.admissions is not None:
        path = path_for(config.admissions.file)
        if path is not None:
            _load_admissions(dataset, config.admissions, path)

    # pack after all rows exist so interning covers every table
    for name, rows in dataset.rows.items():
        dataset._packed[name] = _Packed(rows, dataset)
    return dataset, report


def _load_admissions(dataset: Dataset, spec, path: Path) -> None:
    from .errors import MissingColumn

    header, data = _read_delimited(path, spec.delimiter)
    for col in (spec.patient_id, spec.admission_id, spec.admit_time, spec.discharge_time):
        if col not in header:
            raise MissingColumn(f"admissions: column {col!r} not in {path.name}")
    pi = header.index(spec.patient_id)
    ai = header.index(spec.admission_id)
    ti = header.index(spec.admit_time)
    di = header.index(spec.discharge_time)
    for row in data:
        if max(pi, ai, ti, di) >= len(row):
            continue
        admit = try_parse_time_point(row[ti])
        disch = try_parse_time_point(row[di])
        if admit is None or disch is None:
            continue
        dataset.admission_times[(row[pi].strip(), row[ai].strip())] = (admit, disch)


# -- query primitives ------------------------------------------------------------


def patient_items(dataset: Dataset, patient_id: str, admission_id: str) -> Set[str]:
    """Distinct item labels recorded for one admission (L_P)."""
    found: Set[str] = set()
    for rows in dataset.rows.values():
        for row in rows:
            if row.patient_id != patient_id or row.item_label is None:
                continue
            if row.admission_id is not None and row.admission_id != admission_id:
                continue
            found.add(row.item_label)
    return found


def global_value_profile(dataset: Dataset, item_label: str, k: int) -> List[str]:
    """Top-k most frequent values of an item over all patients.

    Ties broken by ascending value text; numeric values use their canonical
    text form. Raises ItemUnknown for labels outside the global item set.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    match_id = dataset.lookup_item(item_label)
    if match_id is None:
        raise ItemUnknown(f"item not in the global item set: {item_label!r}")
    counts: Counter = Counter()
    for table, rows in dataset.rows.items():
        packed = dataset._packed[table]
        for i, row in enumerate(rows):
            if packed.item_id[i] != match_id:
                continue
            if row.value_num is not None:
                counts[format_value(row.value_num)] += 1
            elif row.value_text is not None:
                counts[row.value_text] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [text for text, _ in ranked[:k]]


def query_rows(
    dataset: Dataset,
    ctx: Optional[PatientContext] = None,
    table: Optional[str] = None,
    item_label: Optional[str] = None,
    window: Optional[Interval] = None,
    constraint: Optional[ValueConstraint] = None,
) -> List[RecordRow]:
    """The shared scan under every retrieval tool.

    A row matches when every present filter holds: table name, item label
    (trimmed, case-insensitive), time-span overlap with the window (inclusive
    bounds; untimed rows never match a window), and the numeric constraint
    (rows without a numeric value never satisfy one). Results are ordered by
    time ascending (untimed rows first) then row id.
    """
    if ctx is None and table is None and item_label is None and window is None and constraint is None:
        raise ValueError("query_rows requires at least one filter")

    if table is not None and table not in dataset.rows:
        raise TableUnknown(f"no table named {table!r}")
    tables = [table] if table is not None else list(dataset.rows)

    q_item = -1
    if item_label is not None:
        found = dataset.lookup_item(item_label)
        if found is None:
            return []
        q_item = found

    q_pat = -1
    q_adm = -1
    if ctx is not None:
        q_pat = dataset._patients.get(ctx.patient_id, -2)
        if q_pat == -2:
            return []
        q_adm = dataset._admissions.get(ctx.admission_id, -2)
        if q_adm == -2:
            # unknown admission id: match only rows without an admission column
            q_adm = len(dataset._admissions) + 1

    has_window = window is not None
    win_lo = to_seconds(window.lo) if window else 0
    win_hi = to_seconds(window.hi) if window else 0

    cons_kind = _kernels.CONS_NONE
    cons_a = cons_b = 0.0
    if isinstance(constraint, More):
        cons_kind, cons_a = _kernels.CONS_MORE, constraint.bound
    elif isinstance(constraint, Less):
        cons_kind, cons_a = _kernels.CONS_LESS, constraint.bound
    elif isinstance(constraint, Between):
        cons_kind, cons_a, cons_b = _kernels.CONS_BETWEEN, constraint.lo, constraint.hi

    out: List[RecordRow] = []
    for name in tables:
        rows = dataset.rows[name]
        if not rows:
            continue
        packed = dataset._packed[name]
        n = _kernels.filter_rows(
            packed.t_start,
            packed.t_end,
            packed.value,
            packed.item_id,
            packed.pat_id,
            packed.adm_id,
            q_item,
            q_pat,
            q_adm,
            has_window,
            win_lo,
            win_hi,
            cons_kind,
            cons_a,
            cons_b,
            packed.scratch,
        )
        out.extend(rows[i] for i in packed.scratch[:n])

    def sort_key(row: RecordRow):
        start = to_seconds(row.span.start) if row.span is not None else NO_TIME
        return (start, row.row_id)

    out.sort(key=sort_key)
    return out
