"""The eight table-exploration tools behind a uniform name/alias registry.

Canonical names are the descriptive ones (``lexical_search`` ...); the short
prompt-facing names (``Item_Search``, ``Table_Value_Time`` ...) are aliases.
Every retrieval tool reduces to :func:`notetable.datastore.query_rows`, so one
brute-force oracle covers them all in tests.
"""
from __future__ import annotations

import datetime as dt
import itertools
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .constraints import ValueConstraint, parse_constraint
from .datastore import (
    Dataset,
    RecordRow,
    global_value_profile,
    patient_items,
    query_rows,
)
from .errors import (
    ArgValidationError,
    ItemUnknown,
    MalformedLlmOutput,
    NotetableError,
    TableUnknown,
    UnknownTool,
)
from .lexicon import AbbreviationLexicon
from .temporal import (
    Interval,
    PatientContext,
    TimeQuery,
    parse_time_query,
    resolve_time_window,
)
from .trigram import TrigramIndex

DEFAULT_TOP_N = 10
DEFAULT_MAX_ROWS = 50
_SEMANTIC_CHUNK = 200


@dataclass(frozen=True)
class ToolSpec:
    name: str
    aliases: Tuple[str, ...]
    description: str
    # (arg name, semantic type, required)
    arg_schema: Tuple[Tuple[str, str, bool], ...]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "aliases": list(self.aliases),
            "description": self.description,
            "args": [
                {"name": n, "type": t, "required": r} for n, t, r in self.arg_schema
            ],
        }


@dataclass
class ToolCall:
    name: str
    args: Dict[str, str]
    call_id: str

    def to_dict(self) -> dict:
        return {"name": self.name, "args": dict(self.args), "call_id": self.call_id}

    @classmethod
    def from_dict(cls, doc: dict) -> "ToolCall":
        return cls(name=doc["name"], args=dict(doc["args"]), call_id=doc["call_id"])


@dataclass
class ToolResult:
    call_id: str
    status: str  # ok | error
    payload: dict
    row_count: int
    error_detail: Optional[str] = None

    def to_dict(self) -> dict:
        doc = {
            "call_id": self.call_id,
            "status": self.status,
            "payload": self.payload,
            "row_count": self.row_count,
        }
        if self.error_detail is not None:
            doc["error_detail"] = self.error_detail
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ToolResult":
        return cls(
            call_id=doc["call_id"],
            status=doc["status"],
            payload=doc["payload"],
            row_count=doc["row_count"],
            error_detail=doc.get("error_detail"),
        )


class ToolRuntime:
    """Everything a dispatch needs: the store, the patient frame, the LLM,
    the abbreviation lexicon, and memoized trigram indexes per scope."""

    def __init__(
        self,
        dataset: Dataset,
        ctx: Optional[PatientContext] = None,
        llm=None,
        lexicon: Optional[AbbreviationLexicon] = None,
        max_rows: int = DEFAULT_MAX_ROWS,
        top_values_k: int = DEFAULT_TOP_N,
    ) -> None:
        self.dataset = dataset
        self.ctx = ctx
        self.llm = llm
        self.lexicon = lexicon or AbbreviationLexicon.bundled()
        self.max_rows = max_rows
        self.top_values_k = top_values_k
        self._indexes: Dict[str, TrigramIndex] = {}
        self._patient_labels: Optional[List[str]] = None

    def scope_labels(self, scope: str) -> List[str]:
        if scope == "global":
            return self.dataset.item_labels
        if self.ctx is None:
            return []
        if self._patient_labels is None:
            self._patient_labels = sorted(
                patient_items(self.dataset, self.ctx.patient_id, self.ctx.admission_id)
            )
        return self._patient_labels

    def index_for(self, scope: str) -> TrigramIndex:
        if scope not in self._indexes:
            self._indexes[scope] = TrigramIndex(self.scope_labels(scope))
        return self._indexes[scope]


# -- the tools ---------------------------------------------------------------


def lexical_search(
    runtime: ToolRuntime, query: str, scope: str = "patient", top_n: int = DEFAULT_TOP_N
) -> List[Tuple[str, float]]:
    """Rank scope labels by trigram cosine, max-ed over abbreviation variants.

    Zero-score labels are dropped; ties broken by ascending label text.
    """
    query = query.strip()
    if not query:
        raise ArgValidationError("lexical_search: query is empty")
    index = runtime.index_for(scope)
    if len(index) == 0:
        return []
    variants = [query] + runtime.lexicon.variants(query)
    scores = index.score(variants)
    ranked = sorted(
        ((label, float(s)) for label, s in zip(index.labels, scores) if s > 0.0),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return ranked[: max(top_n, 0)]


def semantic_search(
    runtime: ToolRuntime, query: str, scope: str = "patient", top_n: int = DEFAULT_TOP_N
) -> List[str]:
    """LLM-mediated conceptual match; hallucinated labels are dropped."""
    from .llm import render_prompt, load_template
    from .errors import LlmUnavailable

    if runtime.llm is None:
        raise LlmUnavailable("semantic_search requires an LLM backend")
    labels = runtime.scope_labels(scope)
    if not labels:
        return []
    canonical = {" ".join(l.split()).casefold(): l for l in labels}
    template = load_template("semantic_search")
    picked: List[str] = []
    for start in range(0, len(labels), _SEMANTIC_CHUNK):
        chunk = labels[start : start + _SEMANTIC_CHUNK]
        prompt = render_prompt(
            template,
            {"QUERY": query, "CANDIDATE_ITEMS": "\n".join(f"- {l}" for l in chunk)},
        )
        text = runtime.llm.ask(prompt, tag="semantic_search")
        for line in text.splitlines():
            line = line.strip().lstrip("-*").strip()
            if not line:
                continue
            hit = canonical.get(" ".join(line.split()).casefold())
            if hit is not None and hit not in picked:
                picked.append(hit)
        if len(picked) >= top_n:
            break
    return picked[: max(top_n, 0)]


def get_item_value_distribution(
    runtime: ToolRuntime, item: str, k: Optional[int] = None
) -> List[str]:
    return global_value_profile(
        runtime.dataset, item, k if k is not None else runtime.top_values_k
    )


def analyze_category_trend(
    runtime: ToolRuntime, table: str, limit: int = DEFAULT_TOP_N
) -> List[Tuple[str, List[str]]]:
    """Distinct item labels per category for one table.

    Categories ordered by descending distinct-item count (ties: name);
    items within a category by descending row frequency (ties: label).
    Tables without a category column collapse into one bucket.
    """
    rows = runtime.dataset.table_rows(table)
    freq: Dict[Tuple[str, str], int] = {}
    for row in rows:
        if row.item_label is None:
            continue
        category = row.category if row.category is not None else "(uncategorized)"
        key = (category, row.item_label)
        freq[key] = freq.get(key, 0) + 1
    by_category: Dict[str, List[Tuple[str, int]]] = {}
    for (category, label), n in freq.items():
        by_category.setdefault(category, []).append((label, n))
    ordered = sorted(by_category.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    out: List[Tuple[str, List[str]]] = []
    for category, items in ordered:
        items.sort(key=lambda pair: (-pair[1], pair[0]))
        out.append((category, [label for label, _ in items[: max(limit, 0)]]))
    return out


def get_item_status_history(
    runtime: ToolRuntime, item: str, time: TimeQuery
) -> List[RecordRow]:
    if not item.strip():
        raise ArgValidationError("get_item_status_history: item is empty")
    window = resolve_time_window(time, runtime.ctx)
    return query_rows(
        runtime.dataset, ctx=runtime.ctx, item_label=item, window=window
    )


def get_item_value_history(
    runtime: ToolRuntime, item: str, time: TimeQuery, value: ValueConstraint
) -> List[RecordRow]:
    window = resolve_time_window(time, runtime.ctx)
    return query_rows(
        runtime.dataset,
        ctx=runtime.ctx,
        item_label=item,
        window=window,
        constraint=value,
    )


def analyze_value_trend(
    runtime: ToolRuntime, time: TimeQuery, value: ValueConstraint
) -> List[Tuple[str, List[RecordRow]]]:
    """Constraint + window over every item; grouped by item label."""
    window = resolve_time_window(time, runtime.ctx)
    rows = query_rows(runtime.dataset, ctx=runtime.ctx, window=window, constraint=value)
    groups: Dict[str, List[RecordRow]] = {}
    for row in rows:
        groups.setdefault(row.item_label or "(unlabeled)", []).append(row)
    return sorted(groups.items(), key=lambda kv: kv[0])


def view_general_timeline(
    runtime: ToolRuntime, table: str, time: TimeQuery
) -> List[RecordRow]:
    """All of the patient's rows in one table on a given day."""
    from .temporal import Exact, TimePoint

    if isinstance(time, Exact):
        day = time.point.day
    else:
        window = resolve_time_window(time, runtime.ctx)
        day = window.lo.date()
    full_day = Interval(
        dt.datetime.combine(day, dt.time.min),
        dt.datetime.combine(day, dt.time(23, 59, 59)),
    )
    return query_rows(runtime.dataset, ctx=runtime.ctx, table=table, window=full_day)


# -- registry ----------------------------------------------------------------


def _norm_name(name: str) -> str:
    return name.strip().strip("[]").casefold()


@dataclass
class _Registered:
    spec: ToolSpec
    run: Callable


class ToolRegistry:
    def __init__(self) -> None:
        self._tools: Dict[str, _Registered] = {}
        self._names: Dict[str, str] = {}
        self._register_all()

    def _register(self, spec: ToolSpec, run: Callable) -> None:
        if spec.name in self._tools:
            raise ValueError(f"duplicate tool {spec.name}")
        self._tools[spec.name] = _Registered(spec, run)
        for name in (spec.name,) + spec.aliases:
            key = _norm_name(name)
            if self._names.get(key, spec.name) != spec.name:
                raise ValueError(f"duplicate tool name/alias {name}")
            self._names[key] = spec.name

    def _register_all(self) -> None:
        self._register(
            ToolSpec(
                "lexical_search",
                ("Item_Search",),
                "Rank table items lexically similar to a query "
                "(trigram cosine with abbreviation expansion).",
                (("query", "text", True), ("scope", "scope", False), ("top_n", "int", False)),
            ),
            lambda rt, a: {
                "items": [
                    {"label": label, "score": round(score, 6)}
                    for label, score in lexical_search(
                        rt, a["query"], a.get("scope", "patient"), a.get("top_n", DEFAULT_TOP_N)
                    )
                ]
            },
        )
        self._register(
            ToolSpec(
                "semantic_search",
                ("Semantic_Search",),
                "Find conceptually related items in scope via the LLM.",
                (("query", "text", True), ("scope", "scope", False), ("top_n", "int", False)),
            ),
            lambda rt, a: {
                "items": semantic_search(
                    rt, a["query"], a.get("scope", "patient"), a.get("top_n", DEFAULT_TOP_N)
                )
            },
        )
        self._register(
            ToolSpec(
                "get_item_value_distribution",
                ("Top_Values_for_Entities",),
                "Top-K most frequent values of an item across the whole store.",
                (("item", "text", True), ("k", "int", False)),
            ),
            lambda rt, a: {
                "item": a["item"],
                "values": get_item_value_distribution(rt, a["item"], a.get("k")),
            },
        )
        self._register(
            ToolSpec(
                "analyze_category_trend",
                ("Table_Category_Time",),
                "How one table is organized: items grouped by category.",
                (("table", "text", True), ("limit", "int", False)),
            ),
            lambda rt, a: {
                "categories": [
                    {"category": c, "items": items}
                    for c, items in analyze_category_trend(
                        rt, a["table"], a.get("limit", DEFAULT_TOP_N)
                    )
                ]
            },
        )
        self._register(
            ToolSpec(
                "get_item_status_history",
                ("Table_Selected_Item_Time",),
                "Rows of one item inside a resolved time window.",
                (("time", "time", True), ("item", "text", True)),
            ),
            lambda rt, a: {
                "rows": [r.to_payload() for r in get_item_status_history(rt, a["item"], a["time"])]
            },
        )
        self._register(
            ToolSpec(
                "get_item_value_history",
                ("Table_Selected_Item_Value_Time",),
                "Rows of one item inside a window that satisfy a value constraint.",
                (("time", "time", True), ("item", "text", True), ("value", "constraint", True)),
            ),
            lambda rt, a: {
                "rows": [
                    r.to_payload()
                    for r in get_item_value_history(rt, a["item"], a["time"], a["value"])
                ]
            },
        )
        self._register(
            ToolSpec(
                "analyze_value_trend",
                ("Table_Value_Time",),
                "All rows matching a window and value constraint, grouped by item.",
                (("time", "time", True), ("value", "constraint", True)),
            ),
            lambda rt, a: {
                "groups": [
                    {"item": item, "rows": [r.to_payload() for r in rows]}
                    for item, rows in analyze_value_trend(rt, a["time"], a["value"])
                ]
            },
        )
        self._register(
            ToolSpec(
                "view_general_timeline",
                ("Table_Time",),
                "Every patient row in one table on a given day.",
                (("table", "text", True), ("time", "time", True)),
            ),
            lambda rt, a: {
                "rows": [r.to_payload() for r in view_general_timeline(rt, a["table"], a["time"])]
            },
        )

    def specs(self) -> List[ToolSpec]:
        return [reg.spec for reg in self._tools.values()]

    def spec(self, name: str) -> ToolSpec:
        return self._tools[self.resolve(name)].spec

    def resolve(self, name: str) -> str:
        key = _norm_name(name)
        if key not in self._names:
            raise UnknownTool(f"unknown tool {name!r}")
        return self._names[key]

    def schema_doc(self) -> dict:
        """Machine-readable dump of all eight specs."""
        return {"tools": [spec.to_dict() for spec in self.specs()]}

    # -- dispatch -------------------------------------------------------------

    def _coerce(self, spec: ToolSpec, args: Dict[str, str]) -> dict:
        known = {n: (t, req) for n, t, req in spec.arg_schema}
        for name in args:
            if name not in known:
                raise ArgValidationError(f"{spec.name}: unexpected argument {name!r}")
        coerced: dict = {}
        for name, (kind, required) in known.items():
            if name not in args or args[name] == "":
                if required:
                    raise ArgValidationError(f"{spec.name}: missing argument {name!r}")
                continue
            raw = str(args[name]).strip()
            try:
                if kind == "int":
                    coerced[name] = int(raw)
                elif kind == "time":
                    coerced[name] = parse_time_query(raw)
                elif kind == "constraint":
                    coerced[name] = parse_constraint(raw)
                elif kind == "scope":
                    value = raw.casefold()
                    if value not in ("global", "patient"):
                        raise ValueError(f"scope must be global or patient, got {raw!r}")
                    coerced[name] = value
                else:
                    coerced[name] = raw
            except NotetableError:
                raise
            except ValueError as exc:
                raise ArgValidationError(f"{spec.name}: bad argument {name!r}: {exc}")
        return coerced

    def dispatch(self, call: ToolCall, runtime: ToolRuntime) -> ToolResult:
        """Resolve, validate, execute; errors come back as error results."""
        try:
            canonical = self.resolve(call.name)
        except UnknownTool as exc:
            return ToolResult(call.call_id, "error", {}, 0, f"UnknownTool: {exc}")
        reg = self._tools[canonical]
        try:
            args = self._coerce(reg.spec, call.args)
            payload = reg.run(runtime, args)
        except NotetableError as exc:
            return ToolResult(
                call.call_id, "error", {}, 0, f"{type(exc).__name__}: {exc}"
            )
        payload, total = _truncate_payload(payload, runtime.max_rows)
        return ToolResult(call.call_id, "ok", payload, total)


def _truncate_payload(payload: dict, max_rows: int) -> Tuple[dict, int]:
    """Cap row-bearing payloads, leaving an explicit truncation marker."""
    if "rows" in payload:
        total = len(payload["rows"])
        if total > max_rows:
            payload = {
                **payload,
                "rows": payload["rows"][:max_rows],
                "note": f"truncated, {total} total",
            }
        return payload, total
    if "groups" in payload:
        total = sum(len(g["rows"]) for g in payload["groups"])
        if total > max_rows:
            kept = []
            budget = max_rows
            for g in payload["groups"]:
                if budget <= 0:
                    break
                rows = g["rows"][:budget]
                budget -= len(rows)
                kept.append({**g, "rows": rows})
            payload = {**payload, "groups": kept, "note": f"truncated, {total} total"}
        return payload, total
    if "items" in payload:
        return payload, len(payload["items"])
    if "values" in payload:
        return payload, len(payload["values"])
    if "categories" in payload:
        return payload, sum(len(c["items"]) for c in payload["categories"])
    return payload, 0


REGISTRY = ToolRegistry()
