"""Pure-Python kernels: reference implementations of the two hot loops.

Used when the compiled extension is unavailable (or forced via
``NOTETABLE_PURE_PYTHON=1``). Semantics must match ``_native`` exactly; the
equivalence is pinned by tests and the speed gap by benchmarks/bench_kernels.
"""
from __future__ import annotations

import math

BACKEND = "python"

# constraint kinds on the kernel boundary
CONS_NONE = 0
CONS_MORE = 1
CONS_LESS = 2
CONS_BETWEEN = 3


def filter_rows(
    t_start,
    t_end,
    value,
    item_id,
    pat_id,
    adm_id,
    q_item: int,
    q_pat: int,
    q_adm: int,
    has_window: bool,
    win_lo: int,
    win_hi: int,
    cons_kind: int,
    cons_a: float,
    cons_b: float,
    out,
) -> int:
    """Scan all rows, writing matching indices into ``out``; returns count.

    Conventions: ``item_id``/``adm_id`` use -1 for "absent on the row";
    ``q_item``/``q_pat``/``q_adm`` use -1 for "no filter". A row with no
    admission id passes any admission filter (table has no such column).
    Rows with no time (t_start == NO_TIME sentinel, i.e. t_start > t_end
    never happens; absence is encoded as t_start > win range) fail any
    window. Missing values are NaN and fail any constraint.
    """
    n = len(t_start)
    count = 0
    for i in range(n):
        if q_pat >= 0 and pat_id[i] != q_pat:
            continue
        if q_adm >= 0 and adm_id[i] != -1 and adm_id[i] != q_adm:
            continue
        if q_item >= 0 and item_id[i] != q_item:
            continue
        if has_window:
            ts = t_start[i]
            if ts == _NO_TIME or ts > win_hi or t_end[i] < win_lo:
                continue
        if cons_kind != CONS_NONE:
            v = value[i]
            if math.isnan(v):
                continue
            if cons_kind == CONS_MORE:
                if not v > cons_a:
                    continue
            elif cons_kind == CONS_LESS:
                if not v < cons_a:
                    continue
            elif not (cons_a <= v <= cons_b):
                continue
        out[count] = i
        count += 1
    return count


def score_labels(q_ids, q_counts, q_norm, l_ids, l_counts, indptr, l_norms, out) -> None:
    """Cosine of the query trigram vector against every label vector.

    Label vectors are packed CSR-style (``l_ids``/``l_counts`` indexed by
    ``indptr``); both id arrays are sorted ascending per vector.
    """
    nq = len(q_ids)
    nlabels = len(l_norms)
    for j in range(nlabels):
        lo = indptr[j]
        hi = indptr[j + 1]
        dot = 0.0
        a = 0
        b = lo
        while a < nq and b < hi:
            qa = q_ids[a]
            lb = l_ids[b]
            if qa == lb:
                dot += q_counts[a] * l_counts[b]
                a += 1
                b += 1
            elif qa < lb:
                a += 1
            else:
                b += 1
        denom = q_norm * l_norms[j]
        out[j] = dot / denom if denom > 0.0 and dot > 0.0 else 0.0


_NO_TIME = -(2 ** 62)
