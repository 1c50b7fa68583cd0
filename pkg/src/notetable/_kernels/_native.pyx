# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the pure-Python kernels in ``pyimpl``."""

from libc.math cimport isnan

BACKEND = "native"

CONS_NONE = 0
CONS_MORE = 1
CONS_LESS = 2
CONS_BETWEEN = 3

cdef long long _NO_TIME = -(2 ** 62)


def filter_rows(
    long long[:] t_start,
    long long[:] t_end,
    double[:] value,
    int[:] item_id,
    int[:] pat_id,
    int[:] adm_id,
    int q_item,
    int q_pat,
    int q_adm,
    bint has_window,
    long long win_lo,
    long long win_hi,
    int cons_kind,
    double cons_a,
    double cons_b,
    int[:] out,
):
    cdef Py_ssize_t n = t_start.shape[0]
    cdef Py_ssize_t i
    cdef int count = 0
    cdef double v
    for i in range(n):
        if q_pat >= 0 and pat_id[i] != q_pat:
            continue
        if q_adm >= 0 and adm_id[i] != -1 and adm_id[i] != q_adm:
            continue
        if q_item >= 0 and item_id[i] != q_item:
            continue
        if has_window:
            if t_start[i] == _NO_TIME or t_start[i] > win_hi or t_end[i] < win_lo:
                continue
        if cons_kind != 0:
            v = value[i]
            if isnan(v):
                continue
            if cons_kind == 1:
                if not v > cons_a:
                    continue
            elif cons_kind == 2:
                if not v < cons_a:
                    continue
            else:
                if not (cons_a <= v and v <= cons_b):
                    continue
        out[count] = i
        count += 1
    return count


def score_labels(
    int[:] q_ids,
    double[:] q_counts,
    double q_norm,
    int[:] l_ids,
    double[:] l_counts,
    long long[:] indptr,
    double[:] l_norms,
    double[:] out,
):
    cdef Py_ssize_t nq = q_ids.shape[0]
    cdef Py_ssize_t nlabels = l_norms.shape[0]
    cdef Py_ssize_t j, a, b, lo, hi
    cdef double dot, denom
    cdef int qa, lb
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
        if denom > 0.0 and dot > 0.0:
            out[j] = dot / denom
        else:
            out[j] = 0.0
