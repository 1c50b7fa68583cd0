"""Benchmark the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--rows 200000] [--labels 5000]

Covers the two hot loops: the row-filter scan that sits under every
retrieval tool, and trigram-cosine scoring over an item-label set.
"""
from __future__ import annotations

import argparse
import math
import random
import time

import numpy as np

from notetable._kernels import pyimpl

try:
    from notetable._kernels import _native
except ImportError:
    _native = None

NO_TIME = -(2 ** 62)


def build_rows(rng: random.Random, n: int):
    t_start = np.empty(n, dtype=np.int64)
    t_end = np.empty(n, dtype=np.int64)
    value = np.empty(n, dtype=np.float64)
    item = np.empty(n, dtype=np.int32)
    pat = np.empty(n, dtype=np.int32)
    adm = np.empty(n, dtype=np.int32)
    for i in range(n):
        if rng.random() < 0.05:
            t_start[i] = t_end[i] = NO_TIME
        else:
            a = rng.randrange(0, 2_600_000)
            t_start[i] = a
            t_end[i] = a + rng.randrange(0, 90_000)
        value[i] = float("nan") if rng.random() < 0.2 else rng.uniform(0, 200)
        item[i] = rng.randrange(0, 500)
        pat[i] = rng.randrange(0, 20)
        adm[i] = rng.randrange(0, 20)
    return t_start, t_end, value, item, pat, adm


def bench_filter(impl, cols, queries, out) -> float:
    started = time.perf_counter()
    for q in queries:
        impl.filter_rows(*cols, *q, out)
    return time.perf_counter() - started


def build_label_index(rng: random.Random, n_labels: int):
    words = [
        "arterial", "blood", "pressure", "heart", "rate", "urine", "output",
        "oxygen", "saturation", "glucose", "sodium", "potassium", "temperature",
        "respiratory", "volume", "systolic", "diastolic", "mean", "left", "right",
    ]
    labels = [
        " ".join(rng.sample(words, rng.randrange(2, 5))) + f" {i}"
        for i in range(n_labels)
    ]
    vocab = {}
    ids_parts, counts, indptr, norms = [], [], [0], []
    for label in labels:
        padded = " " + label.lower() + " "
        grams = {}
        for i in range(len(padded) - 2):
            g = padded[i : i + 3]
            grams[g] = grams.get(g, 0) + 1
        pairs = sorted((vocab.setdefault(g, len(vocab)), float(c)) for g, c in grams.items())
        ids_parts.extend(p[0] for p in pairs)
        counts.extend(p[1] for p in pairs)
        indptr.append(len(ids_parts))
        norms.append(math.sqrt(sum(c * c for _, c in pairs)))
    return (
        labels,
        vocab,
        np.array(ids_parts, dtype=np.int32),
        np.array(counts, dtype=np.float64),
        np.array(indptr, dtype=np.int64),
        np.array(norms, dtype=np.float64),
    )


def bench_trigram(impl, queries, packed, out) -> float:
    _, vocab, l_ids, l_counts, indptr, norms = packed
    started = time.perf_counter()
    for text in queries:
        padded = " " + text.lower() + " "
        grams = {}
        for i in range(len(padded) - 2):
            g = padded[i : i + 3]
            grams[g] = grams.get(g, 0) + 1
        norm = math.sqrt(sum(c * c for c in grams.values()))
        pairs = sorted((vocab[g], float(c)) for g, c in grams.items() if g in vocab)
        q_ids = np.fromiter((p[0] for p in pairs), dtype=np.int32, count=len(pairs))
        q_counts = np.fromiter((p[1] for p in pairs), dtype=np.float64, count=len(pairs))
        impl.score_labels(q_ids, q_counts, norm, l_ids, l_counts, indptr, norms, out)
    return time.perf_counter() - started


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=200_000)
    parser.add_argument("--labels", type=int, default=5_000)
    parser.add_argument("--queries", type=int, default=200)
    args = parser.parse_args()

    rng = random.Random(42)
    print(f"row-filter scan: {args.rows} rows x {args.queries} queries")
    cols = build_rows(rng, args.rows)
    out = np.empty(args.rows, dtype=np.int32)
    queries = []
    for _ in range(args.queries):
        lo = rng.randrange(0, 2_600_000)
        queries.append(
            (
                rng.randrange(-1, 500),        # item
                rng.randrange(-1, 20),         # patient
                rng.randrange(-1, 20),         # admission
                True, lo, lo + 200_000,        # window
                rng.randrange(0, 4),           # constraint kind
                50.0, 150.0,
            )
        )
    t_py = bench_filter(pyimpl, cols, queries, out)
    rows_scanned = args.rows * args.queries
    print(f"  python : {t_py:8.3f}s  ({rows_scanned / t_py / 1e6:7.1f} M rows/s)")
    if _native is not None:
        t_nat = bench_filter(_native, cols, queries, out)
        print(f"  native : {t_nat:8.3f}s  ({rows_scanned / t_nat / 1e6:7.1f} M rows/s)")
        print(f"  speedup: {t_py / t_nat:8.1f}x")
    else:
        print("  native : not built")

    print(f"\ntrigram scoring: {args.labels} labels x {args.queries} queries")
    packed = build_label_index(rng, args.labels)
    scores = np.zeros(args.labels)
    texts = [packed[0][rng.randrange(args.labels)][:12] for _ in range(args.queries)]
    t_py = bench_trigram(pyimpl, texts, packed, scores)
    scored = args.labels * args.queries
    print(f"  python : {t_py:8.3f}s  ({scored / t_py / 1e6:7.1f} M labels/s)")
    if _native is not None:
        t_nat = bench_trigram(_native, texts, packed, scores)
        print(f"  native : {t_nat:8.3f}s  ({scored / t_nat / 1e6:7.1f} M labels/s)")
        print(f"  speedup: {t_py / t_nat:8.1f}x")
    else:
        print("  native : not built")


if __name__ == "__main__":
    main()
