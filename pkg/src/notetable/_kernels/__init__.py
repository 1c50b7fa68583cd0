"""Kernel backend selection: compiled extension when present, else pure Python.

Set ``NOTETABLE_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and by tests that pin backend equivalence).
"""
import os

from . import pyimpl

if os.environ.get("NOTETABLE_PURE_PYTHON") == "1":
    impl = pyimpl
else:
    try:
        from . import _native as impl  # type: ignore[no-redef]
    except ImportError:
        impl = pyimpl

BACKEND = impl.BACKEND
filter_rows = impl.filter_rows
score_labels = impl.score_labels

CONS_NONE = pyimpl.CONS_NONE
CONS_MORE = pyimpl.CONS_MORE
CONS_LESS = pyimpl.CONS_LESS
CONS_BETWEEN = pyimpl.CONS_BETWEEN
