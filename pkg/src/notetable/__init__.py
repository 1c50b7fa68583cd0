"""notetable: consistency checking between clinical notes and EHR-style tables.

Pipeline: ingest delimited tables into a read-only store; segment a note and
resolve its temporal references; extract table-alignable entities (patient
records first, ontology-guided for the rest); keep only current-admission
entities; verify each one through an agentic loop over eight table-exploration
tools with a FIFO validation cache; score against gold annotations.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
