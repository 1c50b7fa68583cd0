"""Schema registry: declarative mapping from delimited files to table roles.

A schema config is a YAML/JSON document; swapping configs is how renamed
("perturbed") schemas are supported without code changes. A bundled default
covering a conventional critical-care table inventory ships in ``data/``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import yaml

from .errors import ConfigError

ROLES = frozenset(
    {
        "patient_id",
        "admission_id",
        "time_point",
        "time_start",
        "time_end",
        "item_ref",
        "item_label",
        "value_text",
        "value_num",
        "value_unit",
        "category",
        "row_id",
        "other",
    }
)

# roles that may appear on at most one column each
_SINGLETON_ROLES = (
    "row_id",
    "patient_id",
    "admission_id",
    "item_ref",
    "item_label",
    "value_num",
    "value_text",
    "value_unit",
    "category",
    "time_point",
    "time_start",
    "time_end",
)


@dataclass
class TableSchema:
    """Column-role mapping for one table."""

    table_name: str
    file: str
    column_roles: Dict[str, str]
    delimiter: str = ","
    item_dictionary_ref: Optional[str] = None

    def __post_init__(self) -> None:
        for col, role in self.column_roles.items():
            if role not in ROLES:
                raise ConfigError(
                    f"table {self.table_name}: unknown role {role!r} on column {col!r}"
                )
        counts = {r: 0 for r in _SINGLETON_ROLES}
        for role in self.column_roles.values():
            if role in counts:
                counts[role] += 1
        if counts["row_id"] != 1:
            raise ConfigError(
                f"table {self.table_name}: exactly one row_id column required"
            )
        for role, n in counts.items():
            if role != "row_id" and n > 1:
                raise ConfigError(
                    f"table {self.table_name}: role {role} declared on {n} columns"
                )
        has_point = counts["time_point"] == 1
        has_start = counts["time_start"] == 1
        has_end = counts["time_end"] == 1
        if has_point and (has_start or has_end):
            raise ConfigError(
                f"table {self.table_name}: time_point and interval roles both declared"
            )
        if has_start != has_end:
            raise ConfigError(
                f"table {self.table_name}: time_start and time_end must be paired"
            )
        if counts["item_ref"] == 1 and counts["item_label"] == 0 and not self.item_dictionary_ref:
            raise ConfigError(
                f"table {self.table_name}: item_ref without item_label needs a dictionary"
            )

    def column_for(self, role: str) -> Optional[str]:
        for col, r in self.column_roles.items():
            if r == role:
                return col
        return None


@dataclass
class DictionarySpec:
    """A lookup table resolving item references to labels (and categories)."""

    name: str
    file: str
    key: str
    label: str
    category: Optional[str] = None
    delimiter: str = ","


@dataclass
class AdmissionsSpec:
    """Optional table supplying admit/discharge times per admission."""

    file: str
    patient_id: str
    admission_id: str
    admit_time: str
    discharge_time: str
    delimiter: str = ","


@dataclass
class SchemaConfig:
    tables: Dict[str, TableSchema]
    dictionaries: Dict[str, DictionarySpec] = field(default_factory=dict)
    admissions: Optional[AdmissionsSpec] = None
    base_dir: Optional[Path] = None

    def __post_init__(self) -> None:
        for schema in self.tables.values():
            ref = schema.item_dictionary_ref
            if ref and ref not in self.dictionaries:
                raise ConfigError(
                    f"table {schema.table_name}: dictionary {ref!r} not declared"
                )

    def resolve(self, file_name: str) -> Path:
        path = Path(file_name)
        if path.is_absolute() or self.base_dir is None:
            return path
        return self.base_dir / path


def load_schema_config(path: Path | str) -> SchemaConfig:
    """Load and validate a schema config document."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return schema_config_from_dict(doc, base_dir=path.parent)


def schema_config_from_dict(doc: dict, base_dir: Optional[Path] = None) -> SchemaConfig:
    if not isinstance(doc, dict) or "tables" not in doc:
        raise ConfigError("schema config must be a mapping with a 'tables' section")
    default_delim = doc.get("delimiter", ",")
    dictionaries: Dict[str, DictionarySpec] = {}
    for name, spec in (doc.get("dictionaries") or {}).items():
        dictionaries[name] = DictionarySpec(
            name=name,
            file=spec["file"],
            key=spec["key"],
            label=spec["label"],
            category=spec.get("category"),
            delimiter=spec.get("delimiter", default_delim),
        )
    tables: Dict[str, TableSchema] = {}
    for name, spec in doc["tables"].items():
        roles = spec.get("roles")
        if not roles:
            raise ConfigError(f"table {name}: missing roles mapping")
        tables[name] = TableSchema(
            table_name=name,
            file=spec["file"],
            column_roles=dict(roles),
            delimiter=spec.get("delimiter", default_delim),
            item_dictionary_ref=spec.get("dictionary"),
        )
    admissions = None
    if doc.get("admissions"):
        a = doc["admissions"]
        admissions = AdmissionsSpec(
            file=a["file"],
            patient_id=a["patient_id"],
            admission_id=a["admission_id"],
            admit_time=a["admit_time"],
            discharge_time=a["discharge_time"],
            delimiter=a.get("delimiter", default_delim),
        )
    return SchemaConfig(
        tables=tables,
        dictionaries=dictionaries,
        admissions=admissions,
        base_dir=base_dir,
    )


def default_schema_path() -> Path:
    """Path of the bundled critical-care schema config."""
    return Path(__file__).parent / "data" / "mimic3_schema.yaml"
