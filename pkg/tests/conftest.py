"""Shared fixtures: a tiny hand-written store and CSV-writing helpers."""
from __future__ import annotations

import csv
from pathlib import Path

import pytest

from notetable.datastore import ingest_tables
from notetable.schema import schema_config_from_dict


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


TINY_SCHEMA = {
    "dictionaries": {
        "d_items": {"file": "D_ITEMS.csv", "key": "ITEMID", "label": "LABEL", "category": "CATEGORY"}
    },
    "admissions": {
        "file": "ADMISSIONS.csv",
        "patient_id": "SUBJECT_ID",
        "admission_id": "HADM_ID",
        "admit_time": "ADMITTIME",
        "discharge_time": "DISCHTIME",
    },
    "tables": {
        "chartevents": {
            "file": "CHARTEVENTS.csv",
            "dictionary": "d_items",
            "roles": {
                "ROW_ID": "row_id",
                "SUBJECT_ID": "patient_id",
                "HADM_ID": "admission_id",
                "ITEMID": "item_ref",
                "CHARTTIME": "time_point",
                "VALUE": "value_text",
                "VALUENUM": "value_num",
                "VALUEUOM": "value_unit",
            },
        },
        "prescriptions": {
            "file": "PRESCRIPTIONS.csv",
            "roles": {
                "ROW_ID": "row_id",
                "SUBJECT_ID": "patient_id",
                "HADM_ID": "admission_id",
                "STARTDATE": "time_start",
                "ENDDATE": "time_end",
                "DRUG": "item_label",
            },
        },
    },
}


@pytest.fixture
def tiny_store(tmp_path):
    """Two-table store: point-time vitals plus an interval prescription."""
    write_csv(
        tmp_path / "D_ITEMS.csv",
        ["ITEMID", "LABEL", "CATEGORY"],
        [
            ["1", "Heart Rate", "Vitals"],
            ["2", "SpO2", "Vitals"],
            ["3", "Stool Amount", "Output"],
        ],
    )
    write_csv(
        tmp_path / "ADMISSIONS.csv",
        ["SUBJECT_ID", "HADM_ID", "ADMITTIME", "DISCHTIME"],
        [["P1", "A1", "2172-03-12 08:00:00", "2172-03-20 16:00:00"]],
    )
    write_csv(
        tmp_path / "CHARTEVENTS.csv",
        ["ROW_ID", "SUBJECT_ID", "HADM_ID", "ITEMID", "CHARTTIME", "VALUE", "VALUENUM", "VALUEUOM"],
        [
            ["ce1", "P1", "A1", "1", "2172-03-12 09:00:00", "80", "80", "bpm"],
            ["ce2", "P1", "A1", "2", "2172-03-13 09:00:00", "97", "97", "%"],
            ["ce3", "P1", "A1", "2", "2172-03-11 00:00:00", "95", "95", "%"],
            ["ce4", "P1", "A1", "3", "2172-03-14 10:00:00", "Small", "", ""],
            ["ce5", "P1", "A1", "3", "2172-03-15 10:00:00", "Small", "", ""],
            ["ce6", "P1", "A1", "3", "2172-03-16 10:00:00", "Medium", "", ""],
            ["ce7", "P1", "A1", "3", "2172-03-16 11:00:00", "Small", "", ""],
            ["ce8", "P1", "A1", "3", "2172-03-17 10:00:00", "Medium", "", ""],
            ["ce9", "P1", "A1", "3", "2172-03-17 11:00:00", "Large", "", ""],
        ],
    )
    write_csv(
        tmp_path / "PRESCRIPTIONS.csv",
        ["ROW_ID", "SUBJECT_ID", "HADM_ID", "STARTDATE", "ENDDATE", "DRUG"],
        [["rx1", "P1", "A1", "2172-03-13", "2172-03-15", "Vancomycin"]],
    )
    config = schema_config_from_dict(TINY_SCHEMA, base_dir=tmp_path)
    dataset, report = ingest_tables(config)
    return dataset, report
