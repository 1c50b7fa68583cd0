"""Schema-config validation and the renamed-schema swap."""
import pytest

from notetable.datastore import ingest_tables, query_rows
from notetable.errors import ConfigError
from notetable.schema import TableSchema, schema_config_from_dict
from notetable.temporal import Narrative, resolve_time_window

from conftest import write_csv


def table(roles, dictionary=None):
    return TableSchema(
        table_name="t", file="t.csv", column_roles=roles, item_dictionary_ref=dictionary
    )


class TestValidation:
    def test_exactly_one_row_id(self):
        with pytest.raises(ConfigError):
            table({"A": "patient_id"})
        with pytest.raises(ConfigError):
            table({"A": "row_id", "B": "row_id"})

    def test_singleton_roles(self):
        with pytest.raises(ConfigError):
            table({"A": "row_id", "B": "patient_id", "C": "patient_id"})

    def test_time_forms_mutually_exclusive(self):
        with pytest.raises(ConfigError):
            table({"A": "row_id", "B": "time_point", "C": "time_start", "D": "time_end"})

    def test_interval_roles_must_pair(self):
        with pytest.raises(ConfigError):
            table({"A": "row_id", "B": "time_start"})

    def test_item_ref_needs_dictionary_or_label(self):
        with pytest.raises(ConfigError):
            table({"A": "row_id", "B": "item_ref"})
        table({"A": "row_id", "B": "item_ref"}, dictionary="d")  # ok
        table({"A": "row_id", "B": "item_ref", "C": "item_label"})  # ok

    def test_unknown_role_rejected(self):
        with pytest.raises(ConfigError):
            table({"A": "row_id", "B": "wibble"})

    def test_undeclared_dictionary_rejected(self):
        with pytest.raises(ConfigError):
            schema_config_from_dict(
                {
                    "tables": {
                        "t": {
                            "file": "t.csv",
                            "dictionary": "ghost",
                            "roles": {"A": "row_id", "B": "item_ref"},
                        }
                    }
                }
            )

    def test_no_time_role_is_fine(self):
        table({"A": "row_id", "B": "item_label"})


def _write_store(tmp_path, table_file, columns, schema_doc):
    write_csv(
        tmp_path / table_file,
        columns,
        [
            ["r1", "P1", "A1", "Heart Rate", "2172-03-12 09:00:00", "92"],
            ["r2", "P1", "A1", "Heart Rate", "2172-03-13 09:00:00", "88"],
            ["r3", "P1", "A1", "SpO2", "2172-03-15 09:00:00", "96"],
        ],
    )
    return schema_config_from_dict(schema_doc, base_dir=tmp_path)


class TestRenamedSchemaSwap:
    """The same data under renamed tables/columns must answer identically
    once the schema config is swapped - no code changes."""

    ORIGINAL_DOC = {
        "tables": {
            "chartevents": {
                "file": "CHARTEVENTS.csv",
                "roles": {
                    "ROW_ID": "row_id", "SUBJECT_ID": "patient_id",
                    "HADM_ID": "admission_id", "LABEL": "item_label",
                    "CHARTTIME": "time_point", "VALUENUM": "value_num",
                },
            }
        }
    }
    RENAMED_DOC = {
        "tables": {
            "vitals_timeseries": {
                "file": "VITALS_TIMESERIES.csv",
                "roles": {
                    "ID": "row_id", "PERSON_REF": "patient_id",
                    "STAY_REF": "admission_id", "ITEM_NAME": "item_label",
                    "OBSERVED_AT": "time_point", "VALUE_NUM": "value_num",
                },
            }
        }
    }

    def test_equivalent_answers(self, tmp_path):
        orig_dir = tmp_path / "orig"
        orig_dir.mkdir()
        pert_dir = tmp_path / "pert"
        pert_dir.mkdir()
        original = _write_store(
            orig_dir, "CHARTEVENTS.csv",
            ["ROW_ID", "SUBJECT_ID", "HADM_ID", "LABEL", "CHARTTIME", "VALUENUM"],
            self.ORIGINAL_DOC,
        )
        renamed = _write_store(
            pert_dir, "VITALS_TIMESERIES.csv",
            ["ID", "PERSON_REF", "STAY_REF", "ITEM_NAME", "OBSERVED_AT", "VALUE_NUM"],
            self.RENAMED_DOC,
        )
        ds_a, _ = ingest_tables(original)
        ds_b, _ = ingest_tables(renamed)
        assert ds_a.item_labels == ds_b.item_labels
        ctx_a = ds_a.patient_context("P1", "A1")
        ctx_b = ds_b.patient_context("P1", "A1")
        win_a = resolve_time_window(Narrative("admission"), ctx_a)
        win_b = resolve_time_window(Narrative("admission"), ctx_b)
        ids_a = [r.row_id for r in query_rows(ds_a, ctx_a, item_label="heart rate", window=win_a)]
        ids_b = [r.row_id for r in query_rows(ds_b, ctx_b, item_label="heart rate", window=win_b)]
        assert ids_a == ids_b == ["r1", "r2"]


class TestFileOverrides:
    def test_explicit_file_list_restricts_and_locates(self, tmp_path):
        elsewhere = tmp_path / "elsewhere"
        elsewhere.mkdir()
        write_csv(
            elsewhere / "CHARTEVENTS.csv",
            ["ROW_ID", "SUBJECT_ID", "HADM_ID", "LABEL", "CHARTTIME", "VALUENUM"],
            [["r1", "P1", "A1", "Heart Rate", "2172-03-12 09:00:00", "92"]],
        )
        doc = {
            "tables": {
                "chartevents": {
                    "file": "CHARTEVENTS.csv",
                    "roles": {
                        "ROW_ID": "row_id", "SUBJECT_ID": "patient_id",
                        "HADM_ID": "admission_id", "LABEL": "item_label",
                        "CHARTTIME": "time_point", "VALUENUM": "value_num",
                    },
                },
                "unfetched": {
                    "file": "MISSING.csv",
                    "roles": {"ROW_ID": "row_id", "X": "item_label"},
                },
            }
        }
        config = schema_config_from_dict(doc, base_dir=tmp_path)
        dataset, report = ingest_tables(config, files=[elsewhere / "CHARTEVENTS.csv"])
        assert list(dataset.rows) == ["chartevents"]
        assert report.tables["chartevents"].rows_read == 1
