"""Anchors, the two extraction paths, merge, scope classification, filtering."""
import pytest

from notetable.llm import ScriptedLlm, ScriptRule
from notetable.ontology import Ontology
from notetable.pipeline import (
    CandidateEntity,
    ClinicalNote,
    Segment,
    TemporalStatus,
    classify_temporal_status,
    extract_ontology_entities,
    extract_patient_entities,
    extract_temporal_anchors,
    filter_scope,
    merge_entities,
    parse_anchor_lines,
    parse_questionnaire,
)
from notetable.pipeline.scope import DEFAULT_QUESTION_EFFECTS, apply_effects
from notetable.temporal import Duration, Exact

from scenario import ONTOLOGY_DOC


def note_of(*lines, note_type="physician", chart="2172-03-15"):
    return ClinicalNote(
        note_id="n1",
        note_type=note_type,
        patient_id="P1",
        admission_id="A1",
        lines=list(lines),
        chart_time=None if chart is None else __import__("notetable.temporal", fromlist=["parse_time_point"]).parse_time_point(chart),
    )


class TestAnchors:
    def test_worked_example(self):
        text = (
            "- 2172-03-12 - Admission\n"
            "- 2172-03-15 - ceftriaxone was initiated\n"
            "- 2172-03-20 - Discharge"
        )
        anchors = parse_anchor_lines(text)
        assert [(str(a.date), a.description) for a in anchors] == [
            ("2172-03-12", "Admission"),
            ("2172-03-15", "ceftriaxone was initiated"),
            ("2172-03-20", "Discharge"),
        ]

    def test_invalid_date_dropped(self):
        anchors = parse_anchor_lines("- 2172-13-40 - impossible\n- 2172-03-15 - ok")
        assert len(anchors) == 1 and anchors[0].description == "ok"

    def test_no_dates_is_empty(self):
        note = note_of("no dates here")
        llm = ScriptedLlm.of(("dated events", "Nothing qualifies."))
        assert extract_temporal_anchors(note, llm) == []


class TestPatientExtraction:
    def test_worked_example(self):
        note = note_of("Intravenous fluids were initiated", "Vitals: T: 97 BP: 94/49")
        llm = ScriptedLlm.of(
            ("answer key", "Line number 1. T: [97] - [Temperature Fahrenheit]")
        )
        got = extract_patient_entities(
            note,
            Segment(0, 1, 0),
            {"Temperature Fahrenheit", "Heart Rate"},
            {"Temperature Fahrenheit": ["97", "98"]},
            llm,
        )
        assert len(got) == 1
        entity = got[0]
        assert (entity.name, entity.line) == ("T", 1)
        assert entity.associated_values == ["97"]
        assert entity.linked_items == ["Temperature Fahrenheit"]
        assert entity.source == "patient"

    def test_empty_patient_set_short_circuits(self):
        note = note_of("x")
        got = extract_patient_entities(note, Segment(0, 0, 0), set(), {}, llm=None)
        assert got == []

    def test_out_of_record_items_filtered(self):
        note = note_of("BP 120/80")
        llm = ScriptedLlm.of(
            ("answer key", "Line number 0. BP: [120] - [Some Hallucinated Item]")
        )
        got = extract_patient_entities(
            note, Segment(0, 0, 0), {"Heart Rate"}, {"Heart Rate": []}, llm
        )
        assert got == []

    def test_nothing_matching_is_empty(self):
        note = note_of("general prose")
        llm = ScriptedLlm.of(("answer key", "none"))
        assert (
            extract_patient_entities(
                note, Segment(0, 0, 0), {"Heart Rate"}, {"Heart Rate": []}, llm
            )
            == []
        )


class TestOntologyExtraction:
    @pytest.fixture
    def ontology(self):
        return Ontology.from_dict(ONTOLOGY_DOC)

    def test_two_entities_from_bp_line(self, ontology):
        note = note_of("The patient developed hypertension", "BP improved to 130/85 mmHg")
        llm = ScriptedLlm(
            [
                # first call selects the group, second the (single) subgroup
                ScriptRule(
                    "MULTIPLE CHOICE",
                    ["C. Hemodynamics & Vitals", "A. Hemodynamics & Vitals / Vitals"],
                ),
                ScriptRule(
                    "Candidate items:",
                    [
                        "Line number 1. BP - (Non Invasive Blood Pressure systolic) - (130)\n"
                        "Line number 1. BP dia - (Non Invasive Blood Pressure diastolic) - (85)"
                    ],
                ),
            ]
        )
        got = extract_ontology_entities(
            note, Segment(0, 1, 0), ontology, {"Heart Rate"}, [], llm
        )
        assert [(e.name, e.associated_values, e.linked_items) for e in got] == [
            ("BP", ["130"], ["Non Invasive Blood Pressure systolic"]),
            ("BP dia", ["85"], ["Non Invasive Blood Pressure diastolic"]),
        ]
        assert all(e.source == "ontology" for e in got)

    def test_empty_candidates_is_empty(self, ontology):
        note = note_of("x")
        llm = ScriptedLlm(
            [
                ScriptRule("MULTIPLE CHOICE", ["A. Exam"]),  # then Exam/Abdomen chosen
            ]
        )
        # patient already has every Exam item: candidates end up empty
        got = extract_ontology_entities(
            note, Segment(0, 0, 0), ontology, {"Abdominal Assessment"}, [], llm
        )
        assert got == []

    def test_suppression_of_already_extracted(self, ontology):
        note = note_of("Lisinopril was continued")
        previous = [
            CandidateEntity(name="Lisinopril", line=0, linked_items=["Lisinopril"], source="patient")
        ]
        llm = ScriptedLlm(
            [
                ScriptRule(
                    "MULTIPLE CHOICE",
                    ["E. Medications", "C. Medications / Cardiovascular"],
                ),
                ScriptRule(
                    "Candidate items:",
                    ["Line number 0. Lisinopril - (Lisinopril) - ()"],
                ),
            ]
        )
        got = extract_ontology_entities(
            note, Segment(0, 0, 0), ontology, {"Heart Rate"}, previous, llm
        )
        assert got == []


class TestMerge:
    def test_disjoint_concatenation(self):
        a = [CandidateEntity("x", 1, source="patient")]
        b = [CandidateEntity("y", 2, source="ontology")]
        assert [e.name for e in merge_entities(a, b)] == ["x", "y"]

    def test_patient_wins_collision(self):
        a = [CandidateEntity("Temp", 3, source="patient")]
        b = [CandidateEntity("  temp ", 3, source="ontology")]
        merged = merge_entities(a, b)
        assert len(merged) == 1 and merged[0].source == "patient"

    def test_union_bound(self):
        a = [CandidateEntity(f"e{i}", i, source="patient") for i in range(4)]
        b = [CandidateEntity(f"e{i}", i, source="ontology") for i in range(2, 7)]
        assert len(merge_entities(a, b)) <= len(a) + len(b)


def scope_reply(yes=None, event=None):
    yes = yes or {}
    blocks = []
    for q in range(1, 11):
        answer = "Yes" if q in yes else "No"
        blocks.append(f"{q}.\nReason: because\nAnswer: ({answer})")
    if event:
        blocks.append(f"Event time: {event}")
    return "\n".join(blocks)


class TestQuestionnaire:
    def test_parse_pairs_numbers_and_answers(self):
        answers, event = parse_questionnaire(scope_reply(yes={2, 4}, event="2172-03-12"))
        assert answers[2] and answers[4] and not answers[1]
        assert event == Exact(__import__("notetable.temporal", fromlist=["parse_time_point"]).parse_time_point("2172-03-12"))

    def test_event_span(self):
        _, event = parse_questionnaire(scope_reply(event="2172-03-12~2172-03-14"))
        assert isinstance(event, Duration)

    def test_unknown_event_time(self):
        _, event = parse_questionnaire(scope_reply(event="unknown"))
        assert event is None

    def test_mapping_table(self):
        # every question's yes answer lands on its documented effect
        for question, effect in DEFAULT_QUESTION_EFFECTS.items():
            status, exclusions, info = apply_effects({question: True}, DEFAULT_QUESTION_EFFECTS)
            if effect == "past":
                assert status is TemporalStatus.PAST
            elif effect == "plan":
                assert status is TemporalStatus.PLAN
            elif effect.startswith("exclude:"):
                assert status is TemporalStatus.ACTIVE
                assert exclusions == {effect.split(":", 1)[1]}
            else:
                assert status is TemporalStatus.ACTIVE
                assert not exclusions and info

    def test_all_no_is_active_unflagged(self):
        status, exclusions, info = apply_effects(
            {q: False for q in range(1, 11)}, DEFAULT_QUESTION_EFFECTS
        )
        assert status is TemporalStatus.ACTIVE and not exclusions and not info

    def test_past_outranks_plan(self):
        status, _, _ = apply_effects({2: True, 4: True}, DEFAULT_QUESTION_EFFECTS)
        assert status is TemporalStatus.PAST


class TestClassify:
    def test_pmh_yes_gives_past(self):
        note = note_of("Past Medical History: hypertension")
        entity = CandidateEntity("hypertension", 0)
        llm = ScriptedLlm.of(("about the entity", scope_reply(yes={2})))
        status, exclusions, event = classify_temporal_status(entity, [], note, llm)
        assert status is TemporalStatus.PAST and not exclusions

    def test_plan_question(self):
        note = note_of("Plan: consider MRI")
        entity = CandidateEntity("MRI", 0)
        llm = ScriptedLlm.of(("about the entity", scope_reply(yes={4})))
        status, _, _ = classify_temporal_status(entity, [], note, llm)
        assert status is TemporalStatus.PLAN

    def test_double_garbage_degrades_to_active_unclassified(self):
        note = note_of("x")
        entity = CandidateEntity("x", 0)
        llm = ScriptedLlm([ScriptRule("about the entity", ["?", "??"])])
        status, exclusions, event = classify_temporal_status(entity, [], note, llm)
        assert status is TemporalStatus.ACTIVE
        assert exclusions == {"unclassified"}
        assert event is None


class TestFilterScope:
    def _entity(self, name, status, flags=frozenset()):
        entity = CandidateEntity(name, 0)
        entity.status = status
        entity.exclusion_flags = set(flags)
        return entity

    def test_all_active_unchanged(self):
        entities = [self._entity(f"e{i}", "Active") for i in range(3)]
        kept, removed = filter_scope(entities)
        assert kept == entities and not removed

    def test_mixed_statuses(self):
        entities = [
            self._entity("a", "Active"),
            self._entity("b", "Past"),
            self._entity("c", "Plan"),
            self._entity("d", "Active", {"opinion"}),
        ]
        kept, removed = filter_scope(entities)
        assert [e.name for e in kept] == ["a"]
        assert removed == {"status:Past": 1, "status:Plan": 1, "flag:opinion": 1}

    def test_subset_always(self):
        entities = [self._entity(f"e{i}", s) for i, s in enumerate(["Active", "Past", "Active"])]
        kept, _ = filter_scope(entities)
        assert set(id(e) for e in kept) <= set(id(e) for e in entities)
