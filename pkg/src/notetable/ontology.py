"""Two-level item taxonomy: construction, persistence, and inference-time
narrowing (groups -> subgroups -> candidate items).

Construction runs the item list through sliding windows; each window's prompt
carries the names accumulated so far, so the model can reuse or mint names.
Unparseable items get one retry, then land in the "(unassigned)" quarantine
bucket so totality is preserved and reportable.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .errors import ConfigError, EmptyItems, MalformedLlmOutput
from .llm import LlmClient, load_template, render_prompt

logger = logging.getLogger(__name__)

UNASSIGNED = "(unassigned)"


@dataclass
class Subgroup:
    name: str
    items: List[str] = field(default_factory=list)


@dataclass
class Group:
    name: str
    subgroups: List[Subgroup] = field(default_factory=list)


@dataclass
class Ontology:
    groups: List[Group]
    version: str = "1"
    item_index: Dict[str, Tuple[str, str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.item_index:
            self.item_index = self._build_index()
        self._validate()

    def _build_index(self) -> Dict[str, Tuple[str, str]]:
        index: Dict[str, Tuple[str, str]] = {}
        for group in self.groups:
            for subgroup in group.subgroups:
                for item in subgroup.items:
                    if item in index:
                        raise ConfigError(
                            f"item {item!r} appears in {index[item]} and "
                            f"({group.name}, {subgroup.name})"
                        )
                    index[item] = (group.name, subgroup.name)
        return index

    def _validate(self) -> None:
        names = [g.name for g in self.groups]
        if len(names) != len(set(names)):
            raise ConfigError("duplicate group names")
        for group in self.groups:
            subs = [s.name for s in group.subgroups]
            if len(subs) != len(set(subs)):
                raise ConfigError(f"duplicate subgroup names in group {group.name!r}")
        rebuilt = self._build_index()
        if rebuilt != self.item_index:
            raise ConfigError("item_index inconsistent with the nested structure")

    @property
    def group_names(self) -> List[str]:
        return [g.name for g in self.groups]

    def group(self, name: str) -> Group:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    def subgroup_items(self, group_name: str, subgroup_name: str) -> List[str]:
        for s in self.group(group_name).subgroups:
            if s.name == subgroup_name:
                return list(s.items)
        raise KeyError((group_name, subgroup_name))

    # -- persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "groups": [
                {
                    "name": g.name,
                    "subgroups": [
                        {"name": s.name, "items": list(s.items)} for s in g.subgroups
                    ],
                }
                for g in self.groups
            ],
        }

    def save(self, path: Path | str) -> None:
        from .util import write_atomic

        write_atomic(Path(path), json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n")

    @classmethod
    def load(cls, path: Path | str) -> "Ontology":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "Ontology":
        groups = [
            Group(
                name=g["name"],
                subgroups=[
                    Subgroup(name=s["name"], items=list(s["items"]))
                    for s in g.get("subgroups", [])
                ],
            )
            for g in doc.get("groups", [])
        ]
        return cls(groups=groups, version=str(doc.get("version", "1")))


@dataclass
class WindowAssignment:
    window_index: int
    items: List[str]
    assignments: Dict[str, str]
    newly_created: Set[str] = field(default_factory=set)


@dataclass
class BuildResult:
    assignments: Dict[str, str]  # item -> group (or subgroup) name
    windows: List[WindowAssignment]
    unassigned: List[str]


def _extract_json_object(text: str) -> dict:
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end <= start:
        raise MalformedLlmOutput("no JSON object in response")
    try:
        doc = json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise MalformedLlmOutput(f"bad JSON: {exc}")
    if not isinstance(doc, dict):
        raise MalformedLlmOutput("JSON response is not an object")
    return doc


def _window_pass(
    llm: LlmClient,
    kind: str,
    known: List[str],
    numbered: Dict[str, str],
    templates_dir,
    tag: str,
) -> Dict[str, str]:
    """One mapping call: numbered items -> category names. Raises on no JSON."""
    template = load_template("ontology_mapping", templates_dir)
    prompt = render_prompt(
        template,
        {
            "CATEGORY_KIND": kind,
            "KNOWN_CATEGORIES": json.dumps(known, indent=0),
            "ITEMS": json.dumps(numbered, indent=0),
        },
    )
    doc = _extract_json_object(llm.ask(prompt, tag=tag))
    return {str(k): str(v).strip() for k, v in doc.items() if str(v).strip()}


def build_groups(
    items: Sequence[str],
    w: int,
    llm: LlmClient,
    templates_dir=None,
) -> BuildResult:
    """Assign every item to a group via sequential sliding windows."""
    if not items:
        raise EmptyItems("no items to build an ontology over")
    if w < 1:
        raise ValueError("window size must be >= 1")
    known: List[str] = []
    assignments: Dict[str, str] = {}
    windows: List[WindowAssignment] = []
    unassigned: List[str] = []
    for w_index, start in enumerate(range(0, len(items), w)):
        window_items = list(items[start : start + w])
        numbered = {str(start + i): label for i, label in enumerate(window_items)}
        try:
            mapped = _window_pass(llm, "group", known, numbered, templates_dir, "build_groups")
        except MalformedLlmOutput:
            mapped = {}
        missing = {k: v for k, v in numbered.items() if k not in mapped}
        if missing:
            try:
                mapped.update(
                    _window_pass(llm, "group", known, missing, templates_dir, "build_groups")
                )
            except MalformedLlmOutput:
                pass
        created: Set[str] = set()
        window_map: Dict[str, str] = {}
        for key, label in numbered.items():
            name = mapped.get(key, "").strip() or UNASSIGNED
            if name == UNASSIGNED:
                unassigned.append(label)
            elif name not in known:
                known.append(name)
                created.add(name)
            assignments[label] = name
            window_map[label] = name
        windows.append(WindowAssignment(w_index, window_items, window_map, created))
    if unassigned:
        logger.warning("build_groups: %d item(s) unassigned", len(unassigned))
    return BuildResult(assignments, windows, unassigned)


def build_subgroups(
    pairs: Sequence[Tuple[str, str]],
    w: int,
    llm: LlmClient,
    templates_dir=None,
) -> BuildResult:
    """Assign every (item, group) pair to a subgroup; the running subgroup
    list accumulates per group."""
    if w < 1:
        raise ValueError("window size must be >= 1")
    known_by_group: Dict[str, List[str]] = {}
    assignments: Dict[str, str] = {}
    windows: List[WindowAssignment] = []
    unassigned: List[str] = []
    items = list(pairs)
    for w_index, start in enumerate(range(0, len(items), w)):
        window_pairs = items[start : start + w]
        numbered = {
            str(start + i): f"{item} [group: {group}]"
            for i, (item, group) in enumerate(window_pairs)
        }
        known_render = [
            f"{group} :: {sub}" for group, subs in known_by_group.items() for sub in subs
        ]
        try:
            mapped = _window_pass(
                llm, "subgroup", known_render, numbered, templates_dir, "build_subgroups"
            )
        except MalformedLlmOutput:
            mapped = {}
        missing = {k: v for k, v in numbered.items() if k not in mapped}
        if missing:
            try:
                mapped.update(
                    _window_pass(
                        llm, "subgroup", known_render, missing, templates_dir, "build_subgroups"
                    )
                )
            except MalformedLlmOutput:
                pass
        created: Set[str] = set()
        window_map: Dict[str, str] = {}
        for i, (item, group) in enumerate(window_pairs):
            key = str(start + i)
            name = mapped.get(key, "").strip() or UNASSIGNED
            if name == UNASSIGNED:
                unassigned.append(item)
            else:
                subs = known_by_group.setdefault(group, [])
                if name not in subs:
                    subs.append(name)
                    created.add(f"{group} :: {name}")
            assignments[item] = name
            window_map[item] = name
        windows.append(
            WindowAssignment(w_index, [item for item, _ in window_pairs], window_map, created)
        )
    if unassigned:
        logger.warning("build_subgroups: %d item(s) unassigned", len(unassigned))
    return BuildResult(assignments, windows, unassigned)


def assemble_ontology(
    items: Sequence[str],
    group_of: Dict[str, str],
    subgroup_of: Dict[str, str],
    version: str = "1",
) -> Ontology:
    """Fold the two assignment maps into a nested Ontology, preserving item
    order inside every subgroup."""
    groups: Dict[str, Dict[str, List[str]]] = {}
    for item in items:
        g = group_of.get(item, UNASSIGNED)
        s = subgroup_of.get(item, UNASSIGNED)
        groups.setdefault(g, {}).setdefault(s, []).append(item)
    return Ontology(
        groups=[
            Group(name=g, subgroups=[Subgroup(name=s, items=v) for s, v in subs.items()])
            for g, subs in groups.items()
        ],
        version=version,
    )


def build_ontology(
    items: Sequence[str], w: int, llm: LlmClient, templates_dir=None, version: str = "1"
) -> Tuple[Ontology, List[str]]:
    """Full construction: groups pass, then subgroups pass over the pairs."""
    group_result = build_groups(items, w, llm, templates_dir)
    pairs = [
        (item, group_result.assignments[item])
        for item in items
        if group_result.assignments[item] != UNASSIGNED
    ]
    sub_result = build_subgroups(pairs, w, llm, templates_dir)
    ontology = assemble_ontology(
        items, group_result.assignments, sub_result.assignments, version
    )
    return ontology, sorted(set(group_result.unassigned) | set(sub_result.unassigned))


# -- inference-time selection --------------------------------------------------

_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def _letter(i: int) -> str:
    if i < 26:
        return _LETTERS[i]
    return _LETTERS[i // 26 - 1] + _LETTERS[i % 26]


_ANSWER_TOKEN_RE = re.compile(r"\b([A-Z]{1,2})\s*[.)]")


def _parse_choice_letters(text: str, option_count: int) -> List[int]:
    """Letters -> option indexes; out-of-range letters dropped with a warning."""
    if not text.strip() or text.strip().casefold() in ("none", "(none)", "none."):
        return []
    picked: List[int] = []
    seen: Set[int] = set()
    found = _ANSWER_TOKEN_RE.findall(text)
    if not found:
        raise MalformedLlmOutput("no option letters in answer")
    for letters in found:
        if len(letters) == 1:
            index = _LETTERS.index(letters)
        else:
            index = (_LETTERS.index(letters[0]) + 1) * 26 + _LETTERS.index(letters[1])
        if 0 <= index < option_count:
            if index not in seen:
                seen.add(index)
                picked.append(index)
        else:
            logger.warning("choice letter %s outside option range, dropped", letters)
    return picked


def _select_options(
    segment_text: str, options: List[str], llm: LlmClient, templates_dir, tag: str
) -> List[int]:
    if not options:
        return []
    template = load_template("category_selection", templates_dir)
    rendered_options = "\n".join(f"{_letter(i)}. {name}" for i, name in enumerate(options))
    prompt = render_prompt(
        template,
        {"CLINICAL_NOTE": segment_text, "SELECTABLE_CATEGORIES": rendered_options},
    )
    from .llm import ask_structured

    try:
        picked, _ = ask_structured(
            llm, prompt, lambda t: _parse_choice_letters(t, len(options)), tag=tag
        )
    except MalformedLlmOutput:
        logger.warning("%s: malformed selection, treating as empty", tag)
        return []
    return picked


def select_groups(
    segment_text: str, ontology: Ontology, llm: LlmClient, templates_dir=None
) -> List[str]:
    """Multi-choice over group names (options presented alphabetically)."""
    options = sorted(ontology.group_names)
    picked = _select_options(segment_text, options, llm, templates_dir, "select_groups")
    return [options[i] for i in picked]


def select_subgroups(
    segment_text: str,
    selected_groups: Sequence[str],
    ontology: Ontology,
    llm: LlmClient,
    templates_dir=None,
) -> List[Tuple[str, str]]:
    """Multi-choice over the subgroups of the selected groups."""
    pairs: List[Tuple[str, str]] = []
    for name in selected_groups:
        try:
            group = ontology.group(name)
        except KeyError:
            logger.warning("selected group %r not in ontology, dropped", name)
            continue
        pairs.extend((group.name, s.name) for s in group.subgroups)
    pairs.sort(key=lambda p: f"{p[0]} / {p[1]}")
    options = [f"{g} / {s}" for g, s in pairs]
    picked = _select_options(segment_text, options, llm, templates_dir, "select_subgroups")
    return [pairs[i] for i in picked]


def candidate_items(
    subgroups: Sequence[Tuple[str, str]],
    ontology: Ontology,
    patient_labels: Set[str],
) -> List[str]:
    """Union of the subgroup item lists minus the patient's own items,
    in lexicographic order."""
    exclude = {" ".join(l.split()).casefold() for l in patient_labels}
    out: Set[str] = set()
    for group_name, subgroup_name in subgroups:
        for item in ontology.subgroup_items(group_name, subgroup_name):
            if " ".join(item.split()).casefold() not in exclude:
                out.add(item)
    return sorted(out)
