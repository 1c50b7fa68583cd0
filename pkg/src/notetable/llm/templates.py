"""Prompt templates: plain text files with ``<<<<NAME>>>>`` placeholders."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from ..errors import MissingPlaceholder

_PLACEHOLDER_RE = re.compile(r"<<<<([A-Za-z0-9_]+)>>>>")
_BUNDLED_DIR = Path(__file__).parent.parent / "prompts"


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    @property
    def required(self) -> frozenset:
        return frozenset(_PLACEHOLDER_RE.findall(self.body))


def render_prompt(template: PromptTemplate, bindings: Dict[str, str]) -> str:
    """Substitute every placeholder; no escaping, no partial renders."""
    missing = template.required - set(bindings)
    if missing:
        raise MissingPlaceholder(
            f"template {template.name}: unbound placeholder(s) {sorted(missing)}"
        )
    text = template.body
    for key in template.required:
        text = text.replace(f"<<<<{key}>>>>", str(bindings[key]))
    return text


def load_template(name: str, directory: Optional[Path | str] = None) -> PromptTemplate:
    base = Path(directory) if directory else _BUNDLED_DIR
    path = base / f"{name}.txt"
    if not path.exists() and directory is not None:
        # fall back to the bundled copy for templates the override dir omits
        path = _BUNDLED_DIR / f"{name}.txt"
    body = path.read_text(encoding="utf-8")
    return PromptTemplate(name=name, body=body)


def list_templates(directory: Optional[Path | str] = None) -> List[str]:
    base = Path(directory) if directory else _BUNDLED_DIR
    return sorted(p.stem for p in base.glob("*.txt"))
