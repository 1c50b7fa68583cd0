"""Clinical abbreviation lexicon (two-column TSV, many-to-many).

The bundled subset covers common chart abbreviations; a larger external
lexicon can be swapped in via config. Expansion is bidirectional: a query
matching either column yields the other column's texts as search variants.
"""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Set

from .errors import LexiconLoadFailure


def _key(text: str) -> str:
    return " ".join(text.split()).casefold()


class AbbreviationLexicon:
    def __init__(self) -> None:
        self._forward: Dict[str, Set[str]] = defaultdict(set)
        self._reverse: Dict[str, Set[str]] = defaultdict(set)
        self.size = 0

    def add(self, abbreviation: str, expansion: str) -> None:
        abbreviation = abbreviation.strip()
        expansion = expansion.strip()
        if not abbreviation or not expansion:
            return
        self._forward[_key(abbreviation)].add(expansion)
        self._reverse[_key(expansion)].add(abbreviation)
        self.size += 1

    def variants(self, query: str) -> List[str]:
        """All alternate texts for a query, in sorted order (query excluded)."""
        key = _key(query)
        found = set(self._forward.get(key, ())) | set(self._reverse.get(key, ()))
        found.discard(query)
        return sorted(found)

    @classmethod
    def from_file(cls, path: Path | str) -> "AbbreviationLexicon":
        lex = cls()
        try:
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.rstrip("\n")
                    if not line.strip() or line.lstrip().startswith("#"):
                        continue
                    parts = line.split("\t")
                    if len(parts) < 2:
                        continue
                    lex.add(parts[0], parts[1])
        except OSError as exc:
            raise LexiconLoadFailure(f"cannot read lexicon {path}: {exc}") from exc
        return lex

    @classmethod
    def bundled(cls) -> "AbbreviationLexicon":
        return cls.from_file(Path(__file__).parent / "data" / "abbreviations.tsv")
