"""Numeric value constraints and their wire syntax (``90[more]``)."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .errors import ConstraintParseError

_NUM = r"-?\d+(?:\.\d+)?"
_MORE_RE = re.compile(rf"^({_NUM})\[more\]$")
_LESS_RE = re.compile(rf"^({_NUM})\[less\]$")
_BETWEEN_RE = re.compile(rf"^({_NUM})-({_NUM})\[between\]$")


@dataclass(frozen=True)
class More:
    """Strictly greater than the bound."""

    bound: float


@dataclass(frozen=True)
class Less:
    """Strictly less than the bound."""

    bound: float


@dataclass(frozen=True)
class Between:
    """Inclusive on both bounds."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ConstraintParseError(
                f"between bounds out of order: {self.lo} > {self.hi}"
            )


ValueConstraint = Union[More, Less, Between]


def satisfies(constraint: ValueConstraint, value: float) -> bool:
    if isinstance(constraint, More):
        return value > constraint.bound
    if isinstance(constraint, Less):
        return value < constraint.bound
    if isinstance(constraint, Between):
        return constraint.lo <= value <= constraint.hi
    raise TypeError(f"not a constraint: {constraint!r}")


def parse_constraint(text: str) -> ValueConstraint:
    """Parse ``x[more]``, ``x[less]`` or ``a-b[between]``."""
    text = text.strip()
    m = _MORE_RE.match(text)
    if m:
        return More(float(m[1]))
    m = _LESS_RE.match(text)
    if m:
        return Less(float(m[1]))
    m = _BETWEEN_RE.match(text)
    if m:
        return Between(float(m[1]), float(m[2]))
    raise ConstraintParseError(f"unrecognized value constraint: {text!r}")


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def format_constraint(constraint: ValueConstraint) -> str:
    """Inverse of parse_constraint (bijective on canonical forms)."""
    if isinstance(constraint, More):
        return f"{_fmt(constraint.bound)}[more]"
    if isinstance(constraint, Less):
        return f"{_fmt(constraint.bound)}[less]"
    if isinstance(constraint, Between):
        return f"{_fmt(constraint.lo)}-{_fmt(constraint.hi)}[between]"
    raise TypeError(f"not a constraint: {constraint!r}")
