"""Multiplicity sets: finite truncations with an optional infinity flag and tail tag."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional

_TAIL_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\([^()]*\))?$")


@dataclass(frozen=True)
class MSet:
    """A set of positive integers, possibly carrying infinity and a symbolic tail.

    ``tail`` names a generator for the elements beyond the stored truncation,
    e.g. ``"pow(2)"`` for {2, 4, 8, ...}.
    """

    elements: tuple[int, ...] = ()
    has_infinity: bool = False
    tail: Optional[str] = None

    def __post_init__(self) -> None:
        elems = tuple(sorted(set(int(e) for e in self.elements)))
        if any(e < 1 for e in elems):
            raise ValueError("multiplicities are positive integers")
        object.__setattr__(self, "elements", elems)
        if self.tail is not None and not _TAIL_RE.match(self.tail):
            raise ValueError(f"malformed tail descriptor {self.tail!r}")

    @classmethod
    def of(cls, *values: int) -> "MSet":
        return cls(tuple(values))

    @classmethod
    def from_iter(cls, values: Iterable[int], **kw) -> "MSet":
        return cls(tuple(values), **kw)

    def __iter__(self):
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, x: object) -> bool:
        return x in self.elements

    @property
    def is_empty(self) -> bool:
        return not self.elements and not self.has_infinity and self.tail is None

    @property
    def is_finite(self) -> bool:
        return not self.has_infinity and self.tail is None

    def as_set(self) -> frozenset[int]:
        return frozenset(self.elements)

    def to_json(self) -> dict:
        return {"elements": list(self.elements), "infinity": self.has_infinity, "tail": self.tail}

    def __str__(self) -> str:
        parts = [str(e) for e in self.elements]
        if self.tail:
            parts.append(f"tail:{self.tail}")
        if self.has_infinity:
            parts.append("inf")
        return "{" + ",".join(parts) + "}"


def parse_mset(text: str) -> MSet:
    """Parse the comma syntax ``"2,4,8,tail:pow(2)"`` with optional ``inf``."""
    text = text.strip().strip("{}")
    if not text:
        raise ValueError("empty set literal")
    elems: list[int] = []
    inf = False
    tail = None
    # split on commas that are not inside parentheses
    for tok in re.split(r",(?![^()]*\))", text):
        tok = tok.strip()
        if not tok:
            continue
        if tok.lower() in ("inf", "infinity", "∞"):
            inf = True
        elif tok.startswith("tail:"):
            tail = tok[5:].strip()
        else:
            try:
                elems.append(int(tok))
            except ValueError:
                raise ValueError(f"bad set element {tok!r}") from None
    return MSet(tuple(elems), inf, tail)
