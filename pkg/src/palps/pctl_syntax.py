"""PCTL state and path formulas over PALPS logical expressions."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class Atom:
    expr: object  # a MYLOC-free BoolExpr


@dataclass(frozen=True)
class Not:
    arg: "StateFormula"


@dataclass(frozen=True)
class And:
    left: "StateFormula"
    right: "StateFormula"


@dataclass(frozen=True)
class Prob:
    """``P op bound [path]``; ``op == "?"`` asks for the value only."""

    op: str
    bound: Fraction | None
    path: "PathFormula"


@dataclass(frozen=True)
class Next:
    arg: "StateFormula"


@dataclass(frozen=True)
class Until:
    left: "StateFormula"
    right: "StateFormula"
    bound: int | None = None


StateFormula = Union[TrueF, Atom, Not, And, Prob]
PathFormula = Union[Next, Until]

TRUE = TrueF()


def atoms(f) -> Iterator[object]:
    """Logical expressions used as atomic propositions, in first-occurrence order."""
    seen = []
    for e in _atoms(f):
        if e not in seen:
            seen.append(e)
            yield e


def _atoms(f):
    if isinstance(f, Atom):
        yield f.expr
    elif isinstance(f, Not):
        yield from _atoms(f.arg)
    elif isinstance(f, And):
        yield from _atoms(f.left)
        yield from _atoms(f.right)
    elif isinstance(f, Prob):
        yield from _atoms(f.path)
    elif isinstance(f, Next):
        yield from _atoms(f.arg)
    elif isinstance(f, Until):
        yield from _atoms(f.left)
        yield from _atoms(f.right)


def is_propositional(f) -> bool:
    if isinstance(f, (TrueF, Atom)):
        return True
    if isinstance(f, Not):
        return is_propositional(f.arg)
    if isinstance(f, And):
        return is_propositional(f.left) and is_propositional(f.right)
    return False
