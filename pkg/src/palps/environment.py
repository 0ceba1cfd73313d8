"""Population environment: per-location species counts and expression evaluation."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from fractions import Fraction

from .syntax import (
    HERE,
    Attr,
    BAnd,
    Binary,
    BNot,
    BTrue,
    Compare,
    Habitat,
    Located,
    Nil,
    Num,
    Par,
    Pop,
    PopAll,
    Restrict,
    Unary,
)


class EnvironmentUndefined(Exception):
    """A count would drop below zero: the environment and system disagree."""


class EvaluationError(Exception):
    pass


class UndefinedAttribute(EvaluationError):
    pass


class ArithmeticDomain(EvaluationError):
    pass


class Environment(Mapping):
    """Immutable map ``(location, species) -> positive count``."""

    __slots__ = ("_counts", "_key", "_hash")

    def __init__(self, counts: Mapping[tuple[str, str], int] | Iterable = ()):
        data = dict(counts)
        for k, v in data.items():
            if v <= 0:
                raise ValueError(f"non-positive count {v} for {k}")
        self._counts = data
        self._key = tuple(sorted(data.items()))
        self._hash = hash(self._key)

    def __getitem__(self, key):
        return self._counts[key]

    def __iter__(self):
        return iter(k for k, _ in self._key)

    def __len__(self):
        return len(self._counts)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Environment):
            return self._key == other._key
        return NotImplemented

    def __repr__(self):
        inner = ", ".join(f"({loc},{s},{n})" for (loc, s), n in self._key)
        return "{" + inner + "}"

    def items_sorted(self):
        return self._key


EMPTY = Environment()


def num(env: Environment, loc: str, species: str) -> int:
    return env._counts.get((loc, species), 0)


def num_all(env: Environment, loc: str) -> int:
    return sum(n for (l, _), n in env._key if l == loc)


def inc(env: Environment, species: str, loc: str) -> Environment:
    counts = dict(env._counts)
    counts[(loc, species)] = counts.get((loc, species), 0) + 1
    return Environment(counts)


def dec(env: Environment, species: str, loc: str) -> Environment:
    counts = dict(env._counts)
    n = counts.get((loc, species), 0)
    if n == 0:
        raise EnvironmentUndefined(f"no individual of {species} at {loc}")
    if n == 1:
        del counts[(loc, species)]
    else:
        counts[(loc, species)] = n - 1
    return Environment(counts)


# ---------------------------------------------------------------------------
# deltas


def add_deltas(*deltas: Mapping[tuple[str, str], int]) -> dict[tuple[str, str], int]:
    out: dict[tuple[str, str], int] = {}
    for d in deltas:
        for k, v in d.items():
            n = out.get(k, 0) + v
            if n:
                out[k] = n
            else:
                out.pop(k, None)
    return out


def merge(env: Environment, deltas: Iterable[Mapping[tuple[str, str], int]]) -> Environment:
    """Apply the pointwise sum of ``deltas`` to ``env``."""
    total = add_deltas(*deltas)
    if not total:
        return env
    counts = dict(env._counts)
    for k, v in total.items():
        n = counts.get(k, 0) + v
        if n < 0:
            raise EnvironmentUndefined(f"count of {k[1]} at {k[0]} would become {n}")
        if n:
            counts[k] = n
        else:
            counts.pop(k, None)
    return Environment(counts)


def env_of(system) -> Environment:
    """Census of the non-nil located individuals of a system term."""
    counts: dict[tuple[str, str], int] = {}
    stack = [system]
    while stack:
        s = stack.pop()
        if isinstance(s, Located):
            if not isinstance(s.proc, Nil):
                key = (s.loc, s.species)
                counts[key] = counts.get(key, 0) + 1
        elif isinstance(s, Par):
            stack.extend(s.items)
        elif isinstance(s, Restrict):
            stack.append(s.body)
        elif isinstance(s, tuple):
            stack.extend(s)
    return Environment(counts)


# ---------------------------------------------------------------------------
# evaluation


def _resolve(loc, here):
    if loc is HERE:
        if here is None:
            raise EvaluationError("'here' has no referent outside an individual")
        return here
    return loc


def _pow(a, b):
    if isinstance(b, Fraction) and b.denominator == 1:
        if a == 0 and b < 0:
            raise ZeroDivisionError
        return Fraction(a) ** int(b)
    r = float(a) ** float(b)
    if isinstance(r, complex):
        raise ArithmeticDomain(f"{a} ^ {b} is not real")
    return r


def _apply_unary(op, x):
    if op == "neg":
        return -x
    if op == "abs":
        return abs(x)
    if op == "floor":
        return Fraction(math.floor(x))
    if op == "ceil":
        return Fraction(math.ceil(x))
    if op == "exp":
        return math.exp(x)
    if op == "log":
        if x <= 0:
            raise ArithmeticDomain(f"log of non-positive value {x}")
        return math.log(x)
    if op == "sqrt":
        if x < 0:
            raise ArithmeticDomain(f"sqrt of negative value {x}")
        r = math.isqrt(x.numerator) if isinstance(x, Fraction) and x.denominator == 1 else None
        if r is not None and r * r == x:
            return Fraction(r)
        return math.sqrt(x)
    raise ValueError(op)


def _apply_binary(op, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    if op == "^":
        return _pow(a, b)
    if op == "min":
        return min(a, b)
    if op == "max":
        return max(a, b)
    raise ValueError(op)


def eval_arith(env: Environment, w, habitat: Habitat, here: str | None = None):
    """Value of an arithmetic expression; exact (Fraction) whenever possible."""
    if isinstance(w, Num):
        return w.value
    if isinstance(w, Pop):
        return Fraction(num(env, _resolve(w.loc, here), w.species))
    if isinstance(w, PopAll):
        return Fraction(num_all(env, _resolve(w.loc, here)))
    if isinstance(w, Attr):
        loc = _resolve(w.loc, here)
        try:
            return habitat.attributes[(w.name, loc)]
        except KeyError:
            where = f" ({w.span})" if w.span else ""
            raise UndefinedAttribute(f"attribute {w.name} undefined at {loc}{where}") from None
    try:
        if isinstance(w, Unary):
            return _apply_unary(w.op, eval_arith(env, w.arg, habitat, here))
        if isinstance(w, Binary):
            return _apply_binary(
                w.op, eval_arith(env, w.left, habitat, here), eval_arith(env, w.right, habitat, here)
            )
    except ZeroDivisionError:
        where = f" at {w.span}" if w.span else ""
        raise ArithmeticDomain(f"division by zero{where}") from None
    except OverflowError as exc:
        raise ArithmeticDomain(str(exc)) from None
    raise TypeError(f"not an arithmetic expression: {w!r}")


_CMP = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def sat(env: Environment, e, habitat: Habitat, here: str | None = None) -> bool:
    if isinstance(e, BTrue):
        return True
    if isinstance(e, BNot):
        return not sat(env, e.arg, habitat, here)
    if isinstance(e, BAnd):
        return sat(env, e.left, habitat, here) and sat(env, e.right, habitat, here)
    if isinstance(e, Compare):
        return _CMP[e.op](eval_arith(env, e.left, habitat, here), eval_arith(env, e.right, habitat, here))
    raise TypeError(f"not a logical expression: {e!r}")
