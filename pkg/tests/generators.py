"""Seeded generator of small random PALPS models and PCTL formulas.

Models are emitted as concrete syntax so the parser is exercised as well.
Reproduction is guarded by a cap on the total population, which keeps
every generated state space finite.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from palps import ExploreOptions, build, parse_model
from palps.pctl_syntax import atoms
from palps.parser import parse_formula

WEIGHTS = ("1/2", "1/3", "1/4", "2/3", "3/4", "1/5")


@dataclass(frozen=True)
class Generated:
    seed: int
    text: str
    model: object


def _locations(rng):
    n = rng.choice((2, 2, 3))
    locs = ["a", "b", "c"][:n]
    if n == 2:
        edges = [("a", "b")]
    else:
        edges = [("a", "b"), ("b", "c")] + ([("a", "c")] if rng.random() < 0.5 else [])
    return locs, edges


class _Gen:
    def __init__(self, rng, locs, species, consts, cap):
        self.rng = rng
        self.locs = locs
        self.species = species
        self.consts = consts  # species -> list of constant names
        self.cap = cap

    def total(self, s):
        return " + ".join(f"{s}@{l}" for l in self.locs)

    def jump(self, s):
        return self.rng.choice(self.consts[s])

    def proc(self, s, depth):
        rng = self.rng
        options = ["tick", "tick", "move", "rep"]
        if depth < 2:
            options += ["sum", "sum", "cond"]
        if len(self.species) > 1:
            options.append("prey")
        kind = rng.choice(options)
        if kind == "tick":
            if rng.random() < 0.15:
                return "tick . 0"
            return f"tick . {self.jump(s)}"
        if kind == "move":
            return f"sum over l in neigh(here) {{ uniform: go l . tick . {self.jump(s)} }}"
        if kind == "rep":
            count = "out rep . " * rng.choice((1, 1, 2))
            return f"cond({self.total(s)} < {self.cap} -> {count}tick . {self.jump(s)}, true -> tick . {self.jump(s)})"
        if kind == "sum":
            w = rng.choice(WEIGHTS)
            return f"sum {{ {w}: {self.proc(s, depth + 1)} + 1 - {w}: {self.proc(s, depth + 1)} }}"
        if kind == "cond":
            loc = rng.choice(self.locs + ["here"])
            other = rng.choice(self.species)
            n = rng.choice((0, 1, 2))
            op = rng.choice(("=", ">", "<="))
            return f"cond({other}@{loc} {op} {n} -> {self.proc(s, depth + 1)}, true -> {self.proc(s, depth + 1)})"
        victim = rng.choice([t for t in self.species if t != s])
        return f"cond({victim}@here > 0 -> out prey_{victim} . tick . {self.jump(s)}, true -> tick . {self.jump(s)})"


def random_model_text(rng: random.Random) -> str:
    locs, edges = _locations(rng)
    species = ["s"] if rng.random() < 0.6 else ["s", "t"]
    consts = {s: [f"{s.upper()}{i}" for i in range(rng.choice((1, 2, 3)))] for s in species}
    cap = rng.choice((2, 3, 3, 4))
    g = _Gen(rng, locs, species, consts, cap)
    lines = [f"locations {', '.join(locs)};", f"neighbors {', '.join(f'{x} -- {y}' for x, y in edges)};"]
    for s in species:
        for c in consts[s]:
            lines.append(f"process {c} = {g.proc(s, 0)};")
        lines.append(f"species {s} = {consts[s][0]};")
    parts = []
    for s in species:
        for _ in range(rng.choice((1, 1, 2)) if len(species) > 1 else rng.choice((1, 2, 2, 3))):
            parts.append(f"{rng.choice(consts[s])}@({rng.choice(locs)}, {s})")
        parts.append(f"species {s}")
    chans = ", ".join(f"rep_{s}" for s in species)
    lines.append(f"system = ({' | '.join(parts)}) restrict {{{chans}}};")
    return "\n".join(lines) + "\n"


def random_atom(rng: random.Random, model) -> str:
    species = sorted(model.species)
    locs = list(model.habitat.locations)
    s = rng.choice(species)
    kind = rng.randrange(4)
    if kind == 0:
        return f"total({s}) = 0"
    if kind == 1:
        return f"{s}@{rng.choice(locs)} >= 1"
    if kind == 2:
        return f"total({s}) >= {rng.choice((2, 3))}"
    return f"{s}@{rng.choice(locs)} = 0"


def random_path_text(rng: random.Random, model, kind: str) -> str:
    goal = random_atom(rng, model)
    if kind == "X":
        return f"X {goal}"
    left = "true" if rng.random() < 0.5 else f"!({random_atom(rng, model)})"
    if kind == "Uk":
        return f"{left} U{{<={rng.randrange(0, 13)}}} {goal}"
    return f"{left} U {goal}"


def generate_models(seed: int, count: int, max_states: int = 1000, min_states: int = 2):
    """``count`` parseable models whose full state space has at most ``max_states`` states."""
    out = []
    rng = random.Random(seed)
    while len(out) < count:
        s = rng.randrange(1 << 30)
        text = random_model_text(random.Random(s))
        model = parse_model(text, f"<random {s}>")
        _, report = build(model, (), ExploreOptions(max_states=max_states))
        if report.truncated or report.states < min_states:
            continue
        out.append(Generated(s, text, model))
    return out


def formula_set(rng: random.Random, model, per_kind: int = 2) -> list:
    out = []
    for kind in ("X", "Uk", "U"):
        for _ in range(per_kind):
            out.append(parse_formula(f"P=? [ {random_path_text(rng, model, kind)} ]", model))
    return out


def all_atoms(formulas) -> list:
    return [a for f in formulas for a in atoms(f)]
