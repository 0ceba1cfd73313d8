"""Bundled example models and static analysis of individual behaviour."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .parser import parse_formula_file, parse_model
from .syntax import (
    OWN_REP,
    Cond,
    Const,
    Go,
    Model,
    NeighborSum,
    Nil,
    Out,
    Prefix,
    PSum,
    Tick,
    expand_neighbor_sum,
)

CORPUS_DIR = Path(__file__).resolve().parent / "corpus"

_DESCRIPTIONS = {
    "dispersal": "lattice dispersal with reproduction on exclusive sites",
    "predator_prey": "dispersing prey and a predator that starves after two prey-less rounds",
    "genotypes": "two genotypes with distinct dispersal probabilities and juvenile competition",
    "woodthrush": "juveniles, breeders and floaters with patch capacities and a dispersal table",
    "tiny_dispersal": "2x2 torus, three individuals: first-round dispersal",
    "tiny_extinction": "two patches, death and capped reproduction: extinction and recolonization",
    "tiny_competition": "two species on two patches: dominance",
}


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    model_path: Path
    property_path: Path | None
    expected_path: Path | None
    description: str

    def text(self) -> str:
        return self.model_path.read_text(encoding="utf-8")

    def load(self, **params) -> Model:
        return parse_model(self.text(), str(self.model_path), params or None)

    @property
    def parameters(self) -> dict:
        return dict(self.load().params)

    def formulas(self, model: Model | None = None) -> list:
        if self.property_path is None:
            return []
        model = model or self.load()
        return [f for _, f in parse_formula_file(self.property_path.read_text(encoding="utf-8"), model)]

    def expected(self) -> dict:
        """Oracle values recorded for the property file: formula text -> exact probability."""
        if self.expected_path is None:
            return {}
        raw = json.loads(self.expected_path.read_text(encoding="utf-8"))
        return {k: {q: Fraction(v) for q, v in d.items()} for k, d in raw["values"].items()}


def corpus_list() -> list[CorpusEntry]:
    out = []
    for path in sorted(CORPUS_DIR.glob("*.palps")):
        name = path.stem
        prop = path.with_suffix(".pctl")
        exp = path.with_name(name + ".expected.json")
        out.append(
            CorpusEntry(
                name,
                path,
                prop if prop.exists() else None,
                exp if exp.exists() else None,
                _DESCRIPTIONS.get(name, ""),
            )
        )
    return out


def corpus_entry(name: str) -> CorpusEntry:
    for e in corpus_list():
        if e.name == name:
            return e
    raise KeyError(f"no corpus model named {name!r}")


# ---------------------------------------------------------------------------
# derivative graphs


@dataclass(frozen=True)
class Edge:
    kind: str  # "tick", "go", "in", "out", "prob", "cond"
    channel: str | None
    target: tuple  # (process, location)


def _edges(model: Model, proc, species: str, loc: str, depth: int = 0) -> list[Edge]:
    """Steps of a located process with every guard and weight considered possible."""
    p = proc
    if isinstance(p, Nil):
        return []
    if isinstance(p, Prefix):
        act, cont = p.action, p.cont
        if isinstance(act, Tick):
            return [Edge("tick", None, (cont, loc))]
        if isinstance(act, Go):
            if not model.habitat.adjacent(loc, act.target):
                return []
            return [Edge("go", None, (cont, act.target))]
        ch = act.channel
        if ch == OWN_REP:
            ch = f"rep_{species}"
        return [Edge("out" if isinstance(act, Out) else "in", ch, (cont, loc))]
    if isinstance(p, PSum):
        return [Edge("prob", None, (q, loc)) for _, q in p.branches]
    if isinstance(p, NeighborSum):
        return _edges(model, expand_neighbor_sum(p, loc, model.habitat), species, loc, depth)
    if isinstance(p, Cond):
        return [Edge("cond", None, (q, loc)) for _, q in p.branches]
    if isinstance(p, Const):
        if depth > 256:
            raise ValueError(f"unguarded recursion through {p.name}")
        return _edges(model, model.constants[p.name], species, loc, depth + 1)
    raise TypeError(p)


def derivative_graph(model: Model, proc, species: str, loc: str) -> dict:
    """All (process, location) derivatives reachable from ``proc`` at ``loc``."""
    graph: dict = {}
    stack = [(proc, loc)]
    while stack:
        node = stack.pop()
        if node in graph:
            continue
        edges = _edges(model, node[0], species, node[1])
        graph[node] = edges
        stack.extend(e.target for e in edges)
    return graph


def per_round_counts(graph: dict, starts, counted) -> tuple[int, int]:
    """Min and max number of ``counted`` edges over tick-free maximal paths.

    A round starts at one of ``starts`` and ends at a tick or when the
    individual becomes inactive.  Raises ``ValueError`` if a tick-free cycle
    contains a counted edge (the count would be unbounded).
    """
    comp = _tick_free_sccs(graph)
    members: dict = {}
    for node, c in comp.items():
        members.setdefault(c, []).append(node)
    for u, edges in graph.items():
        for e in edges:
            if e.kind != "tick" and comp[e.target] == comp[u] and counted(e):
                raise ValueError("counted action on a tick-free cycle")
    memo: dict = {}

    def value(c):
        if c in memo:
            return memo[c]
        lo = hi = None
        nodes = members[c]
        cyclic = len(nodes) > 1 or any(e.target == nodes[0] and e.kind != "tick" for e in graph[nodes[0]])
        options = [(0, 0)] if cyclic else []
        for u in nodes:
            if not graph[u]:
                options.append((0, 0))
            for e in graph[u]:
                if e.kind == "tick":
                    options.append((0, 0))
                elif comp[e.target] != c:
                    a, b = value(comp[e.target])
                    k = 1 if counted(e) else 0
                    options.append((a + k, b + k))
        lo = min(a for a, _ in options)
        hi = max(b for _, b in options)
        memo[c] = (lo, hi)
        return memo[c]

    vals = [value(comp[s]) for s in starts]
    return min(a for a, _ in vals), max(b for _, b in vals)


def _tick_free_sccs(graph: dict) -> dict:
    """Strongly connected components of the non-tick edges (Tarjan)."""
    index: dict = {}
    low: dict = {}
    comp: dict = {}
    stack: list = []
    on: set = set()
    counter = [0]

    def strong(v):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on.add(v)
        for e in graph[v]:
            if e.kind == "tick":
                continue
            w = e.target
            if w not in index:
                strong(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            while True:
                w = stack.pop()
                on.discard(w)
                comp[w] = index[v]
                if w == v:
                    break

    for v in graph:
        if v not in index:
            strong(v)
    return comp


def round_starts(graph: dict, initial) -> list:
    """The initial node and every node entered by a tick."""
    out = [initial]
    for edges in graph.values():
        for e in edges:
            if e.kind == "tick" and e.target not in out:
                out.append(e.target)
    return out

