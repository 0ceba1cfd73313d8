"""Breadth-first construction of the reachable MDP and its explicit-state export."""

from __future__ import annotations

import hashlib
import os
from collections import deque
from dataclasses import dataclass, field

from .environment import sat
from .parser import format_bool
from .semantics import Configuration, Interpreter, close_channels, initial_configuration
from .syntax import Model, mentions_here


@dataclass(frozen=True)
class ExploreOptions:
    max_states: int | None = None
    max_depth: int | None = None
    max_population: int | None = None  # per location, all species together
    close_channels: bool = True
    check_compat: bool = True


@dataclass(frozen=True)
class Choice:
    """One resolvable option of a state: a distribution over successor indices."""

    label: str  # "prob" for the distribution of a probabilistic state
    transitions: tuple  # ((target, probability), ...)
    tick: bool = False


@dataclass
class Mdp:
    states: list  # Configuration per index
    initial: int
    kinds: list  # "prob", "nondet", "terminal", "deadlock", "truncated"
    choices: list  # list of Choice per state
    atoms: list = field(default_factory=list)
    labels: dict = field(default_factory=dict)  # atom index -> frozenset of states
    habitat: object = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.states)

    def num_transitions(self) -> int:
        return sum(len(c.transitions) for cs in self.choices for c in cs)

    def truncated(self) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k == "truncated"]

    def atom_index(self, expr) -> int:
        try:
            return self.atoms.index(expr)
        except ValueError:
            raise KeyError(f"unregistered atom {format_bool(expr)}") from None

    def register_atoms(self, exprs) -> None:
        """Label states with further MYLOC-free expressions (idempotent)."""
        for e in exprs:
            if e in self.atoms:
                continue
            if mentions_here(e):
                raise ValueError(f"atom {format_bool(e)} mentions 'here'")
            self.atoms.append(e)
            habitat = self.habitat
            self.labels[len(self.atoms) - 1] = frozenset(
                i for i, c in enumerate(self.states) if sat(c.env, e, habitat)
            )


@dataclass(frozen=True)
class BuildReport:
    states: int
    transitions: int
    truncated: bool
    reason: str = ""
    max_depth: int = 0
    terminal: int = 0
    deadlock: int = 0

    def lines(self) -> list[str]:
        out = [
            f"states: {self.states}",
            f"transitions: {self.transitions}",
            f"terminal: {self.terminal}",
            f"deadlock: {self.deadlock}",
            f"depth: {self.max_depth}",
            f"truncated: {'yes' if self.truncated else 'no'}",
        ]
        if self.reason:
            out.append(f"truncation-reason: {self.reason}")
        return out


def prepare(model: Model, opts: ExploreOptions) -> Model:
    return close_channels(model) if opts.close_channels else model


def build(model: Model, atoms=(), opts: ExploreOptions = ExploreOptions()) -> tuple[Mdp, BuildReport]:
    model = prepare(model, opts)
    interp = Interpreter(model, check_compat=opts.check_compat)
    init = initial_configuration(model)
    index: dict[Configuration, int] = {init: 0}
    states = [init]
    depth = [0]
    kinds: list = [None]
    choices: list = [None]
    reasons = set()
    queue = deque([0])
    while queue:
        i = queue.popleft()
        c = states[i]
        if opts.max_depth is not None and depth[i] >= opts.max_depth:
            kinds[i], choices[i] = "truncated", []
            reasons.add("max-depth")
            continue
        if opts.max_population is not None and _crowded(c, opts.max_population):
            kinds[i], choices[i] = "truncated", []
            reasons.add("max-population")
            continue
        succ = interp.successors(c)
        targets = [e[1] for e in succ.entries]
        if opts.max_states is not None:
            fresh = len({t for t in targets if t not in index})
            if len(states) + fresh > opts.max_states:
                kinds[i], choices[i] = "truncated", []
                reasons.add("max-states")
                continue

        def idx(t):
            j = index.get(t)
            if j is None:
                j = index[t] = len(states)
                states.append(t)
                depth.append(depth[i] + 1)
                kinds.append(None)
                choices.append(None)
                queue.append(j)
            return j

        if succ.kind == "probabilistic":
            kinds[i] = "prob"
            choices[i] = [Choice("prob", tuple((idx(t), w) for w, t in succ.entries))]
        elif succ.kind == "nondeterministic":
            kinds[i] = "nondet"
            choices[i] = [
                Choice(str(lab), ((idx(t), 1),), lab.kind == "tick") for lab, t, _ in succ.entries
            ]
        else:
            kinds[i], choices[i] = succ.kind, []

    mdp = Mdp(states, 0, kinds, choices, habitat=model.habitat)
    mdp.register_atoms(atoms)
    report = BuildReport(
        states=len(states),
        transitions=mdp.num_transitions(),
        truncated=bool(reasons),
        reason=", ".join(sorted(reasons)),
        max_depth=max(depth),
        terminal=kinds.count("terminal"),
        deadlock=kinds.count("deadlock"),
    )
    return mdp, report


def _crowded(c: Configuration, limit: int) -> bool:
    per_loc: dict = {}
    for (loc, _), n in c.env.items_sorted():
        per_loc[loc] = per_loc.get(loc, 0) + n
    return any(n > limit for n in per_loc.values())


# ---------------------------------------------------------------------------
# export


def digest(c: Configuration) -> str:
    return hashlib.sha256(c.key.encode("utf-8")).hexdigest()[:16]


def _prob_text(p) -> str:
    return repr(float(p))


def export(mdp: Mdp, path: str) -> list[str]:
    """Write ``path.sta``, ``path.tra`` and ``path.lab``; returns the file names."""
    base = os.fspath(path)
    for ext in (".palps", ".sta", ".tra", ".lab"):
        if base.endswith(ext):
            base = base[: -len(ext)]
    files = [base + ".sta", base + ".tra", base + ".lab"]
    with open(files[0], "w", encoding="utf-8", newline="\n") as f:
        for i, c in enumerate(mdp.states):
            f.write(f"{i}:{digest(c)}\n")
    with open(files[1], "w", encoding="utf-8", newline="\n") as f:
        for i, cs in enumerate(mdp.choices):
            for k, ch in enumerate(cs):
                for j, p in ch.transitions:
                    f.write(f"{i} {k} {j} {_prob_text(p)} {int(ch.tick)} {ch.label}\n")
    with open(files[2], "w", encoding="utf-8", newline="\n") as f:
        f.write(f"#atoms: {len(mdp.atoms)}\n")
        for a, e in enumerate(mdp.atoms):
            f.write(f"# {a} {format_bool(e)}\n")
        per_state: dict[int, list[int]] = {}
        for a in range(len(mdp.atoms)):
            for s in mdp.labels[a]:
                per_state.setdefault(s, []).append(a)
        for s in sorted(per_state):
            f.write(f"{s}: {' '.join(map(str, sorted(per_state[s])))}\n")
    return files
