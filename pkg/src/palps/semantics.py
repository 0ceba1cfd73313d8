"""Operational semantics: outgoing transitions of a configuration.

A configuration pairs an environment with a system in canonical form: a
``Par`` whose items are located individuals, species replicators and
restricted sub-systems (themselves canonical), sorted by a structural key.

Parallel composition is computed n-ary.  Probabilistic steps of any
component pre-empt all nondeterministic ones; the probabilistic steps of all
components that have them are combined by product.  Otherwise single
moves, pairwise synchronisations on complementary ``a@l``/``out a@l`` and a
joint tick of every component are offered.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable

from .environment import (
    Environment,
    EnvironmentUndefined,
    add_deltas,
    env_of,
    eval_arith,
    merge,
    sat,
)
from .parser import format_process
from .syntax import (
    OWN_REP,
    Cond,
    Const,
    Go,
    In,
    Located,
    LocVar,
    Model,
    NeighborSum,
    Nil,
    Out,
    Par,
    Prefix,
    PSum,
    Restrict,
    SNil,
    SpeciesProc,
    Tick,
    expand_neighbor_sum,
)

WEIGHT_TOLERANCE = 1e-9
MAX_UNFOLD = 256


class ModelError(Exception):
    """The model is syntactically fine but cannot be executed."""


class WeightError(ModelError):
    pass


class CompatibilityError(AssertionError):
    """Environment and system disagree after a transition (internal bug)."""


@dataclass(frozen=True)
class Label:
    kind: str  # "in", "out", "tau", "tick"
    channel: str | None = None
    loc: str | None = None

    def __str__(self) -> str:
        if self.kind in ("tau", "tick"):
            return self.kind
        return f"{self.kind}:{self.channel}@{self.loc}"


TAU = Label("tau")
TICK = Label("tick")


@dataclass(frozen=True, eq=False)
class Step:
    """One transition of a (sub)system.

    ``label`` is ``None`` for probabilistic steps, which carry ``weight``.
    ``target`` lists the components that replace the source.
    """

    label: Label | None
    weight: object
    delta: dict
    target: tuple
    note: str = ""

    @property
    def probabilistic(self) -> bool:
        return self.label is None


@dataclass
class _Offer:
    """A replicator's input on ``rep_s``, instantiated lazily per location."""

    channel: str
    make: Callable[[str], Step]


@dataclass
class _Moves:
    prob: list = field(default_factory=list)
    nondet: list = field(default_factory=list)
    offers: list = field(default_factory=list)


@dataclass
class Fanout:
    kind: str  # "probabilistic", "nondeterministic", "terminal"
    steps: list


# ---------------------------------------------------------------------------
# canonical forms


def _memo(obj, attr: str, compute):
    # frozen AST nodes hash structurally and deeply; keys are cached on the node itself
    d = obj.__dict__
    v = d.get(attr)
    if v is None:
        v = compute(obj)
        object.__setattr__(obj, attr, v)
    return v


def _proc_key(p) -> str:
    return p.name if isinstance(p, Const) else f"({format_process(p)})"


def _component_key(c) -> str:
    if isinstance(c, Located):
        return f"{_memo(c.proc, '_pkey', _proc_key)}@({c.loc},{c.species})"
    if isinstance(c, SpeciesProc):
        return f"species {c.species}"
    if isinstance(c, Restrict):
        inner = " | ".join(component_key(x) for x in c.body.items)
        return f"({inner}) restrict {{{', '.join(sorted(c.channels))}}}"
    raise TypeError(c)


def component_key(c) -> str:
    return _memo(c, "_ckey", _component_key)


def _sorted_par(items) -> Par:
    return Par(tuple(sorted(items, key=component_key)))


def canonicalize(system) -> Par:
    """Flatten parallel composition, drop dead individuals, sort components."""
    return _sorted_par(_flatten(system))


def _flatten(s) -> list:
    if isinstance(s, SNil):
        return []
    if isinstance(s, Located):
        return [] if isinstance(s.proc, Nil) else [s]
    if isinstance(s, SpeciesProc):
        return [s]
    if isinstance(s, Par):
        out = []
        for it in s.items:
            out.extend(_flatten(it))
        return out
    if isinstance(s, Restrict):
        body, chans = s.body, set(s.channels)
        while isinstance(body, Restrict):
            chans |= body.channels
            body = body.body
        inner = _flatten(body)
        if not inner:
            return []
        return [Restrict(_sorted_par(inner), frozenset(chans))]
    raise TypeError(f"not a system term: {s!r}")


class Configuration:
    """An (environment, canonical system) pair, hashed by its printed key."""

    __slots__ = ("env", "system", "key", "_hash")

    def __init__(self, env: Environment, system: Par):
        self.env = env
        self.system = system
        self.key = " | ".join(component_key(c) for c in system.items)
        self._hash = hash(self.key)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return isinstance(other, Configuration) and self.key == other.key

    def __repr__(self):
        return f"Configuration({self.env!r}, {self.key or '0'})"

    def __reduce__(self):
        return (Configuration, (self.env, self.system))


def initial_configuration(model: Model) -> Configuration:
    system = canonicalize(model.system)
    return Configuration(env_of(system), system)


def close_channels(model: Model) -> Model:
    """Restrict every rep_s/prey_s channel at top level (unless already restricted there)."""
    chans = set()
    for s in model.species:
        chans.add(f"rep_{s}")
        chans.add(f"prey_{s}")
    sys = model.system
    if isinstance(sys, Restrict):
        chans -= sys.channels
    if not chans:
        return model
    return Model(
        habitat=model.habitat,
        params=model.params,
        constants=model.constants,
        species=model.species,
        system=Restrict(sys, frozenset(chans)),
        spans=model.spans,
    )


# ---------------------------------------------------------------------------


def _nil_delta(cont, species, loc) -> dict:
    return {(loc, species): -1} if isinstance(cont, Nil) else {}


def _located(cont, species, loc) -> tuple:
    return () if isinstance(cont, Nil) else (Located(cont, species, loc),)


def _replace(items: tuple, repl: dict) -> tuple:
    out = []
    for i, it in enumerate(items):
        if i in repl:
            out.extend(repl[i])
        else:
            out.append(it)
    return tuple(out)


class Interpreter:
    """Transition relation of one model."""

    def __init__(self, model: Model, check_compat: bool = True):
        self.model = model
        self.habitat = model.habitat
        self.check_compat = check_compat
        self._expanded: dict = {}

    # -- individuals -------------------------------------------------------
    def individual_steps(self, env: Environment, proc, species: str, loc: str) -> list[Step]:
        if isinstance(proc, Nil):
            return []
        steps = self._proc_steps(env, proc, species, loc, 0)
        steps.append(Step(Label("in", f"prey_{species}", loc), None, {(loc, species): -1}, (), "prey"))
        return steps

    def _proc_steps(self, env, p, s, loc, depth) -> list[Step]:
        if isinstance(p, Prefix):
            act, cont = p.action, p.cont
            if isinstance(act, Tick):
                return [Step(TICK, None, _nil_delta(cont, s, loc), _located(cont, s, loc))]
            if isinstance(act, Go):
                target = act.target
                if isinstance(target, LocVar):
                    raise ModelError(f"unbound location variable {target.name}")
                if not self.habitat.adjacent(loc, target):
                    return []
                delta = {(loc, s): -1}
                if not isinstance(cont, Nil):
                    delta[(target, s)] = 1
                return [Step(TAU, None, delta, _located(cont, s, target), f"go {loc}->{target}")]
            ch = act.channel
            if ch == OWN_REP:
                ch = f"rep_{s}"
            kind = "out" if isinstance(act, Out) else "in"
            return [Step(Label(kind, ch, loc), None, _nil_delta(cont, s, loc), _located(cont, s, loc))]
        if isinstance(p, PSum):
            return self._psum_steps(env, p, s, loc)
        if isinstance(p, NeighborSum):
            key = (id(p), loc)
            hit = self._expanded.get(key)
            if hit is None:
                # keep p alive so that its id is not recycled
                hit = self._expanded[key] = (p, expand_neighbor_sum(p, loc, self.habitat))
            expanded = hit[1]
            return self._psum_steps(env, expanded, s, loc)
        if isinstance(p, Cond):
            for guard, branch in p.branches:
                if sat(env, guard, self.habitat, loc):
                    return self._proc_steps(env, branch, s, loc, depth + 1)
            return []
        if isinstance(p, Const):
            if depth > MAX_UNFOLD:
                raise ModelError(f"unguarded recursion while unfolding {p.name}")
            try:
                body = self.model.constants[p.name]
            except KeyError:
                raise ModelError(f"undefined constant {p.name}") from None
            return self._proc_steps(env, body, s, loc, depth + 1)
        if isinstance(p, Nil):
            return []
        raise TypeError(f"not a process: {p!r}")

    def _psum_steps(self, env, p: PSum, s, loc) -> list[Step]:
        steps = []
        total = 0
        for w, cont in p.branches:
            v = eval_arith(env, w, self.habitat, loc)
            if not (-WEIGHT_TOLERANCE <= v <= 1 + WEIGHT_TOLERANCE):
                raise WeightError(f"weight {float(v):g} of species {s} at {loc} is not a probability")
            total += v
            if v > 0:
                steps.append(Step(None, v, _nil_delta(cont, s, loc), _located(cont, s, loc)))
        if abs(total - 1) > WEIGHT_TOLERANCE:
            raise WeightError(
                f"weights of species {s} at {loc} sum to {float(total):.12g}: {format_process(p)}"
            )
        return steps

    # -- systems -----------------------------------------------------------
    def _component_moves(self, c, env, pick=None) -> _Moves:
        if isinstance(c, Located):
            m = _Moves()
            for st in self.individual_steps(env, c.proc, c.species, c.loc):
                (m.prob if st.label is None else m.nondet).append(st)
            return m
        if isinstance(c, SpeciesProc):
            return _Moves(
                nondet=[Step(TICK, None, {}, (c,))],
                offers=[_Offer(f"rep_{c.species}", lambda loc, c=c: self._rep_step(c, loc))],
            )
        if isinstance(c, Restrict):
            inner = self._par_moves(c.body.items, env, c.channels, pick)

            def wrap(st: Step) -> Step:
                target = (Restrict(_sorted_par(st.target), c.channels),) if st.target else ()
                return Step(st.label, st.weight, st.delta, target, st.note)

            return _Moves(
                prob=[wrap(st) for st in inner.prob],
                nondet=[wrap(st) for st in inner.nondet],
                offers=[_Offer(o.channel, lambda loc, o=o: wrap(o.make(loc))) for o in inner.offers],
            )
        raise TypeError(f"not a canonical component: {c!r}")

    def _rep_step(self, c: SpeciesProc, loc: str) -> Step:
        body = self.model.species[c.species]
        delta = {} if isinstance(body, Nil) else {(loc, c.species): 1}
        return Step(Label("in", f"rep_{c.species}", loc), None, delta, _located(body, c.species, loc) + (c,), "rep")

    def _par_moves(self, items: tuple, env, hidden, pick=None) -> _Moves:
        """Moves of a parallel composition.

        With ``pick`` the probabilistic product is not enumerated: ``pick``
        selects one step from each component's list and a single joint step
        is returned.
        """
        child = [self._component_moves(c, env, pick) for c in items]
        if any(m.prob for m in child):
            idx = [i for i, m in enumerate(child) if m.prob]
            joint = []
            lists = [child[i].prob for i in idx]
            combos = [tuple(pick(ls) for ls in lists)] if pick else itertools.product(*lists)
            for combo in combos:
                w = 1
                for st in combo:
                    w = w * st.weight
                delta = add_deltas(*(st.delta for st in combo))
                target = _replace(items, {i: st.target for i, st in zip(idx, combo)})
                joint.append(Step(None, w, delta, target))
            return _Moves(prob=joint)

        out = _Moves()
        inputs: dict = {}
        outputs: dict = {}
        offers: dict = {}
        for i, m in enumerate(child):
            for st in m.nondet:
                lab = st.label
                if lab.kind == "tick":
                    continue
                if lab.kind == "in":
                    inputs.setdefault((lab.channel, lab.loc), []).append((i, st))
                elif lab.kind == "out":
                    outputs.setdefault((lab.channel, lab.loc), []).append((i, st))
                if lab.kind == "tau" or lab.channel not in hidden:
                    out.nondet.append(Step(lab, None, st.delta, _replace(items, {i: st.target}), st.note))
            for o in m.offers:
                offers.setdefault(o.channel, []).append((i, o))
                if o.channel not in hidden:
                    out.offers.append(_Offer(o.channel, self._lift_offer(items, i, o)))
        for (ch, loc), outs in outputs.items():
            partners = list(inputs.get((ch, loc), ()))
            for j, o in offers.get(ch, ()):
                partners.append((j, o))
            for i, so in outs:
                for j, partner in partners:
                    if i == j:
                        continue
                    si = partner.make(loc) if isinstance(partner, _Offer) else partner
                    out.nondet.append(
                        Step(
                            TAU,
                            None,
                            add_deltas(so.delta, si.delta),
                            _replace(items, {i: so.target, j: si.target}),
                            f"{ch}@{loc}",
                        )
                    )
        if items:
            ticks = [[st for st in m.nondet if st.label.kind == "tick"] for m in child]
            if all(ticks):
                for combo in itertools.product(*ticks):
                    delta = add_deltas(*(st.delta for st in combo))
                    target = _replace(items, {i: st.target for i, st in enumerate(combo)})
                    out.nondet.append(Step(TICK, None, delta, target))
        return out

    @staticmethod
    def _lift_offer(items, i, o: _Offer):
        def make(loc):
            st = o.make(loc)
            return Step(st.label, st.weight, st.delta, _replace(items, {i: st.target}), st.note)

        return make

    def system_steps(self, env: Environment, system) -> Fanout:
        """All transitions of ``(env, system)`` before merging equal targets."""
        par = system if isinstance(system, Par) else canonicalize(system)
        moves = self._par_moves(par.items, env, frozenset())
        if moves.prob:
            steps = [Step(None, st.weight, st.delta, _sorted_par(st.target), st.note) for st in moves.prob]
            return Fanout("probabilistic", steps)
        nondet = list(moves.nondet)
        for o in moves.offers:
            for loc in self.habitat.locations:
                nondet.append(o.make(loc))
        steps = [Step(st.label, None, st.delta, _sorted_par(st.target), st.note) for st in nondet]
        if steps:
            return Fanout("nondeterministic", steps)
        return Fanout("terminal", [])

    def sample_plan(self, c: Configuration) -> list | None:
        """Weight lists of the independent choices of a probabilistic configuration.

        Returns one list per component with more than one branch, in a fixed
        order, or ``None`` when ``c`` has no probabilistic step.
        """
        plan = []

        def pick(steps):
            if len(steps) > 1:
                plan.append([st.weight for st in steps])
            return steps[0]

        moves = self._par_moves(c.system.items, c.env, frozenset(), pick)
        return plan if moves.prob else None

    def sampled_successor(self, c: Configuration, choice: tuple) -> Configuration:
        """The successor that takes branch ``choice[k]`` in the k-th list of the plan."""
        it = iter(choice)

        def pick(steps):
            return steps[next(it)] if len(steps) > 1 else steps[0]

        (st,) = self._par_moves(c.system.items, c.env, frozenset(), pick).prob
        return self._target(c, Step(None, st.weight, st.delta, _sorted_par(st.target)))

    def successors(self, c: Configuration) -> "Successors":
        fan = self.system_steps(c.env, c.system)
        if fan.kind == "probabilistic":
            acc: dict = {}
            total = 0
            for st in fan.steps:
                total += st.weight
                nxt = self._target(c, st)
                prev = acc.get(nxt)
                acc[nxt] = st.weight if prev is None else prev + st.weight
            if abs(total - 1) > WEIGHT_TOLERANCE:
                raise WeightError(f"probabilistic fan-out sums to {float(total):.12g}")
            entries = sorted(((w, t) for t, w in acc.items()), key=lambda e: e[1].key)
            return Successors("probabilistic", entries)
        if fan.kind == "nondeterministic":
            seen = {}
            for st in fan.steps:
                nxt = self._target(c, st)
                seen.setdefault((st.label, nxt), st.note)
            entries = sorted(((lab, t, note) for (lab, t), note in seen.items()), key=lambda e: (str(e[0]), e[1].key))
            return Successors("nondeterministic", entries)
        kind = "terminal" if not c.system.items else "deadlock"
        return Successors(kind, [])

    def _target(self, c: Configuration, st: Step) -> Configuration:
        try:
            env = merge(c.env, [st.delta])
        except EnvironmentUndefined as exc:
            raise CompatibilityError(f"undefined environment update from {c!r}: {exc}") from None
        if self.check_compat:
            expected = env_of(st.target)
            if expected != env:
                raise CompatibilityError(
                    f"environment {env!r} incompatible with {component_key_par(st.target)} (expected {expected!r})"
                )
        return Configuration(env, st.target)


def component_key_par(par: Par) -> str:
    return " | ".join(component_key(c) for c in par.items) or "0"


@dataclass
class Successors:
    kind: str  # "probabilistic", "nondeterministic", "terminal", "deadlock"
    entries: list

    @cached_property
    def total_weight(self):
        return sum(w for w, _ in self.entries) if self.kind == "probabilistic" else None


def fraction_or_float(v):
    return v if isinstance(v, (Fraction, int)) else float(v)
