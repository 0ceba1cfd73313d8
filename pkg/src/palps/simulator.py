"""Monte Carlo execution of models and statistical estimation of path formulas."""

from __future__ import annotations

import json
import random
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist

from .environment import sat
from .pctl_syntax import And, Atom, Next, Not, TrueF, Until
from .semantics import Configuration, Interpreter, close_channels, initial_configuration
from .statespace import digest
from .syntax import Model

MAX_STEPS_PER_TICK = 100_000
CACHE_LIMIT = 200_000


@dataclass(frozen=True)
class Scheduler:
    """Resolves nondeterministic fan-outs; probabilistic ones are always sampled by weight.

    ``uniform`` draws from the run's random stream, ``seeded`` from a separate
    stream derived from ``seed``, ``first`` takes the first enabled action in
    canonical order.
    """

    policy: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.policy not in ("uniform", "first", "seeded"):
            raise ValueError(f"unknown scheduler policy {self.policy!r}")


@dataclass
class TraceStep:
    config: Configuration
    event: str
    ticks: int


@dataclass
class Trace:
    seed: str
    steps: list = field(default_factory=list)
    terminated: bool = False
    deadlock: bool = False
    stalled: bool = False  # too many steps without a tick

    @property
    def ticks(self) -> int:
        return self.steps[-1].ticks if self.steps else 0

    def census(self) -> list[tuple[int, dict]]:
        """Environment at tick 0 and right after every tick."""
        out = []
        for st in self.steps:
            if not out or out[-1][0] != st.ticks:
                out.append((st.ticks, dict(st.config.env.items_sorted())))
        return out

    def to_csv(self) -> str:
        lines = ["tick,location,species,count"]
        for tick, env in self.census():
            for (loc, s), n in sorted(env.items()):
                lines.append(f"{tick},{loc},{s},{n}")
        return "\n".join(lines) + "\n"

    def to_jsonl(self) -> str:
        out = []
        for i, st in enumerate(self.steps):
            rec = {
                "step": i,
                "ticks": st.ticks,
                "event": st.event,
                "state": digest(st.config),
                "env": [[loc, s, n] for (loc, s), n in st.config.env.items_sorted()],
            }
            out.append(json.dumps(rec, sort_keys=True))
        end = "terminated" if self.terminated else "deadlock" if self.deadlock else "stalled" if self.stalled else "horizon"
        out.append(json.dumps({"end": end, "seed": self.seed, "ticks": self.ticks}, sort_keys=True))
        return "\n".join(out) + "\n"


@dataclass(frozen=True)
class Estimate:
    point: float
    low: float
    high: float
    samples: int
    successes: int
    confidence: float = 0.95

    def as_dict(self) -> dict:
        return {
            "estimate": self.point,
            "low": self.low,
            "high": self.high,
            "samples": self.samples,
            "successes": self.successes,
            "confidence": self.confidence,
        }


def wilson(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    z = NormalDist().inv_cdf(1 - (1 - confidence) / 2)
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * ((p * (1 - p) / n + z * z / (4 * n * n)) ** 0.5) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


class Simulator:
    def __init__(self, model: Model, close: bool = True, scheduler: Scheduler = Scheduler()):
        self.model = close_channels(model) if close else model
        self.interp = Interpreter(self.model)
        self.scheduler = scheduler
        self.initial = initial_configuration(self.model)
        self._cache: dict = {}  # nondeterministic successors
        self._plans: dict = {}  # per-component weights of probabilistic configurations
        self._targets: dict = {}  # (configuration, branch choice) -> successor
        self._truth: dict = {}
        self.random_choices = 0  # draws that had more than one option

    def _plan(self, c: Configuration):
        hit = self._plans.get(c, False)
        if hit is False:
            plan = self.interp.sample_plan(c)
            if plan is not None:
                cums = []
                for ws in plan:
                    acc, cum = 0.0, []
                    for w in ws:
                        acc += float(w)
                        cum.append(acc)
                    cums.append(cum)
                plan = cums
            hit = plan
            if len(self._plans) < CACHE_LIMIT:
                self._plans[c] = hit
        return hit

    def successors(self, c: Configuration):
        hit = self._cache.get(c)
        if hit is None:
            hit = self.interp.successors(c)
            if len(self._cache) < CACHE_LIMIT:
                self._cache[c] = hit
        return hit

    def step(self, c: Configuration, rng: random.Random, sched_rng: random.Random):
        """One transition: (event, next configuration, is_tick) or None when stuck.

        Probabilistic steps draw each component's branch independently, which
        is the product distribution without enumerating it.
        """
        plan = self._plan(c)
        if plan is not None:
            choice = tuple(min(bisect_right(cum, rng.random()), len(cum) - 1) for cum in plan)
            self.random_choices += len(plan)
            t = self._targets.get((c, choice))
            if t is None:
                t = self.interp.sampled_successor(c, choice)
                if len(self._targets) < CACHE_LIMIT:
                    self._targets[(c, choice)] = t
            return "prob", t, False
        succ = self.successors(c)
        if succ.kind == "nondeterministic":
            entries = succ.entries
            if self.scheduler.policy == "first":
                lab, t, note = entries[0]
            else:
                src = rng if self.scheduler.policy == "uniform" else sched_rng
                self.random_choices += len(entries) > 1
                lab, t, note = entries[src.randrange(len(entries))]
            event = str(lab) if not note else f"{lab} {note}"
            return event, t, lab.kind == "tick"
        return None

    def _rngs(self, seed, index):
        tag = f"{seed}-{index}"
        return random.Random(tag), random.Random(f"sched-{self.scheduler.seed}-{tag}"), tag

    def run(self, max_ticks: int, seed=0, index: int = 0) -> Trace:
        rng, sched_rng, tag = self._rngs(seed, index)
        c = self.initial
        trace = Trace(seed=tag)
        trace.steps.append(TraceStep(c, "init", 0))
        ticks, since_tick = 0, 0
        while ticks < max_ticks:
            res = self.step(c, rng, sched_rng)
            if res is None:
                kind = self.successors(c).kind
                trace.terminated = kind == "terminal"
                trace.deadlock = kind == "deadlock"
                break
            event, c, tick = res
            if tick:
                ticks += 1
                since_tick = 0
            else:
                since_tick += 1
                if since_tick > MAX_STEPS_PER_TICK:
                    trace.stalled = True
                    break
            trace.steps.append(TraceStep(c, event, ticks))
        return trace

    # -- path formulas -----------------------------------------------------
    def _holds(self, f, c: Configuration) -> bool:
        if isinstance(f, TrueF):
            return True
        if isinstance(f, Atom):
            memo = self._truth.get(id(f))
            if memo is None:
                # keep f alive so that its id stays unique
                memo = self._truth[id(f)] = (f, {})
            hit = memo[1].get(c.env)
            if hit is None:
                hit = memo[1][c.env] = sat(c.env, f.expr, self.model.habitat)
            return hit
        if isinstance(f, Not):
            return not self._holds(f.arg, c)
        if isinstance(f, And):
            return self._holds(f.left, c) and self._holds(f.right, c)
        raise ValueError("simulation supports only propositional state formulas inside paths")

    def sample(self, path, seed, index: int, max_ticks: int | None = None) -> bool:
        """Does one sampled execution satisfy ``path``?"""
        rng, sched_rng, _ = self._rngs(seed, index)
        c = self.initial
        if isinstance(path, Next):
            since = 0
            while True:
                res = self.step(c, rng, sched_rng)
                if res is None:
                    return False
                _, c, tick = res
                if tick:
                    return self._holds(path.arg, c)
                since += 1
                if since > MAX_STEPS_PER_TICK:
                    return False
        if not isinstance(path, Until):
            raise TypeError(path)
        bound = path.bound
        if bound is None:
            if max_ticks is None:
                raise ValueError("unbounded until needs a tick cutoff for simulation")
            bound = max_ticks
        ticks, since = 0, 0
        while True:
            if self._holds(path.right, c):
                return True
            if not self._holds(path.left, c) or ticks >= bound:
                return False
            res = self.step(c, rng, sched_rng)
            if res is None:
                return False
            _, c, tick = res
            if tick:
                ticks += 1
                since = 0
            else:
                since += 1
                if since > MAX_STEPS_PER_TICK:
                    return False


def _count(args) -> tuple[int, int]:
    model, close, scheduler, path, seed, lo, hi, max_ticks = args
    sim = Simulator(model, close, scheduler)
    hits = sum(sim.sample(path, seed, i, max_ticks) for i in range(lo, hi))
    return hits, sim.random_choices


def estimate(
    model: Model,
    path,
    samples: int,
    scheduler: Scheduler = Scheduler(),
    seed=0,
    *,
    max_ticks: int | None = None,
    confidence: float = 0.95,
    threads: int = 1,
    close: bool = True,
) -> Estimate:
    """Fraction of ``samples`` executions satisfying ``path``, with a Wilson interval.

    Sample ``i`` draws from its own stream seeded by ``(seed, i)``, so the
    result does not depend on ``threads``.  When no sample made a random
    choice the outcome is certain and the interval collapses to the point.
    """
    if threads <= 1 or samples < 2 * threads:
        hits, drawn = _count((model, close, scheduler, path, seed, 0, samples, max_ticks))
    else:
        step = -(-samples // threads)
        chunks = [
            (model, close, scheduler, path, seed, lo, min(lo + step, samples), max_ticks)
            for lo in range(0, samples, step)
        ]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_count, chunks))
        hits = sum(h for h, _ in parts)
        drawn = sum(d for _, d in parts)
    point = hits / samples if samples else 0.0
    low, high = wilson(hits, samples, confidence) if drawn or not samples else (point, point)
    return Estimate(point, low, high, samples, hits, confidence)


def run(model: Model, scheduler: Scheduler = Scheduler(), max_ticks: int = 100, seed=0, *, close: bool = True) -> Trace:
    return Simulator(model, close, scheduler).run(max_ticks, seed)
