"""Acceptance criteria, one test per criterion.

Each test is marked with ``acceptance(number, title)``; the terminal summary
prints one PASS/FAIL line per criterion (see conftest.py).
"""

from __future__ import annotations

import os
import random
import re
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

import pytest

from audit import Audit, audit_model
from generators import all_atoms, formula_set, generate_models
from palps import ExploreOptions, Scheduler, build, check, estimate, export, parse_formula, parse_formula_file, parse_model
from palps.corpus import corpus_entry, corpus_list, derivative_graph, per_round_counts, round_starts
from palps.pctl import _first_prob, brute_force_prob
from palps.pctl_syntax import atoms
from palps.semantics import Interpreter, close_channels, initial_configuration
from palps.syntax import Const
from reference_semantics import config_quotient, explore_tracked, initial, moves

MODELS = Path(__file__).resolve().parent / "models"


# ---------------------------------------------------------------------------
# 1 and 2 share one workload


@pytest.fixture(scope="module")
def audit_run() -> Audit:
    total = Audit()
    for g in generate_models(11, 120, max_states=3000):
        total.add(audit_model(g.model, 3000))
    for entry in corpus_list():
        total.add(audit_model(entry.load(), 6000))
    return total


@pytest.mark.acceptance(1, "compatibility env_of(S') = E' on >= 1e5 transitions")
def test_compatibility(audit_run, record_property):
    a = audit_run
    record_property("detail", f"{a.transitions} transitions over {a.states} states, {len(a.compat_violations)} violations")
    assert a.transitions >= 100_000
    assert a.compat_violations == []


@pytest.mark.acceptance(2, "probability conservation within 1e-9")
def test_probability_conservation(audit_run, record_property):
    a = audit_run
    record_property(
        "detail",
        f"{a.fanouts} probabilistic fan-outs, worst |sum-1| = {a.worst_mass_error:.3g}, mixed fan-outs {a.mixed}",
    )
    assert a.fanouts > 1000
    assert a.mass_violations == []
    assert a.mixed == 0


# ---------------------------------------------------------------------------


@pytest.mark.acceptance(3, "64-branch first step of tiny_dispersal matches the reference expander exactly")
def test_first_step_oracle(record_property):
    model = close_channels(corpus_entry("tiny_dispersal").load())
    # reference: direct rule application, individuals keep their identity
    kind, raw = moves(initial(model), model)
    assert kind == "prob"
    assert len(raw) == 64
    assert all(m.weight == Fraction(1, 64) for m in raw)
    ref: dict = {}
    for m in raw:
        k = m.target.quotient()
        ref[k] = ref.get(k, 0) + m.weight

    interp = Interpreter(model)
    c0 = initial_configuration(model)
    fan = interp.system_steps(c0.env, c0.system)
    assert fan.kind == "probabilistic"
    assert len(fan.steps) == 64
    assert all(st.weight == Fraction(1, 64) for st in fan.steps)
    succ = interp.successors(c0)
    got = {config_quotient(t): w for w, t in succ.entries}
    assert all(isinstance(w, Fraction) for w in got.values())
    assert got == ref
    assert sum(got.values()) == 1
    record_property("detail", f"64 raw branches of 1/64, {len(got)} merged successors, exact match")


# ---------------------------------------------------------------------------


@pytest.mark.acceptance(4, "check() vs brute_force_prob() within 1e-8 on >= 20 generated models (min and max)")
def test_pctl_oracle_equivalence(record_property):
    models = generate_models(2024, 24, max_states=1000, min_states=10)
    worst = 0.0
    compared = 0
    split = 0
    kinds = set()
    bounds = set()
    for g in models:
        rng = random.Random(g.seed)
        formulas = formula_set(rng, g.model, per_kind=2)
        formulas.append(parse_formula("P=? [ true U{<=12} total(s) = 0 ]", g.model))
        mdp, report = build(g.model, all_atoms(formulas))
        assert not report.truncated and report.states <= 1000
        for f in formulas:
            path = f.path
            kinds.add(type(path).__name__ + ("" if getattr(path, "bound", None) is None else "k"))
            if getattr(path, "bound", None) is not None:
                bounds.add(path.bound)
            res = check(mdp, f)
            lo = brute_force_prob(mdp, path, "min")
            hi = brute_force_prob(mdp, path, "max")
            worst = max(worst, abs(res.pmin - float(lo)), abs(res.pmax - float(hi)))
            compared += 2
            split += lo != hi
    record_property(
        "detail",
        f"{len(models)} models, {compared} values, worst error {worst:.2g}, {split} formulas with Pmin != Pmax",
    )
    assert len(models) >= 20
    assert kinds == {"Next", "Untilk", "Until"}
    assert max(bounds) == 12
    assert split > 0
    assert worst <= 1e-8


# ---------------------------------------------------------------------------


def _enumerate_paths(mdp, goal, k, depth, per_step):
    """Bounds (lo, hi) on P[true U<=k goal] by expanding the path tree to ``depth`` transitions.

    With ``per_step`` every transition spends one unit of the budget;
    otherwise only tick transitions do.  Unexpanded mass counts towards hi.
    The model has a single action per nondeterministic state.
    """

    def go(s, j, d):
        if s in goal:
            return Fraction(1), Fraction(1)
        if j == 0:
            return Fraction(0), Fraction(0)
        if d == depth:
            return Fraction(0), Fraction(1)
        if not mdp.choices[s]:
            return Fraction(0), Fraction(0)
        (ch,) = mdp.choices[s]
        spend = 1 if per_step or ch.tick else 0
        lo = hi = Fraction(0)
        for t, p in ch.transitions:
            a, b = go(t, j - spend, d + 1)
            lo += p * a
            hi += p * b
        return lo, hi

    return go(mdp.initial, k, 0)


@pytest.mark.acceptance(5, "tick-counted bounded until on a model with a tau-cycle before the goal")
def test_tick_counted_until(record_property):
    model = parse_model((MODELS / "tau_cycle.palps").read_text(), "tau_cycle.palps")
    f1 = parse_formula("P=? [ true U{<=1} s@g = 1 ]", model)
    f2 = parse_formula("P=? [ true U{<=2} s@g = 1 ]", model)
    mdp, _ = build(model, list(atoms(f1)))
    goal = mdp.labels[mdp.atom_index(f1.path.right.expr)]
    assert all(len(cs) <= 1 for cs in mdp.choices)

    lo, hi = _enumerate_paths(mdp, goal, 1, 120, per_step=False)
    assert lo <= Fraction(1, 2) <= hi and hi - lo < Fraction(1, 10**8)
    lo2, hi2 = _enumerate_paths(mdp, goal, 2, 200, per_step=False)
    assert lo2 <= Fraction(3, 4) <= hi2 and hi2 - lo2 < Fraction(1, 10**8)

    for f, exact in ((f1, Fraction(1, 2)), (f2, Fraction(3, 4))):
        for mode in ("min", "max"):
            assert brute_force_prob(mdp, f.path, mode) == exact
        res = check(mdp, f)
        assert abs(res.pmin - float(exact)) <= 1e-8 and abs(res.pmax - float(exact)) <= 1e-8

    # a reading that counts every transition as one time unit gives 0 here
    step_lo, step_hi = _enumerate_paths(mdp, goal, 1, 60, per_step=True)
    assert step_hi == 0
    record_property("detail", "P[true U<=1 goal] = 1/2 (tick-counted; step-counted reading gives 0), U<=2 = 3/4")


# ---------------------------------------------------------------------------

SCHEMATA = (
    ("tiny_extinction", "P<=0.6 [ true U{<=10} total(s) = 0 ]", "extinction"),
    ("tiny_extinction", "s@a = 0 -> P>=0.5 [ true U s@a > 0 ]", "recolonization"),
    ("tiny_competition", "P>=0.5 [ true U total(t) <= total(s) ]", "dominance"),
)


@pytest.mark.acceptance(6, "extinction, recolonization and dominance schemata match the oracle within 1e-8")
def test_property_schemata(record_property):
    details = []
    for name, text, label in SCHEMATA:
        entry = corpus_entry(name)
        model = entry.load()
        props = [line for line, _ in parse_formula_file(entry.property_path.read_text(), model)]
        assert text in props
        f = parse_formula(text, model)
        mdp, report = build(model, list(atoms(f)))
        assert not report.truncated
        res = check(mdp, f)
        assert res.verdict is True and not res.approximate
        path = _first_prob(f).path
        lo, hi = brute_force_prob(mdp, path, "min"), brute_force_prob(mdp, path, "max")
        assert abs(res.pmin - float(lo)) <= 1e-8
        assert abs(res.pmax - float(hi)) <= 1e-8
        expected = entry.expected()[text]
        assert (lo, hi) == (expected["min"], expected["max"])
        details.append(f"{label}={float(lo):.10g}")
    record_property("detail", ", ".join(details))


# ---------------------------------------------------------------------------


def _variant(name: str, system: str, **params):
    text = corpus_entry(name).text()
    text = re.sub(r"^system = .*", system, text, flags=re.S | re.M)
    return parse_model(text, f"{name} variant", {k: Fraction(v) for k, v in params.items()} or None)


@pytest.mark.acceptance(7, "structure: 3 rep outputs per adult, predator dies after 2 prey-less rounds, <= 2 dispersal attempts")
def test_structural_corpus(record_property):
    # static: derivative graphs with every guard and weight considered possible
    geno = corpus_entry("genotypes").load()
    for adult, sp in (("A1", "g1"), ("A2", "g2")):
        graph = derivative_graph(geno, Const(adult), sp, "2_2")
        outs = per_round_counts(graph, [(Const(adult), "2_2")], lambda e: e.kind == "out" and e.channel == f"rep_{sp}")
        assert outs == (3, 3)
    wood = corpus_entry("woodthrush").load()
    for start in ("Juv", "AB", "Fl"):
        for loc in wood.habitat.locations:
            graph = derivative_graph(wood, Const(start), "w", loc)
            lo, hi = per_round_counts(graph, round_starts(graph, (Const(start), loc)), lambda e: e.kind == "go")
            assert (lo, hi) == (0, 2), (start, loc, lo, hi)

    # dynamic, exhaustive with per-individual bookkeeping (reference expander)
    problems = []
    adults = [0]

    def adult_round(i, rec, alive):
        if rec.start.startswith("Const(name='A"):
            problems.append(("adult ticked", rec))
        elif rec.count:
            problems.append(("juvenile reproduced", rec))
        return 0

    def adult_removed(i, rec):
        if rec.start.startswith("Const(name='A"):
            adults[0] += 1
            if rec.count != 3:
                problems.append(("adult emitted", rec.count))
        elif rec.count:
            problems.append(("juvenile reproduced", rec))

    g_model = _variant("genotypes", "system = (A1@(2_2, g1) | species g1 | species g2) restrict {rep_g1, rep_g2};")
    g_states, g_capped, g_depth = explore_tracked(
        g_model, 5, 3, lambda w: w.startswith("out rep"), adult_round, adult_removed
    )

    hunting = {repr(Const("Q")), repr(Const("Q2"))}
    deaths = [0]

    def predator_round(i, rec, alive):
        if i.species != "t":
            return 0
        if rec.count:
            streak = 0
        elif rec.start in hunting:
            streak = rec.streak + 1
        else:
            streak = rec.streak
        if alive != (streak < 2):
            problems.append(("predator", rec, alive))
        deaths[0] += not alive
        return streak

    def predator_removed(i, rec):
        if i.species == "t":
            problems.append(("predator removed without a tick", rec))

    p_model = close_channels(corpus_entry("predator_prey").load())
    p_states, p_capped, p_depth = explore_tracked(
        p_model, 5, 5, lambda w: w.startswith("out prey"), predator_round, predator_removed
    )

    worst_go = [0]

    def bird_round(i, rec, alive):
        worst_go[0] = max(worst_go[0], rec.count)
        return 0

    def bird_removed(i, rec):
        worst_go[0] = max(worst_go[0], rec.count)

    w_model = _variant("woodthrush", "system = (Juv@(l2, w) | AB@(l2, w) | Fl@(l2, w) | species w) restrict {rep_w};")
    w_states, w_capped, w_depth = explore_tracked(w_model, 5, 3, lambda w: w == "go", bird_round, bird_removed)
    # without reproduction the population never grows: nothing is capped and the
    # reachable set saturates, so this run covers every cycle, not just five
    still = _variant("woodthrush", "system = (Juv@(l2, w) | AB@(l2, w) | Fl@(l2, w) | species w) restrict {rep_w};", rb=0)
    s_states, s_capped, s_depth = explore_tracked(still, 5, 3, lambda w: w == "go", bird_round, bird_removed)
    assert s_capped == 0 and s_depth < 5

    # the predator on its own: gone after exactly two time units
    alone = parse_model((MODELS / "predator_alone.palps").read_text(), "predator_alone.palps")
    f1 = parse_formula("P=? [ true U{<=1} total(t) = 0 ]", alone)
    f2 = parse_formula("P=? [ true U{<=2} total(t) = 0 ]", alone)
    mdp, _ = build(alone, list(atoms(f1)))
    assert brute_force_prob(mdp, f1.path, "max") == 0
    assert brute_force_prob(mdp, f2.path, "min") == 1

    assert problems == []
    assert adults[0] > 0 and deaths[0] > 0
    assert worst_go[0] == 2
    assert min(g_depth, p_depth, w_depth) >= 3
    record_property(
        "detail",
        f"tracked exploration to 5 cycles, deepest new configuration / configurations over the cap: "
        f"genotypes {g_states} states, tick {g_depth} / {g_capped}; predator_prey {p_states}, tick {p_depth} / {p_capped}; "
        f"woodthrush {w_states}, tick {w_depth} / {w_capped}; woodthrush rb=0 {s_states}, saturated at tick {s_depth} / 0; "
        f"max go per round {worst_go[0]}",
    )


# ---------------------------------------------------------------------------


@pytest.mark.acceptance(8, "simulator 99% CI (n=1e5) contains the exact value; seed determinism bit-exact")
def test_simulator_consistency(record_property):
    cases = (
        ("tiny_dispersal", "P=? [ X s@1_2 = 2 ]", 8),
        ("tiny_extinction", "P=? [ true U{<=10} total(s) = 0 ]", None),
    )
    details = []
    for name, text, depth in cases:
        model = corpus_entry(name).load()
        f = parse_formula(text, model)
        mdp, _ = build(model, list(atoms(f)), ExploreOptions(max_depth=depth))
        exact_lo = brute_force_prob(mdp, f.path, "min", truncated="fail")
        exact_hi = brute_force_prob(mdp, f.path, "max", truncated="succeed")
        assert exact_lo == exact_hi
        exact = float(exact_lo)
        sched = Scheduler("seeded", 7)
        est = estimate(model, f.path, 100_000, sched, seed=2024, confidence=0.99)
        assert est.low <= exact <= est.high, (name, est, exact)
        again = estimate(model, f.path, 5_000, sched, seed=2024, confidence=0.99)
        split = estimate(model, f.path, 5_000, sched, seed=2024, confidence=0.99, threads=2)
        first = estimate(model, f.path, 5_000, sched, seed=2024, confidence=0.99)
        assert again == first == split
        details.append(f"{name}: exact {exact:.6g} in [{est.low:.6g}, {est.high:.6g}]")
    record_property("detail", "; ".join(details))


# ---------------------------------------------------------------------------


@pytest.mark.acceptance(9, "explore + export twice gives byte-identical .sta/.tra/.lab")
def test_export_determinism(tmp_path, record_property):
    entry = corpus_entry("tiny_extinction")
    for run in ("a", "b"):
        model = entry.load()
        mdp, _ = build(model, [a for f in entry.formulas(model) for a in atoms(f)])
        (tmp_path / run).mkdir()
        export(mdp, str(tmp_path / run / "m"))
    # a separate interpreter with a different string hash seed, through the CLI
    (tmp_path / "cli").mkdir()
    subprocess.run(
        [sys.executable, "-m", "palps", "export", str(entry.model_path), str(tmp_path / "cli" / "m"),
         "--properties", str(entry.property_path)],
        check=True,
        env=dict(os.environ, PYTHONHASHSEED="12345"),
        capture_output=True,
    )
    sizes = []
    for ext in (".sta", ".tra", ".lab"):
        a = (tmp_path / "a" / f"m{ext}").read_bytes()
        b = (tmp_path / "b" / f"m{ext}").read_bytes()
        c = (tmp_path / "cli" / f"m{ext}").read_bytes()
        assert a and a == b == c
        sizes.append(f"{ext} {len(a)} B")

    runs = []
    for run in ("d1", "d2"):
        mdp, _ = build(corpus_entry("dispersal").load(), (), ExploreOptions(max_states=3000))
        (tmp_path / run).mkdir()
        export(mdp, str(tmp_path / run / "m"))
        runs.append([(tmp_path / run / f"m{ext}").read_bytes() for ext in (".sta", ".tra", ".lab")])
    assert runs[0] == runs[1]
    record_property("detail", "tiny_extinction " + ", ".join(sizes) + "; dispersal (3000 states) identical")
