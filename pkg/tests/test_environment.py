from __future__ import annotations

from fractions import Fraction

import pytest

from palps.corpus import corpus_entry
from palps.environment import (
    ArithmeticDomain,
    Environment,
    EnvironmentUndefined,
    UndefinedAttribute,
    dec,
    env_of,
    eval_arith,
    inc,
    merge,
    num,
    num_all,
    sat,
)
from palps.parser import parse_bool, parse_model
from palps.syntax import Habitat, Located, Nil, Par, SNil


def E(*triples):
    return Environment({(loc, s): n for loc, s, n in triples})


HAB = Habitat(locations=("a", "b"), attributes={("alpha", "a"): Fraction(1)})


def arith(text):
    # an arithmetic expression is the left side of a comparison
    return parse_bool(f"{text} = 0", species={"s", "t"}, locations=HAB.locations).left


def test_num():
    assert num(E(("a", "s", 2)), "a", "s") == 2
    assert num(E(("a", "s", 2)), "b", "s") == 0


def test_num_all():
    assert num_all(E(("a", "s", 2), ("a", "t", 1)), "a") == 3
    assert num_all(E(), "a") == 0


def test_system_environment():
    m = corpus_entry("dispersal").load()
    env = env_of(m.system)
    assert env == E(("1_1", "s", 2), ("2_1", "s", 1))
    assert num_all(env, "1_1") == 2


def test_eval_arith():
    env = E(("a", "s", 3))
    assert eval_arith(env, arith("5"), HAB) == 5
    assert eval_arith(env, arith("s@a + 1"), HAB) == 4
    one = E(("a", "s", 1))
    assert eval_arith(one, arith("(1 + alpha@a * @a) ^ 1"), HAB) == 2
    assert eval_arith(one, arith("(1 + alpha@here * @here) ^ -1"), HAB, "a") == Fraction(1, 2)


def test_eval_errors():
    with pytest.raises(ArithmeticDomain):
        eval_arith(E(), arith("1 / s@a"), HAB)
    with pytest.raises(UndefinedAttribute):
        eval_arith(E(), arith("alpha@b"), HAB)


def test_sat():
    assert sat(E(), parse_bool("true"), HAB)
    assert sat(E(("a", "s", 1)), parse_bool("s@a = 1", species={"s"}, locations=HAB.locations), HAB)
    assert sat(E(("a", "s", 2)), parse_bool("!(s@a <= 1)", species={"s"}, locations=HAB.locations), HAB)


def test_inc_dec():
    assert inc(E(), "s", "a") == E(("a", "s", 1))
    assert inc(E(("a", "s", 1)), "s", "a") == E(("a", "s", 2))
    assert dec(E(("a", "s", 1)), "s", "a") == E()
    assert dec(E(("a", "s", 3)), "s", "a") == E(("a", "s", 2))
    with pytest.raises(EnvironmentUndefined):
        dec(E(), "s", "a")
    env = E(("b", "t", 4))
    assert dec(inc(env, "s", "a"), "s", "a") == env


def test_merge():
    env = E(("a", "s", 2))
    assert merge(env, [{("a", "s"): 1}, {("a", "s"): -1}]) == env
    assert merge(env, []) == env
    go = {("a", "s"): -1, ("b", "s"): 1}
    prey = {("a", "s"): -1}
    assert merge(env, [go, prey]) == E(("b", "s", 1))
    with pytest.raises(EnvironmentUndefined):
        merge(env, [prey, prey, prey])


def test_env_of():
    assert env_of(SNil()) == E()
    assert env_of(Located(Nil(), "s", "a")) == E()
    assert env_of(Par((Located(Nil(), "s", "a"), SNil()))) == E()


def test_environment_rejects_non_positive():
    with pytest.raises(ValueError):
        Environment({("a", "s"): 0})
