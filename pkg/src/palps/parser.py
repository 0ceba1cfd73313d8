"""Concrete syntax for PALPS models (``.palps``) and PCTL formulas (``.pctl``).

The grammar is documented in ``docs/grammar.md``.  Parsing is plain
recursive descent over a regex tokenizer; ``pretty`` prints a model back in
a form that re-parses to a structurally equal model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .syntax import (
    HERE,
    Attr,
    BAnd,
    Binary,
    BNot,
    BTrue,
    Compare,
    Cond,
    Const,
    Go,
    Habitat,
    In,
    Located,
    LocVar,
    Model,
    NeighborSum,
    Nil,
    Num,
    Out,
    Par,
    Pop,
    PopAll,
    Prefix,
    PSum,
    Restrict,
    SNil,
    SourceSpan,
    SpeciesProc,
    Tick,
    Unary,
)
from . import pctl_syntax as F


class ParseError(Exception):
    def __init__(self, message: str, span: SourceSpan, expected: frozenset[str] = frozenset()):
        self.message = message
        self.span = span
        self.expected = expected
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{span}: {message}{detail}")


# ---------------------------------------------------------------------------
# tokens

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<grid>\d+_\d+)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>->|--|<=|>=|==|!=|=\?|[=<>+\-*/^(){}\[\],;:.@|&!])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # name, num, grid, op, eof
    text: str
    span: SourceSpan


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    toks: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = SourceSpan(file, line, pos - line_start + 1, 1)
            raise ParseError(f"unexpected character {text[pos]!r}", span)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            span = SourceSpan(file, line, pos - line_start + 1, m.end() - pos)
            toks.append(Token(kind, m.group(), span))
        pos = m.end()
    col = pos - line_start + 1
    toks.append(Token("eof", "", SourceSpan(file, line, max(col - 1, 1) if pos else 1, 0)))
    return toks


FUNCTIONS = {"abs", "exp", "log", "sqrt", "floor", "ceil", "min", "max", "count", "total"}
KEYWORDS = {
    "locations", "neighbors", "grid", "torus", "bounded", "attribute", "default",
    "table", "param", "process", "species", "system", "restrict", "sum", "over",
    "in", "neigh", "here", "uniform", "cond", "tick", "go", "out", "true", "false",
}


class _Parser:
    def __init__(self, text: str, file: str, *, species=None, locations=(), params=None):
        self.toks = tokenize(text, file)
        self.i = 0
        self.species: set[str] = set(species or ())
        self.locations: tuple[str, ...] = tuple(locations)
        self.params: dict[str, Fraction] = dict(params or {})
        self.bound_vars: list[str] = []

    # -- token helpers -----------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("op", "name")

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            self.fail(f"expected {text!r}", {text})
        return t

    def fail(self, message: str, expected=()):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"{message}, found {found}", t.span, frozenset(expected))

    def name(self, what: str = "identifier") -> Token:
        t = self.tok
        if t.kind != "name":
            self.fail(f"expected {what}", {what})
        self.i += 1
        return t

    def location_name(self) -> Token:
        t = self.tok
        if t.kind in ("name", "grid") and t.text not in KEYWORDS:
            self.i += 1
            return t
        self.fail("expected location", {"location"})

    def integer(self) -> int:
        t = self.tok
        if t.kind != "num" or not t.text.isdigit():
            self.fail("expected integer", {"integer"})
        self.i += 1
        return int(t.text)

    def number(self) -> Fraction:
        neg = self.accept("-") is not None
        t = self.tok
        if t.kind != "num":
            self.fail("expected number", {"number"})
        self.i += 1
        v = Fraction(t.text)
        if self.at("/") and self.peek().kind == "num":
            self.i += 1
            d = Fraction(self.tok.text)
            self.i += 1
            v = v / d
        return -v if neg else v

    # -- arithmetic --------------------------------------------------------
    def arith(self):
        left = self.term()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            left = Binary(op, left, self.term())
        return left

    def term(self):
        left = self.factor()
        while self.at("*") or self.at("/"):
            op = self.tok.text
            self.i += 1
            right = self.factor()
            if op == "/" and isinstance(left, Num) and isinstance(right, Num) and right.value != 0:
                left = Num(left.value / right.value)
            else:
                left = Binary(op, left, right)
        return left

    def factor(self):
        base = self.unary()
        if self.accept("^"):
            return Binary("^", base, self.factor())
        return base

    def unary(self):
        if self.accept("-"):
            arg = self.unary()
            if isinstance(arg, Num):
                return Num(-arg.value)
            return Unary("neg", arg)
        return self.primary()

    def locref(self):
        if self.accept("here"):
            return HERE
        return self.location_name().text

    def primary(self):
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(Fraction(t.text), span=t.span)
        if self.accept("("):
            w = self.arith()
            self.expect(")")
            return w
        if self.at("@"):
            self.i += 1
            return PopAll(self.locref(), span=t.span)
        if t.kind == "name":
            if t.text in FUNCTIONS and self.peek().text == "(":
                return self.function()
            if self.peek().text == "@":
                self.i += 2
                loc = self.locref()
                if t.text in self.species:
                    return Pop(t.text, loc, span=t.span)
                return Attr(t.text, loc, span=t.span)
            if t.text in self.params:
                self.i += 1
                return Num(self.params[t.text], span=t.span)
            if t.text not in KEYWORDS:
                raise ParseError(f"unknown parameter {t.text!r}", t.span, frozenset({"parameter"}))
        self.fail("expected arithmetic expression", {"number", "(", "@", "name@loc"})

    def function(self):
        t = self.name()
        self.expect("(")
        if t.text == "count":
            sp = self.name("species").text
            self.expect(",")
            loc = self.locref()
            self.expect(")")
            return Pop(sp, loc, span=t.span)
        if t.text == "total":
            sp = self.name("species").text
            self.expect(")")
            if not self.locations:
                raise ParseError("total() needs declared locations", t.span)
            out = None
            for loc in self.locations:
                term = Pop(sp, loc, span=t.span)
                out = term if out is None else Binary("+", out, term)
            return out
        args = [self.arith()]
        while self.accept(","):
            args.append(self.arith())
        self.expect(")")
        if t.text in ("min", "max"):
            if len(args) != 2:
                raise ParseError(f"{t.text} takes two arguments", t.span)
            return Binary(t.text, args[0], args[1], span=t.span)
        if len(args) != 1:
            raise ParseError(f"{t.text} takes one argument", t.span)
        return Unary(t.text, args[0], span=t.span)

    # -- logical -----------------------------------------------------------
    def bexpr(self):
        left = self.bconj()
        while self.accept("|"):
            right = self.bconj()
            left = BNot(BAnd(BNot(left), BNot(right)))
        return left

    def bconj(self):
        left = self.bneg()
        while self.accept("&"):
            left = BAnd(left, self.bneg())
        return left

    def bneg(self):
        if self.accept("!"):
            return BNot(self.bneg())
        if self.accept("true"):
            return BTrue()
        if self.accept("false"):
            return BNot(BTrue())
        if self.at("("):
            save = self.i
            try:
                return self.comparison()
            except ParseError:
                self.i = save
            self.expect("(")
            e = self.bexpr()
            self.expect(")")
            return e
        return self.comparison()

    def comparison(self):
        start = self.tok
        left = self.arith()
        t = self.tok
        op = {"==": "="}.get(t.text, t.text)
        if t.kind != "op" or op not in ("=", "!=", "<", "<=", ">", ">="):
            self.fail("expected comparison operator", {"=", "!=", "<", "<=", ">", ">="})
        self.i += 1
        return Compare(left, op, self.arith(), span=start.span)

    # -- processes ---------------------------------------------------------
    def process(self):
        t = self.tok
        if t.kind == "num" and t.text == "0":
            self.i += 1
            return Nil(span=t.span)
        if self.accept("("):
            p = self.process()
            self.expect(")")
            return p
        if self.at("sum"):
            return self.sum()
        if self.at("cond"):
            return self.cond()
        if self.at("tick"):
            self.i += 1
            self.expect(".")
            return Prefix(Tick(span=t.span), self.process(), span=t.span)
        if self.at("go"):
            self.i += 1
            target = self.location_name().text
            act = Go(LocVar(target) if target in self.bound_vars else target, span=t.span)
            self.expect(".")
            return Prefix(act, self.process(), span=t.span)
        if self.at("out"):
            self.i += 1
            ch = self.name("channel").text
            self.expect(".")
            return Prefix(Out(ch, span=t.span), self.process(), span=t.span)
        if self.at("in") and self.peek().kind == "name":
            self.i += 1
            ch = self.name("channel").text
            self.expect(".")
            return Prefix(In(ch, span=t.span), self.process(), span=t.span)
        if t.kind == "name" and t.text not in KEYWORDS:
            self.i += 1
            if self.accept("."):
                return Prefix(In(t.text, span=t.span), self.process(), span=t.span)
            return Const(t.text, span=t.span)
        self.fail("expected process", {"0", "tick", "go", "out", "sum", "cond", "name", "("})

    def sum(self):
        start = self.expect("sum")
        if self.accept("over"):
            var = self.name("variable").text
            self.expect("in")
            self.expect("neigh")
            self.expect("(")
            self.expect("here")
            self.expect(")")
            self.expect("{")
            if self.accept("uniform"):
                weight = None
            else:
                weight = self.name("table name").text
            self.expect(":")
            self.bound_vars.append(var)
            try:
                body = self.process()
            finally:
                self.bound_vars.pop()
            self.expect("}")
            return NeighborSum(var, weight, body, span=start.span)
        self.expect("{")
        branches = [self.branch()]
        while self.accept("+"):
            branches.append(self.branch())
        self.expect("}")
        return PSum(tuple(branches), span=start.span)

    def branch(self):
        w = self.arith()
        self.expect(":")
        return (w, self.process())

    def cond(self):
        start = self.expect("cond")
        self.expect("(")
        branches = []
        while True:
            e = self.bexpr()
            self.expect("->")
            branches.append((e, self.process()))
            if not self.accept(","):
                break
        self.expect(")")
        return Cond(tuple(branches), span=start.span)

    # -- systems -----------------------------------------------------------
    def system(self):
        s = self.par()
        while self.at("restrict"):
            self.i += 1
            self.expect("{")
            chans = []
            if not self.at("}"):
                chans.append(self.name("channel").text)
                while self.accept(","):
                    chans.append(self.name("channel").text)
            self.expect("}")
            s = Restrict(s, frozenset(chans))
        return s

    def par(self):
        items = [self.sys_atom()]
        while self.accept("|"):
            items.append(self.sys_atom())
        if len(items) == 1 and not isinstance(items[0], _Repeat):
            return items[0]
        flat = []
        for it in items:
            flat.extend(it.items if isinstance(it, _Repeat) else [it])
        return Par(tuple(flat))

    def sys_atom(self):
        t = self.tok
        if t.kind == "num" and self.peek().text == "*":
            n = self.integer()
            self.expect("*")
            atom = self.sys_atom()
            if n < 1:
                raise ParseError("multiplicity must be positive", t.span)
            return _Repeat((atom,) * n) if n > 1 else atom
        if t.kind == "num" and t.text == "0":
            self.i += 1
            return SNil(span=t.span)
        if self.accept("species"):
            return SpeciesProc(self.name("species").text, span=t.span)
        if self.at("("):
            save = self.i
            try:
                self.i += 1
                s = self.system()
                self.expect(")")
                if not self.at("@"):
                    return s
            except ParseError:
                pass
            self.i = save
        proc = self.process()
        self.expect("@")
        self.expect("(")
        loc = self.location_name().text
        self.expect(",")
        sp = self.name("species").text
        self.expect(")")
        return Located(proc, sp, loc, span=t.span)

    # -- declarations ------------------------------------------------------
    def model(self, overrides=None) -> Model:
        model = Model()
        hab = model.habitat
        overrides = dict(overrides or {})
        explicit_locs = False
        while self.tok.kind != "eof":
            t = self.tok
            if self.accept("locations"):
                if hab.grid is not None:
                    raise ParseError("cannot mix grid and explicit locations", t.span)
                explicit_locs = True
                names = [self.location_name().text]
                while self.accept(","):
                    names.append(self.location_name().text)
                hab.locations = hab.locations + tuple(n for n in names if n not in hab.locations)
                self.locations = hab.locations
            elif self.accept("neighbors"):
                pairs = [self.edge()]
                while self.accept(","):
                    pairs.append(self.edge())
                for a, b in pairs:
                    hab.add_edge(a, b)
            elif self.accept("grid"):
                if explicit_locs or hab.grid is not None:
                    raise ParseError("grid must be the only location declaration", t.span)
                self.expect("(")
                w = self.integer()
                self.expect(",")
                h = self.integer()
                self.expect(",")
                if self.accept("torus"):
                    torus = True
                else:
                    self.expect("bounded")
                    torus = False
                self.expect(")")
                if w < 1 or h < 1:
                    raise ParseError("grid dimensions must be positive", t.span)
                g = Habitat.from_grid(w, h, torus)
                hab.locations, hab.neighbors, hab.grid = g.locations, g.neighbors, g.grid
                self.locations = hab.locations
            elif self.accept("attribute"):
                name = self.name("attribute name").text
                default = None
                if self.accept("default"):
                    default = self.number()
                self.expect("{")
                values = {}
                if not self.at("}"):
                    while True:
                        loc = self.location_name().text
                        self.expect(":")
                        values[loc] = self.number()
                        if not self.accept(","):
                            break
                self.expect("}")
                if default is not None:
                    for loc in hab.locations:
                        hab.attributes[(name, loc)] = default
                for loc, v in values.items():
                    hab.attributes[(name, loc)] = v
                model.spans[f"attribute {name}"] = t.span
            elif self.accept("table"):
                name = self.name("table name").text
                self.expect("{")
                table = {}
                if not self.at("}"):
                    while True:
                        a = self.location_name().text
                        self.expect("->")
                        b = self.location_name().text
                        self.expect(":")
                        table[(a, b)] = self.number()
                        if not self.accept(","):
                            break
                self.expect("}")
                hab.tables[name] = table
                model.spans[f"table {name}"] = t.span
            elif self.accept("param"):
                name = self.name("parameter name")
                self.expect("=")
                w = self.arith()
                from .environment import EMPTY, EvaluationError, eval_arith

                try:
                    value = eval_arith(EMPTY, w, hab)
                except EvaluationError as exc:
                    raise ParseError(f"parameter {name.text}: {exc}", name.span) from None
                if name.text in overrides:
                    value = overrides.pop(name.text)
                value = Fraction(value)
                self.params[name.text] = value
                model.params[name.text] = value
            elif self.accept("process"):
                name = self.name("process name")
                self.expect("=")
                if name.text in model.constants:
                    raise ParseError(f"duplicate definition of {name.text}", name.span)
                model.constants[name.text] = self.process()
                model.spans[f"process {name.text}"] = name.span
            elif self.accept("species"):
                name = self.name("species name")
                self.expect("=")
                if name.text in model.species:
                    raise ParseError(f"duplicate species {name.text}", name.span)
                model.species[name.text] = self.process()
                model.spans[f"species {name.text}"] = name.span
            elif self.accept("system"):
                self.expect("=")
                if "system" in model.spans:
                    raise ParseError("duplicate system declaration", t.span)
                model.system = self.system()
                model.spans["system"] = t.span
            else:
                self.fail(
                    "expected declaration",
                    {"locations", "neighbors", "grid", "attribute", "table", "param", "process", "species", "system"},
                )
            self.expect(";")
        if overrides:
            raise ParseError(
                f"unknown parameter(s) overridden: {', '.join(sorted(overrides))}", self.tok.span
            )
        return model

    def edge(self):
        a = self.location_name().text
        self.expect("--")
        b = self.location_name().text
        return a, b


@dataclass(frozen=True)
class _Repeat:
    items: tuple


def _prescan_species(text: str, file: str) -> set[str]:
    toks = tokenize(text, file)
    return {toks[k + 1].text for k, t in enumerate(toks[:-1]) if t.kind == "name" and t.text == "species"}


def parse_model(text: str, file: str = "<input>", params: dict | None = None) -> Model:
    """Parse a ``.palps`` model; ``params`` overrides declared ``param`` values."""
    p = _Parser(text, file, species=_prescan_species(text, file))
    return p.model(overrides={k: Fraction(v) for k, v in (params or {}).items()})


def parse_process(text: str, species=(), params=None):
    p = _Parser(text, "<input>", species=species, params=params)
    proc = p.process()
    if p.tok.kind != "eof":
        p.fail("unexpected trailing input")
    return proc


def parse_bool(text: str, species=(), locations=()):
    p = _Parser(text, "<input>", species=species, locations=locations)
    e = p.bexpr()
    if p.tok.kind != "eof":
        p.fail("unexpected trailing input")
    return e


# ---------------------------------------------------------------------------
# PCTL formulas


class _FormulaParser(_Parser):
    def state(self):
        left = self.f_or()
        if self.accept("->"):
            right = self.state()
            return F.Not(F.And(left, F.Not(right)))
        return left

    def f_or(self):
        left = self.f_and()
        while self.accept("|"):
            right = self.f_and()
            left = F.Not(F.And(F.Not(left), F.Not(right)))
        return left

    def f_and(self):
        left = self.f_un()
        while self.accept("&"):
            left = F.And(left, self.f_un())
        return left

    def f_un(self):
        t = self.tok
        if self.accept("!"):
            return F.Not(self.f_un())
        if self.accept("true"):
            return F.TRUE
        if self.accept("false"):
            return F.Not(F.TRUE)
        if t.kind == "name" and t.text == "P" and self.peek().kind == "op" and self.peek().text in (
            "<", "<=", ">", ">=", "=", "==", "=?",
        ):
            return self.prob()
        if self.at("("):
            save = self.i
            try:
                return self.atom()
            except ParseError:
                self.i = save
            self.expect("(")
            f = self.state()
            self.expect(")")
            return f
        return self.atom()

    def atom(self):
        start = self.tok
        e = self.comparison()
        from .syntax import mentions_here

        if mentions_here(e):
            raise ParseError("'here' is not allowed in formulas", start.span)
        return F.Atom(e)

    def prob(self):
        self.i += 1
        op = self.tok.text
        self.i += 1
        if op == "=?":
            bound = None
            op = "?"
        else:
            op = {"==": "="}.get(op, op)
            t = self.tok
            bound = self.number()
            if not 0 <= bound <= 1:
                raise ParseError("probability bound must lie in [0, 1]", t.span)
        self.expect("[")
        path = self.path()
        self.expect("]")
        return F.Prob(op, bound, path)

    def bound(self):
        if self.accept("{"):
            self.expect("<=")
            k = self.integer()
            self.expect("}")
            return k
        if self.accept("<="):
            return self.integer()
        return None

    def path(self):
        t = self.tok
        if t.kind == "name" and t.text == "X":
            self.i += 1
            return F.Next(self.state())
        if t.kind == "name" and t.text == "F" and (self.peek().text in ("{", "<=", "(", "!") or self.peek().kind != "op"):
            self.i += 1
            k = self.bound()
            return F.Until(F.TRUE, self.state(), k)
        left = self.state()
        u = self.tok
        if not (u.kind == "name" and u.text == "U"):
            self.fail("expected 'U'", {"U"})
        self.i += 1
        k = self.bound()
        return F.Until(left, self.state(), k)


def parse_formula(text: str, model: Model | None = None):
    species = set(model.species) if model else set()
    if model:
        for s in _species_in_system(model.system):
            species.add(s)
    locs = model.habitat.locations if model else ()
    params = model.params if model else None
    p = _FormulaParser(text, "<formula>", species=species or None, locations=locs, params=params)
    if not species:
        p.species = _AllSpecies()
    f = p.state()
    if p.tok.kind != "eof":
        p.fail("unexpected trailing input")
    return f


class _AllSpecies(set):
    def __contains__(self, item):
        return True


def _species_in_system(s):
    from .syntax import walk_system

    for node in walk_system(s):
        if isinstance(node, (Located, SpeciesProc)):
            yield node.species


def parse_formula_file(text: str, model: Model | None = None) -> list[tuple[str, object]]:
    """Parse a ``.pctl`` file: one formula per non-blank, non-comment line."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append((line, parse_formula(line, model)))
        except ParseError as exc:
            s = exc.span
            raise ParseError(
                exc.message, SourceSpan("<formulas>", lineno, s.column, s.length), exc.expected
            ) from None
    return out


# ---------------------------------------------------------------------------
# pretty printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _fmt_number(v) -> str:
    v = Fraction(v)
    if v.denominator == 1:
        s = str(v.numerator)
    else:
        d = v.denominator
        while d % 2 == 0:
            d //= 2
        while d % 5 == 0:
            d //= 5
        if d == 1:
            sign = "-" if v < 0 else ""
            a = abs(v)
            whole, frac = divmod(a.numerator, a.denominator)
            digits = ""
            while frac:
                frac *= 10
                q, frac = divmod(frac, a.denominator)
                digits += str(q)
            s = f"{sign}{whole}.{digits}"
        else:
            s = f"({v.numerator}/{v.denominator})"
            return s
    return f"({s})" if v < 0 else s


def _fmt_loc(loc) -> str:
    return "here" if loc is HERE else loc


def format_arith(w, prec: int = 0) -> str:
    if isinstance(w, Num):
        return _fmt_number(w.value)
    if isinstance(w, Attr):
        return f"{w.name}@{_fmt_loc(w.loc)}"
    if isinstance(w, Pop):
        return f"{w.species}@{_fmt_loc(w.loc)}"
    if isinstance(w, PopAll):
        return f"@{_fmt_loc(w.loc)}"
    if isinstance(w, Unary):
        if w.op == "neg":
            s = f"-{format_arith(w.arg, 4)}"
            return f"({s})" if prec > 0 else s
        return f"{w.op}({format_arith(w.arg)})"
    if isinstance(w, Binary):
        if w.op in ("min", "max"):
            return f"{w.op}({format_arith(w.left)}, {format_arith(w.right)})"
        p = _PREC[w.op]
        if w.op == "^":
            s = f"{format_arith(w.left, p + 1)} ^ {format_arith(w.right, p)}"
        else:
            s = f"{format_arith(w.left, p)} {w.op} {format_arith(w.right, p + 1)}"
        return f"({s})" if p < prec else s
    raise TypeError(w)


def format_bool(e, prec: int = 0) -> str:
    if isinstance(e, BTrue):
        return "true"
    if isinstance(e, BNot):
        return f"!{format_bool(e.arg, 3)}"
    if isinstance(e, BAnd):
        s = f"{format_bool(e.left, 2)} & {format_bool(e.right, 3)}"
        return f"({s})" if prec > 2 else s
    if isinstance(e, Compare):
        s = f"{format_arith(e.left)} {e.op} {format_arith(e.right)}"
        return f"({s})" if prec > 2 else s
    raise TypeError(e)


def format_action(a) -> str:
    if isinstance(a, Tick):
        return "tick"
    if isinstance(a, Go):
        t = a.target.name if isinstance(a.target, LocVar) else a.target
        return f"go {t}"
    if isinstance(a, Out):
        return f"out {a.channel}"
    if isinstance(a, In):
        return a.channel
    raise TypeError(a)


def format_process(p) -> str:
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, Const):
        return p.name
    if isinstance(p, Prefix):
        return f"{format_action(p.action)} . {format_process(p.cont)}"
    if isinstance(p, PSum):
        return "sum { " + " + ".join(f"{format_arith(w)}: {format_process(q)}" for w, q in p.branches) + " }"
    if isinstance(p, NeighborSum):
        weight = "uniform" if p.weight is None else p.weight
        return f"sum over {p.var} in neigh(here) {{ {weight}: {format_process(p.body)} }}"
    if isinstance(p, Cond):
        return "cond(" + ", ".join(f"{format_bool(e)} -> {format_process(q)}" for e, q in p.branches) + ")"
    raise TypeError(p)


def format_system(s, top: bool = True) -> str:
    if isinstance(s, SNil):
        return "0"
    if isinstance(s, SpeciesProc):
        return f"species {s.species}"
    if isinstance(s, Located):
        proc = s.proc.name if isinstance(s.proc, Const) else f"({format_process(s.proc)})"
        return f"{proc}@({s.loc},{s.species})"
    if isinstance(s, Par):
        inner = " | ".join(
            f"({format_system(it)})" if isinstance(it, (Par, Restrict)) else format_system(it, False)
            for it in s.items
        )
        return inner
    if isinstance(s, Restrict):
        body = format_system(s.body)
        return f"{body} restrict {{{', '.join(sorted(s.channels))}}}"
    raise TypeError(s)


def pretty(model: Model) -> str:
    hab = model.habitat
    lines = []
    if hab.grid is not None:
        g = hab.grid
        lines.append(f"grid({g.width}, {g.height}, {'torus' if g.torus else 'bounded'});")
    elif hab.locations:
        lines.append(f"locations {', '.join(hab.locations)};")
        edges = list(hab.edges())
        if edges:
            lines.append("neighbors " + ", ".join(f"{a} -- {b}" for a, b in edges) + ";")
    attrs: dict[str, list[tuple[str, Fraction]]] = {}
    order = {loc: i for i, loc in enumerate(hab.locations)}
    for (name, loc), v in hab.attributes.items():
        attrs.setdefault(name, []).append((loc, v))
    for name in sorted(attrs):
        vals = sorted(attrs[name], key=lambda lv: (order.get(lv[0], len(order)), lv[0]))
        lines.append(f"attribute {name} {{ " + ", ".join(f"{loc}: {_fmt_number(v)}" for loc, v in vals) + " };")
    for name in sorted(hab.tables):
        entries = sorted(hab.tables[name].items(), key=lambda kv: (order.get(kv[0][0], 0), order.get(kv[0][1], 0), kv[0]))
        lines.append(f"table {name} {{ " + ", ".join(f"{a} -> {b}: {_fmt_number(v)}" for (a, b), v in entries) + " };")
    for name, v in model.params.items():
        lines.append(f"param {name} = {_fmt_number(v)};")
    for name, body in model.constants.items():
        lines.append(f"process {name} = {format_process(body)};")
    for name, body in model.species.items():
        lines.append(f"species {name} = {format_process(body)};")
    lines.append(f"system = {format_system(model.system)};")
    return "\n".join(lines) + "\n"


def format_formula(f, prec: int = 0) -> str:
    if isinstance(f, F.TrueF):
        return "true"
    if isinstance(f, F.Atom):
        return format_bool(f.expr, 3)
    if isinstance(f, F.Not):
        return f"!{format_formula(f.arg, 3)}"
    if isinstance(f, F.And):
        s = f"{format_formula(f.left, 2)} & {format_formula(f.right, 3)}"
        return f"({s})" if prec > 2 else s
    if isinstance(f, F.Prob):
        bound = "=?" if f.op == "?" else f"{f.op}{_fmt_number(f.bound)}"
        return f"P{bound} [ {format_path(f.path)} ]"
    raise TypeError(f)


def format_path(p) -> str:
    if isinstance(p, F.Next):
        return f"X {format_formula(p.arg, 3)}"
    if isinstance(p, F.Until):
        k = "" if p.bound is None else f"{{<={p.bound}}}"
        return f"{format_formula(p.left, 3)} U{k} {format_formula(p.right, 3)}"
    raise TypeError(p)


__all__ = [
    "ParseError",
    "parse_model",
    "parse_formula",
    "parse_formula_file",
    "parse_process",
    "parse_bool",
    "pretty",
    "format_arith",
    "format_bool",
    "format_process",
    "format_system",
    "format_formula",
    "format_path",
    "tokenize",
]
