"""Abstract syntax of PALPS models.

Three layers of terms: arithmetic/logical expressions evaluated against an
environment, individual processes, and systems of located individuals and
species replicators.  All nodes are frozen dataclasses; source spans are
carried along but ignored by equality so that parse/pretty round trips
compare structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Union


class _Here:
    """The symbolic self-location token (``here`` in concrete syntax)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "HERE"

    def __reduce__(self):
        return (_Here, ())


HERE = _Here()

LocRef = Union[str, _Here]
Number = Union[Fraction, float, int]


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Node:
    span: SourceSpan | None = field(default=None, compare=False, repr=False, kw_only=True)


# ---------------------------------------------------------------------------
# arithmetic expressions


@dataclass(frozen=True)
class Num(Node):
    value: Fraction


@dataclass(frozen=True)
class Attr(Node):
    """Value of a habitat attribute at a location."""

    name: str
    loc: LocRef


@dataclass(frozen=True)
class Pop(Node):
    """Number of individuals of one species at a location."""

    species: str
    loc: LocRef


@dataclass(frozen=True)
class PopAll(Node):
    """Number of individuals of all species at a location."""

    loc: LocRef


UNARY_OPS = ("neg", "abs", "exp", "log", "sqrt", "floor", "ceil")
BINARY_OPS = ("+", "-", "*", "/", "^", "min", "max")


@dataclass(frozen=True)
class Unary(Node):
    op: str
    arg: "Arith"


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: "Arith"
    right: "Arith"


Arith = Union[Num, Attr, Pop, PopAll, Unary, Binary]

# ---------------------------------------------------------------------------
# logical expressions

COMPARE_OPS = ("=", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class BTrue(Node):
    pass


@dataclass(frozen=True)
class BNot(Node):
    arg: "BoolExpr"


@dataclass(frozen=True)
class BAnd(Node):
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class Compare(Node):
    left: Arith
    op: str
    right: Arith


BoolExpr = Union[BTrue, BNot, BAnd, Compare]

# ---------------------------------------------------------------------------
# actions and processes


@dataclass(frozen=True)
class LocVar(Node):
    """Location variable bound by a neighbour sum."""

    name: str


@dataclass(frozen=True)
class Tick(Node):
    pass


@dataclass(frozen=True)
class Go(Node):
    target: str | LocVar


@dataclass(frozen=True)
class In(Node):
    channel: str


@dataclass(frozen=True)
class Out(Node):
    channel: str


Action = Union[Tick, Go, In, Out]

#: channel name that resolves to the rep channel of the executing individual's species
OWN_REP = "rep"


@dataclass(frozen=True)
class Nil(Node):
    pass


@dataclass(frozen=True)
class Prefix(Node):
    action: Action
    cont: "Process"


@dataclass(frozen=True)
class PSum(Node):
    branches: tuple[tuple[Arith, "Process"], ...]


@dataclass(frozen=True)
class NeighborSum(Node):
    """``sum over var in neigh(here) { weight: body }``.

    ``weight`` is ``None`` for uniform weights, otherwise the name of a
    dispersal table giving ``p[here, n]``.
    """

    var: str
    weight: str | None
    body: "Process"


@dataclass(frozen=True)
class Cond(Node):
    branches: tuple[tuple[BoolExpr, "Process"], ...]


@dataclass(frozen=True)
class Const(Node):
    name: str


Process = Union[Nil, Prefix, PSum, NeighborSum, Cond, Const]

NIL = Nil()

# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class SNil(Node):
    pass


@dataclass(frozen=True)
class Located(Node):
    proc: Process
    species: str
    loc: str


@dataclass(frozen=True)
class SpeciesProc(Node):
    species: str


@dataclass(frozen=True)
class Par(Node):
    items: tuple["System", ...]


@dataclass(frozen=True)
class Restrict(Node):
    body: "System"
    channels: frozenset[str]


System = Union[SNil, Located, SpeciesProc, Par, Restrict]


# ---------------------------------------------------------------------------
# static model description


@dataclass(frozen=True)
class Grid:
    width: int
    height: int
    torus: bool


def grid_name(x: int, y: int) -> str:
    return f"{x}_{y}"


@dataclass
class Habitat:
    locations: tuple[str, ...] = ()
    #: ordered neighbour lists; grids list one entry per lattice direction,
    #: so a 2x2 torus has repeated entries
    neighbors: dict[str, tuple[str, ...]] = field(default_factory=dict)
    attributes: dict[tuple[str, str], Fraction] = field(default_factory=dict)
    tables: dict[str, dict[tuple[str, str], Fraction]] = field(default_factory=dict)
    grid: Grid | None = None

    @classmethod
    def from_grid(cls, width: int, height: int, torus: bool) -> "Habitat":
        locs = tuple(grid_name(x, y) for y in range(1, height + 1) for x in range(1, width + 1))
        nbs: dict[str, tuple[str, ...]] = {}
        for y in range(1, height + 1):
            for x in range(1, width + 1):
                out = []
                for dx, dy in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                    nx, ny = x + dx, y + dy
                    if torus:
                        nx = (nx - 1) % width + 1
                        ny = (ny - 1) % height + 1
                    elif not (1 <= nx <= width and 1 <= ny <= height):
                        continue
                    if (nx, ny) != (x, y):
                        out.append(grid_name(nx, ny))
                nbs[grid_name(x, y)] = tuple(out)
        return cls(locations=locs, neighbors=nbs, grid=Grid(width, height, torus))

    def add_edge(self, a: str, b: str) -> None:
        order = {loc: i for i, loc in enumerate(self.locations)}
        for u, v in ((a, b), (b, a)):
            cur = set(self.neighbors.get(u, ()))
            cur.add(v)
            self.neighbors[u] = tuple(sorted(cur, key=lambda loc: order.get(loc, len(order))))

    def neighbors_of(self, loc: str) -> tuple[str, ...]:
        return self.neighbors.get(loc, ())

    def adjacent(self, a: str, b: str) -> bool:
        return b in self.neighbors.get(a, ())

    def edges(self) -> Iterator[tuple[str, str]]:
        """Undirected edges, each reported once."""
        seen = set()
        for a in self.locations:
            for b in self.neighbors.get(a, ()):
                if (b, a) not in seen and (a, b) not in seen:
                    seen.add((a, b))
                    yield a, b


@dataclass
class Model:
    habitat: Habitat = field(default_factory=Habitat)
    params: dict[str, Fraction] = field(default_factory=dict)
    constants: dict[str, Process] = field(default_factory=dict)
    species: dict[str, Process] = field(default_factory=dict)
    system: System = field(default_factory=SNil)
    spans: dict[str, SourceSpan] = field(default_factory=dict, compare=False, repr=False)

    def species_body(self, species: str) -> Process:
        return self.species[species]


# ---------------------------------------------------------------------------
# traversal helpers


def arith_children(w: Arith) -> tuple[Arith, ...]:
    if isinstance(w, Unary):
        return (w.arg,)
    if isinstance(w, Binary):
        return (w.left, w.right)
    return ()


def walk_arith(w: Arith) -> Iterator[Arith]:
    yield w
    for c in arith_children(w):
        yield from walk_arith(c)


def bool_ariths(e: BoolExpr) -> Iterator[Arith]:
    if isinstance(e, BNot):
        yield from bool_ariths(e.arg)
    elif isinstance(e, BAnd):
        yield from bool_ariths(e.left)
        yield from bool_ariths(e.right)
    elif isinstance(e, Compare):
        yield from walk_arith(e.left)
        yield from walk_arith(e.right)


def process_children(p: Process) -> Iterator[Process]:
    if isinstance(p, Prefix):
        yield p.cont
    elif isinstance(p, PSum):
        for _, q in p.branches:
            yield q
    elif isinstance(p, NeighborSum):
        yield p.body
    elif isinstance(p, Cond):
        for _, q in p.branches:
            yield q


def walk_process(p: Process) -> Iterator[Process]:
    yield p
    for c in process_children(p):
        yield from walk_process(c)


def process_ariths(p: Process) -> Iterator[Arith]:
    """Every arithmetic sub-expression occurring directly in ``p`` (not through constants)."""
    for q in walk_process(p):
        if isinstance(q, PSum):
            for w, _ in q.branches:
                yield from walk_arith(w)
        elif isinstance(q, Cond):
            for e, _ in q.branches:
                yield from bool_ariths(e)


def walk_system(s: System) -> Iterator[System]:
    yield s
    if isinstance(s, Par):
        for item in s.items:
            yield from walk_system(item)
    elif isinstance(s, Restrict):
        yield from walk_system(s.body)


# ---------------------------------------------------------------------------
# myloc substitution and neighbour-sum elimination


def subst_myloc(x, loc: str):
    """Replace every ``here`` in an arithmetic or logical expression by ``loc``."""
    if isinstance(x, (Num, BTrue)):
        return x
    if isinstance(x, Attr):
        return Attr(x.name, loc) if x.loc is HERE else x
    if isinstance(x, Pop):
        return Pop(x.species, loc) if x.loc is HERE else x
    if isinstance(x, PopAll):
        return PopAll(loc) if x.loc is HERE else x
    if isinstance(x, Unary):
        return Unary(x.op, subst_myloc(x.arg, loc))
    if isinstance(x, Binary):
        return Binary(x.op, subst_myloc(x.left, loc), subst_myloc(x.right, loc))
    if isinstance(x, BNot):
        return BNot(subst_myloc(x.arg, loc))
    if isinstance(x, BAnd):
        return BAnd(subst_myloc(x.left, loc), subst_myloc(x.right, loc))
    if isinstance(x, Compare):
        return Compare(subst_myloc(x.left, loc), x.op, subst_myloc(x.right, loc))
    raise TypeError(f"not an expression: {x!r}")


def mentions_here(x) -> bool:
    if isinstance(x, (Attr, Pop, PopAll)):
        return x.loc is HERE
    if isinstance(x, (BNot, BAnd, Compare)):
        return any(mentions_here(w) for w in bool_ariths(x))
    if isinstance(x, (Unary, Binary)):
        return any(mentions_here(c) for c in arith_children(x))
    return False


def bind_location(p: Process, var: str, loc: str) -> Process:
    """Substitute a concrete location for ``var`` in go targets of ``p``."""
    if isinstance(p, Prefix):
        act = p.action
        if isinstance(act, Go) and isinstance(act.target, LocVar) and act.target.name == var:
            act = Go(loc, span=act.span)
        return Prefix(act, bind_location(p.cont, var, loc))
    if isinstance(p, PSum):
        return PSum(tuple((w, bind_location(q, var, loc)) for w, q in p.branches))
    if isinstance(p, Cond):
        return Cond(tuple((e, bind_location(q, var, loc)) for e, q in p.branches))
    if isinstance(p, NeighborSum):
        if p.var == var:
            return p
        return NeighborSum(p.var, p.weight, bind_location(p.body, var, loc))
    return p


class NoNeighbors(Exception):
    pass


def expand_neighbor_sum(p: NeighborSum, loc: str, habitat: Habitat) -> PSum:
    """Turn a neighbour sum at ``loc`` into an ordinary probabilistic sum."""
    nbs = habitat.neighbors_of(loc)
    if not nbs:
        raise NoNeighbors(f"location {loc} has no neighbours")
    branches = []
    if p.weight is None:
        w = Num(Fraction(1, len(nbs)))
        for n in nbs:
            branches.append((w, bind_location(p.body, p.var, n)))
    else:
        table = habitat.tables[p.weight]
        for n in nbs:
            branches.append((Num(table.get((loc, n), Fraction(0))), bind_location(p.body, p.var, n)))
    return PSum(tuple(branches))
