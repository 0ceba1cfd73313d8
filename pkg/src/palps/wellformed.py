"""Static checks on parsed models."""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    HERE,
    OWN_REP,
    Attr,
    Cond,
    Const,
    Go,
    In,
    Located,
    Model,
    NeighborSum,
    Out,
    Pop,
    PopAll,
    Prefix,
    SNil,
    SourceSpan,
    SpeciesProc,
    BTrue,
    process_ariths,
    walk_process,
    walk_system,
)


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: SourceSpan | None = None
    severity: str = "error"

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}{self.severity}: {self.message}"


def _bodies(model: Model):
    for name, body in model.constants.items():
        yield f"process {name}", body
    for name, body in model.species.items():
        yield f"species {name}", body
    for node in walk_system(model.system):
        if isinstance(node, Located):
            yield "system", node.proc


def check_wellformed(model: Model) -> list[Diagnostic]:
    """Errors that make the model meaningless; an empty list means well-formed."""
    hab = model.habitat
    locs = set(hab.locations)
    out: list[Diagnostic] = []

    def err(msg, span=None):
        out.append(Diagnostic(msg, span))

    if not hab.locations:
        err("model declares no locations")
    for a, nbs in hab.neighbors.items():
        if a not in locs:
            err(f"neighbour relation mentions undeclared location {a}")
        for b in nbs:
            if b == a:
                err(f"self-neighbor {a}")
            elif b not in locs:
                err(f"neighbour relation mentions undeclared location {b}")
    for (name, loc) in hab.attributes:
        if loc not in locs:
            err(f"attribute {name} given for undeclared location {loc}", model.spans.get(f"attribute {name}"))
    for tname, table in hab.tables.items():
        for (a, b), v in table.items():
            if a not in locs or b not in locs:
                err(f"table {tname} mentions undeclared location in {a} -> {b}", model.spans.get(f"table {tname}"))
            elif not hab.adjacent(a, b):
                err(f"table {tname} entry {a} -> {b} is not a neighbour pair", model.spans.get(f"table {tname}"))
            if not 0 <= v <= 1:
                err(f"table {tname} entry {a} -> {b} is not a probability", model.spans.get(f"table {tname}"))
    if "system" not in model.spans and isinstance(model.system, SNil):
        err("model has no system declaration")

    attr_names = {name for name, _ in hab.attributes}
    species_names = set(model.species)

    for where, body in _bodies(model):
        for w in process_ariths(body):
            if isinstance(w, (Attr, Pop, PopAll)) and w.loc is not HERE and w.loc not in locs:
                err(f"undefined location {w.loc} in {where}", w.span)
            if isinstance(w, Attr):
                if w.name not in attr_names:
                    err(f"undefined attribute {w.name} in {where}", w.span)
                elif w.loc is HERE:
                    missing = [loc for loc in hab.locations if (w.name, loc) not in hab.attributes]
                    if missing:
                        err(f"attribute {w.name} undefined at {', '.join(missing)}", w.span)
                elif (w.name, w.loc) not in hab.attributes:
                    err(f"attribute {w.name} undefined at {w.loc}", w.span)
            if isinstance(w, Pop) and w.species not in species_names:
                err(f"undefined species {w.species} in {where}", w.span)
        for q in walk_process(body):
            if isinstance(q, Const) and q.name not in model.constants:
                err(f"undefined constant {q.name}", q.span)
            elif isinstance(q, Prefix):
                act = q.action
                if isinstance(act, Go) and isinstance(act.target, str) and act.target not in locs:
                    err(f"go to undefined location {act.target}", act.span)
                if isinstance(act, (In, Out)):
                    ch = act.channel
                    for prefix in ("rep_", "prey_"):
                        if ch.startswith(prefix) and ch[len(prefix):] not in species_names:
                            err(f"channel {ch} names undefined species", act.span)
            elif isinstance(q, NeighborSum):
                if q.var in locs:
                    err(f"neighbour variable {q.var} shadows a location", q.span)
                if q.weight is not None and q.weight not in hab.tables:
                    err(f"undefined dispersal table {q.weight}", q.span)

    for node in walk_system(model.system):
        if isinstance(node, (Located, SpeciesProc)) and node.species not in species_names:
            err(f"species {node.species} has no definition", node.span)
        if isinstance(node, Located) and node.loc not in locs:
            err(f"individual placed at undefined location {node.loc}", node.span)

    for name in _unguarded_cycle(model):
        err(f"unguarded recursion through constant {name}", model.spans.get(f"process {name}"))
    return out


def _unguarded_cycle(model: Model) -> list[str]:
    """Constants reachable from themselves through cond branches and constant references only."""

    def heads(p):
        if isinstance(p, Const):
            yield p.name
        elif isinstance(p, Cond):
            for _, q in p.branches:
                yield from heads(q)

    graph = {name: set(heads(body)) for name, body in model.constants.items()}
    bad = []
    for start in graph:
        seen, stack = set(), list(graph[start])
        while stack:
            n = stack.pop()
            if n == start:
                bad.append(start)
                break
            if n in seen or n not in graph:
                continue
            seen.add(n)
            stack.extend(graph[n])
    return bad


def lint(model: Model) -> list[Diagnostic]:
    """Warnings: legal constructs that are likely modelling mistakes."""
    out = []
    hab = model.habitat
    for where, body in _bodies(model):
        for q in walk_process(body):
            if isinstance(q, Cond) and not isinstance(q.branches[-1][0], BTrue):
                out.append(Diagnostic(f"cond in {where} has no final 'true' branch", q.span, "warning"))
            if isinstance(q, Prefix) and isinstance(q.action, In) and q.action.channel == OWN_REP:
                out.append(Diagnostic(f"input on bare 'rep' in {where}", q.action.span, "warning"))
            if isinstance(q, Prefix) and isinstance(q.action, Go) and isinstance(q.action.target, str):
                t = q.action.target
                if not any(t in nbs for nbs in hab.neighbors.values()):
                    out.append(Diagnostic(f"go {t} in {where}: no location has {t} as neighbour", q.action.span, "warning"))
    for a in hab.locations:
        if not hab.neighbors_of(a):
            out.append(Diagnostic(f"location {a} has no neighbours", None, "warning"))
    return out
