"""PCTL model checking over a built :class:`~palps.statespace.Mdp`.

Probabilities are computed for both scheduler quantifiers by Jacobi value
iteration.  Time is counted in ticks.  The bounded until ``U{<=k}`` is solved
in layers: layer ``j`` holds the probability of reaching the goal before the
``j``-th further tick completes; non-tick moves stay inside a layer and tick
moves drop to layer ``j - 1``, whose value is the goal indicator at ``j = 0``.
``X phi`` likewise looks at the state entered by the next tick.

Truncated states (frontier of a bounded exploration) make results
three-valued.  Every state formula is evaluated to a pair of sets
``(lower, upper)``: states that certainly satisfy it and states that
possibly do.  Probabilities are bracketed by a pessimistic pass (truncated
states fail) and an optimistic pass (truncated states succeed).

``brute_force_prob`` is an independent exact oracle (rational arithmetic,
backward induction and policy iteration) used for testing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse.linalg import spsolve

from .parser import format_formula
from .pctl_syntax import And, Atom, Next, Not, Prob, TrueF, Until, atoms
from .statespace import Mdp

VI_TOLERANCE = 1e-10
CMP_TOLERANCE = 1e-9
MAX_ITERATIONS = 1_000_000


class UnregisteredAtom(KeyError):
    pass


class NonConvergence(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"value iteration did not converge after {iterations} sweeps (residual {residual:.3g})")


class TooLarge(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# matrix view of an MDP


class _Matrix:
    """Choices flattened into rows of a sparse matrix, grouped by state."""

    def __init__(self, mdp: Mdp):
        n = mdp.n
        rows, cols, vals, owner, tick = [], [], [], [], []
        r = 0
        for s, cs in enumerate(mdp.choices):
            for ch in cs:
                for t, p in ch.transitions:
                    rows.append(r)
                    cols.append(t)
                    vals.append(float(p))
                owner.append(s)
                tick.append(ch.tick)
                r += 1
        self.n = n
        self.rows = r
        self.owner = np.asarray(owner, dtype=np.int64)
        self.tick = np.asarray(tick, dtype=bool)
        self.P = sparse.csr_matrix((vals, (rows, cols)), shape=(r, n))
        counts = np.bincount(self.owner, minlength=n) if r else np.zeros(n, dtype=np.int64)
        self.has_choice = counts > 0
        starts = np.zeros(n, dtype=np.int64)
        if n:
            starts[1:] = np.cumsum(counts)[:-1]
        self.starts = starts[self.has_choice]
        self.truncated = np.array([k == "truncated" for k in mdp.kinds], dtype=bool)

    def reduce(self, q: np.ndarray, quant: str) -> np.ndarray:
        """Per-state min or max of choice values; states without choices get 0."""
        out = np.zeros(self.n)
        if self.rows:
            f = np.minimum if quant == "min" else np.maximum
            out[self.has_choice] = f.reduceat(q, self.starts)
        return out


def _matrix(mdp: Mdp) -> _Matrix:
    m = mdp.__dict__.get("_matrix")
    if m is None or m.n != mdp.n:
        m = _Matrix(mdp)
        mdp.__dict__["_matrix"] = m
    return m


def _value_iteration(M: _Matrix, x0, fixed, quant, const=None, rows=None, tol=VI_TOLERANCE):
    """Least fixpoint of x = opt_c (P_c x + const_c) on non-fixed states.

    ``rows`` masks which choice rows use ``x`` (the others contribute only
    ``const``).  Jacobi updates, deterministic sweep order.
    """
    P = M.P if rows is None else sparse.diags(rows.astype(float)) @ M.P
    P = P.tocsr()
    c = np.zeros(M.rows) if const is None else const
    x = x0.copy()
    free = ~fixed
    if not free.any():
        return x
    for it in range(MAX_ITERATIONS):
        y = M.reduce(P @ x + c, quant)
        y = np.where(free, y, x)
        resid = float(np.max(np.abs(y - x))) if len(x) else 0.0
        x = y
        if resid < tol:
            return _polish(M, P, x, fixed, quant, c)
    raise NonConvergence(resid, MAX_ITERATIONS)


def _polish(M: _Matrix, P, x, fixed, quant, c):
    """Replace a converged iterate by the exact value of its greedy policy.

    The candidate is accepted only if it is a Bellman fixpoint (residual below
    1e-12); value iteration alone stalls at slowly mixing loops.
    """
    if not M.rows:
        return x
    q = P @ x + c
    best = M.reduce(q, quant)
    rows = np.arange(M.rows)
    is_best = np.abs(q - best[M.owner]) <= 1e-12
    pick = np.minimum.reduceat(np.where(is_best, rows, M.rows), M.starts)
    states = np.flatnonzero(M.has_choice)
    free = ~fixed
    choice = np.full(M.n, -1)
    choice[states] = pick
    idx = np.flatnonzero(free & (choice >= 0))
    if len(idx) == 0:
        return x
    Ps = P[choice[idx]]  # rows of the policy for free states
    b = c[choice[idx]] + Ps[:, ~free] @ x[~free]
    A = Ps[:, idx]
    # free states that cannot reach a positive payoff under the policy get 0
    k = len(idx)
    pos = np.flatnonzero(b > 0)
    alive = np.zeros(k, dtype=bool)
    if len(pos):
        src = sparse.csr_matrix((np.ones(len(pos)), (np.zeros(len(pos), dtype=np.int64), pos)), shape=(1, k))
        G = sparse.bmat([[A.T, None], [src, sparse.csr_matrix((1, 1))]]).tocsr()
        order = breadth_first_order(G, k, directed=True, return_predecessors=False)
        alive[order[order < k]] = True
    y = x.copy()
    y[idx[~alive]] = 0.0
    live = np.flatnonzero(alive)
    if len(live):
        Al = A[live][:, live]
        sysm = sparse.identity(len(live), format="csc") - Al.tocsc()
        try:
            sol = spsolve(sysm, b[live])
        except Exception:
            return x
        sol = np.atleast_1d(sol)
        if not np.all(np.isfinite(sol)):
            return x
        y[idx[live]] = np.clip(sol, 0.0, 1.0)
    check = M.reduce(P @ y + c, quant)
    check = np.where(free, check, y)
    if float(np.max(np.abs(check - y))) < 1e-12 and float(np.max(np.abs(y - x))) < 1e-6:
        return y
    return x


def _prob0(M: _Matrix, phi1, phi2, quant):
    """States with probability exactly 0 for ``phi1 U phi2`` under ``quant``."""
    n = M.n
    reach = phi2.copy()
    cand = phi1 & ~phi2
    Pc = M.P.tocsr()
    while True:
        hits = (Pc @ reach.astype(float)) > 0  # per choice: may reach R
        if quant == "max":
            ok = np.zeros(n, dtype=bool)
            if M.rows:
                np.logical_or.at(ok, M.owner, hits)
        else:
            ok = M.has_choice.copy()
            if M.rows:
                np.logical_and.at(ok, M.owner, hits)
        new = reach | (cand & ok)
        if (new == reach).all():
            return ~reach
        reach = new


# ---------------------------------------------------------------------------
# path probabilities


def path_probabilities(mdp: Mdp, path, quant: str, optimistic: bool, sets=None) -> np.ndarray:
    """Probability of ``path`` from every state.

    ``sets`` maps the immediate sub-formulas to boolean arrays; by default they
    are computed (lower sets when pessimistic, upper sets when optimistic).
    """
    M = _matrix(mdp)
    n = mdp.n
    trunc = M.truncated
    side = 1 if optimistic else 0

    def get(f):
        if sets is not None and f in sets:
            return sets[f]
        return _sat(mdp, f, {}, None)[side]

    if isinstance(path, Next):
        # next time unit: the state entered by the first tick
        target = get(path.arg).astype(float)
        const = np.where(M.tick, M.P @ target, 0.0)
        x0 = np.where(trunc, 1.0 if optimistic else 0.0, 0.0)
        return _value_iteration(M, x0, trunc | ~M.has_choice, quant, const=const, rows=~M.tick)
    if not isinstance(path, Until):
        raise TypeError(f"not a path formula: {path!r}")
    phi1, phi2 = get(path.left), get(path.right)
    goal = phi2.copy()
    dead = ~phi1 & ~phi2
    # truncated states that are still undecided take their bracket value
    open_trunc = trunc & phi1 & ~phi2
    if optimistic:
        goal |= open_trunc
    else:
        dead |= open_trunc
    if path.bound is None:
        zero = _prob0(M, phi1 & ~dead, goal, quant) | dead
        fixed = goal | zero
        x0 = goal.astype(float)
        return _value_iteration(M, x0, fixed, quant)
    # tick layers
    x = phi2.astype(float)
    if optimistic:
        x[open_trunc] = 0.0  # at layer 0 only the goal itself counts
    fixed = goal | dead
    in_layer = ~M.tick
    for _ in range(path.bound):
        const = np.where(M.tick, M.P @ x, 0.0)
        x0 = goal.astype(float)
        x = _value_iteration(M, x0, fixed, quant, const=const, rows=in_layer)
    return x


# ---------------------------------------------------------------------------
# state formulas


def _cmp(a, op, p, tol=CMP_TOLERANCE):
    if op == ">=":
        return a >= p - tol
    if op == ">":
        return a > p + tol
    if op == "<=":
        return a <= p + tol
    if op == "<":
        return a < p - tol
    raise ValueError(op)


@dataclass
class Bracket:
    """Per-state probability brackets of a ``P`` sub-formula."""

    pmin_lo: np.ndarray
    pmin_hi: np.ndarray
    pmax_lo: np.ndarray
    pmax_hi: np.ndarray


def _sat(mdp: Mdp, f, brackets: dict, quantifier):
    """(certainly, possibly) satisfying state masks of a state formula."""
    n = mdp.n
    if isinstance(f, TrueF):
        t = np.ones(n, dtype=bool)
        return t, t
    if isinstance(f, Atom):
        try:
            a = mdp.atom_index(f.expr)
        except KeyError as exc:
            raise UnregisteredAtom(str(exc)) from None
        m = np.zeros(n, dtype=bool)
        m[list(mdp.labels[a])] = True
        return m, m
    if isinstance(f, Not):
        lo, hi = _sat(mdp, f.arg, brackets, quantifier)
        return ~hi, ~lo
    if isinstance(f, And):
        l1, h1 = _sat(mdp, f.left, brackets, quantifier)
        l2, h2 = _sat(mdp, f.right, brackets, quantifier)
        return l1 & l2, h1 & h2
    if isinstance(f, Prob):
        path = f.path
        subs = [path.arg] if isinstance(path, Next) else [path.left, path.right]
        low_sets, high_sets = {}, {}
        for g in subs:
            lo, hi = _sat(mdp, g, brackets, quantifier)
            low_sets[g], high_sets[g] = lo, hi
        b = Bracket(
            path_probabilities(mdp, path, "min", False, low_sets),
            path_probabilities(mdp, path, "min", True, high_sets),
            path_probabilities(mdp, path, "max", False, low_sets),
            path_probabilities(mdp, path, "max", True, high_sets),
        )
        brackets[f] = b
        if f.op == "?":
            t = np.ones(n, dtype=bool)
            return t, t
        p = float(f.bound)
        op = "=" if f.op == "==" else f.op
        if op == "=":
            tol = CMP_TOLERANCE
            if quantifier is None:
                vals = [b.pmin_lo, b.pmin_hi, b.pmax_lo, b.pmax_hi]
                lo = np.all([np.abs(v - p) <= tol for v in vals], axis=0)
                hi = (b.pmin_lo <= p + tol) & (b.pmax_hi >= p - tol)
            else:
                a, z = (b.pmin_lo, b.pmin_hi) if quantifier == "min" else (b.pmax_lo, b.pmax_hi)
                lo = (np.abs(a - p) <= tol) & (np.abs(z - p) <= tol)
                hi = (a <= p + tol) & (z >= p - tol)
            return lo, hi
        quant = quantifier or ("max" if op in ("<", "<=") else "min")
        a, z = (b.pmin_lo, b.pmin_hi) if quant == "min" else (b.pmax_lo, b.pmax_hi)
        if op in (">", ">="):
            return _cmp(a, op, p), _cmp(z, op, p)
        return _cmp(z, op, p), _cmp(a, op, p)
    raise TypeError(f"not a state formula: {f!r}")


@dataclass
class CheckResult:
    formula: object
    verdict: bool | None  # None for P=? queries
    approximate: bool
    pmin: float | None = None  # pessimistic minimum at the initial state
    pmax: float | None = None  # optimistic maximum at the initial state
    bracket: tuple | None = None  # (pmin_lo, pmin_hi, pmax_lo, pmax_hi) at the initial state
    satisfying: frozenset = frozenset()
    possibly: frozenset = frozenset()
    brackets: dict = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        return {
            "formula": format_formula(self.formula),
            "verdict": self.verdict,
            "pmin": self.pmin,
            "pmax": self.pmax,
            "approximate": self.approximate,
        }

    def line(self) -> str:
        verdict = "value" if self.verdict is None else ("true" if self.verdict else "false")
        parts = [f"{format_formula(self.formula)}", verdict]
        if self.pmin is not None:
            parts.append(f"pmin={self.pmin:.12g}")
            parts.append(f"pmax={self.pmax:.12g}")
        if self.approximate:
            parts.append("approximate")
        return "  ".join(parts)


def _first_prob(f):
    if isinstance(f, Prob):
        return f
    for child in (getattr(f, "arg", None), getattr(f, "left", None), getattr(f, "right", None)):
        if child is not None:
            hit = _first_prob(child)
            if hit is not None:
                return hit
    return None


def check(mdp: Mdp, f, quantifier: str | None = None) -> CheckResult:
    """Check a state formula; atoms must have been registered on ``mdp``."""
    if quantifier not in (None, "min", "max"):
        raise ValueError(f"quantifier must be 'min' or 'max', not {quantifier!r}")
    for e in atoms(f):
        if e not in mdp.atoms:
            raise UnregisteredAtom(f"atom not registered at build time: {e!r}")
    brackets: dict = {}
    lo, hi = _sat(mdp, f, brackets, quantifier)
    i = mdp.initial
    top = _first_prob(f)
    res = CheckResult(
        formula=f,
        verdict=None if isinstance(f, Prob) and f.op == "?" else bool(lo[i]),
        approximate=bool(lo[i] != hi[i]),
        satisfying=frozenset(np.flatnonzero(lo).tolist()),
        possibly=frozenset(np.flatnonzero(hi).tolist()),
        brackets=brackets,
    )
    if top is not None:
        b = brackets[top]
        res.bracket = (float(b.pmin_lo[i]), float(b.pmin_hi[i]), float(b.pmax_lo[i]), float(b.pmax_hi[i]))
        if quantifier == "min":
            res.pmin, res.pmax = res.bracket[0], res.bracket[1]
        elif quantifier == "max":
            res.pmin, res.pmax = res.bracket[2], res.bracket[3]
        else:
            res.pmin, res.pmax = res.bracket[0], res.bracket[3]
        if res.verdict is None:
            res.approximate = bool(mdp.truncated()) and (
                abs(res.bracket[0] - res.bracket[1]) > CMP_TOLERANCE
                or abs(res.bracket[2] - res.bracket[3]) > CMP_TOLERANCE
            )
    return res


# ---------------------------------------------------------------------------
# exact oracle


def _exact(p) -> Fraction:
    return p if isinstance(p, Fraction) else Fraction(p)


def _oracle_sat(mdp: Mdp, f, truncated: str) -> list[bool]:
    n = mdp.n
    if isinstance(f, TrueF):
        return [True] * n
    if isinstance(f, Atom):
        a = mdp.atom_index(f.expr)
        return [s in mdp.labels[a] for s in range(n)]
    if isinstance(f, Not):
        return [not v for v in _oracle_sat(mdp, f.arg, truncated)]
    if isinstance(f, And):
        l, r = _oracle_sat(mdp, f.left, truncated), _oracle_sat(mdp, f.right, truncated)
        return [a and b for a, b in zip(l, r)]
    if isinstance(f, Prob):
        op = "=" if f.op == "==" else f.op
        p = _exact(f.bound)
        if op == "=":
            lo = _oracle_values(mdp, f.path, "min", truncated)
            hi = _oracle_values(mdp, f.path, "max", truncated)
            return [a == p and b == p for a, b in zip(lo, hi)]
        mode = "max" if op in ("<", "<=") else "min"
        vals = _oracle_values(mdp, f.path, mode, truncated)
        cmp = {">=": lambda a: a >= p, ">": lambda a: a > p, "<=": lambda a: a <= p, "<": lambda a: a < p}[op]
        return [cmp(v) for v in vals]
    raise TypeError(f)


def brute_force_prob(mdp: Mdp, path, mode: str, horizon: int | None = None, *,
                     truncated: str = "fail", max_states: int = 5000):
    """Exact probability (a ``Fraction``) of ``path`` at the initial state.

    ``horizon`` overrides the bound of an until formula.  Truncated states
    count as failure (``truncated="fail"``) or success (``"succeed"``).
    """
    if mdp.n > max_states:
        raise TooLarge(f"{mdp.n} states exceed the oracle limit of {max_states}")
    if horizon is not None and isinstance(path, Until):
        path = Until(path.left, path.right, horizon)
    return _oracle_values(mdp, path, mode, truncated)[mdp.initial]


def _opt(mode, values):
    return min(values) if mode == "min" else max(values)


def _oracle_values(mdp: Mdp, path, mode: str, truncated: str) -> list[Fraction]:
    n = mdp.n
    trunc_value = Fraction(1) if truncated == "succeed" else Fraction(0)
    is_trunc = [k == "truncated" for k in mdp.kinds]
    if isinstance(path, Next):
        tgt = _oracle_sat(mdp, path.arg, truncated)
        fixed = {s: (trunc_value if is_trunc[s] else Fraction(0)) for s in range(n) if not mdp.choices[s]}
        return _solve_layer(mdp, fixed, mode, tick_values=[Fraction(int(v)) for v in tgt])
    phi1 = _oracle_sat(mdp, path.left, truncated)
    phi2 = _oracle_sat(mdp, path.right, truncated)
    fixed: dict[int, Fraction] = {}
    for s in range(n):
        if phi2[s]:
            fixed[s] = Fraction(1)
        elif not phi1[s]:
            fixed[s] = Fraction(0)
        elif is_trunc[s]:
            fixed[s] = trunc_value
        elif not mdp.choices[s]:
            fixed[s] = Fraction(0)
    if path.bound is None:
        return _solve_layer(mdp, fixed, mode, tick_values=None)
    # layer 0: only the goal itself
    prev = [Fraction(1) if phi2[s] else Fraction(0) for s in range(n)]
    for _ in range(path.bound):
        prev = _solve_layer(mdp, fixed, mode, tick_values=prev)
    return prev


def _solve_layer(mdp: Mdp, fixed: dict, mode: str, tick_values):
    """Exact optimal reachability values where tick choices (if ``tick_values``
    is given) pay the previous layer's values instead of continuing."""
    n = mdp.n
    free = [s for s in range(n) if s not in fixed]

    def inner(ch):
        return tick_values is None or not ch.tick

    # edges within the layer among free states
    succ = {s: {t for ch in mdp.choices[s] if inner(ch) for t, _ in ch.transitions if t not in fixed} for s in free}
    order = _topological(free, succ)
    values = [fixed.get(s, Fraction(0)) for s in range(n)]

    def choice_value(ch, vals):
        tot = Fraction(0)
        for t, p in ch.transitions:
            v = tick_values[t] if not inner(ch) else vals[t]
            tot += _exact(p) * v
        return tot

    if order is not None:
        for s in reversed(order):
            values[s] = _opt(mode, [choice_value(ch, values) for ch in mdp.choices[s]])
        return values
    return _policy_iteration(mdp, free, fixed, mode, tick_values, values, choice_value, inner)


def _topological(nodes, succ):
    """Nodes in an order where every edge goes forward; None if there is a cycle."""
    indeg = {s: 0 for s in nodes}
    for s in nodes:
        for t in succ[s]:
            indeg[t] += 1
    ready = [s for s in nodes if indeg[s] == 0]
    out = []
    while ready:
        s = ready.pop()
        out.append(s)
        for t in succ[s]:
            indeg[t] -= 1
            if indeg[t] == 0:
                ready.append(t)
    return out if len(out) == len(nodes) else None


EXACT_SOLVE_LIMIT = 400


def _policy_iteration(mdp, free, fixed, mode, tick_values, values, choice_value, inner):
    zero = _oracle_prob0(mdp, free, fixed, mode, tick_values, inner)
    live = [s for s in free if s not in zero]
    for s in zero:
        values[s] = Fraction(0)
    if not live:
        return values
    exact = len(live) <= EXACT_SOLVE_LIMIT
    # large systems fall back to floating point; demand a visible improvement
    margin = Fraction(0) if exact else Fraction(1, 10**12)
    policy = {s: 0 for s in live}
    for _ in range(10_000):
        vals = _evaluate_policy(mdp, live, policy, values, tick_values, inner, exact)
        improved = False
        for s in live:
            best_k = policy[s]
            best = choice_value(mdp.choices[s][best_k], vals)
            for k, ch in enumerate(mdp.choices[s]):
                v = choice_value(ch, vals)
                if (mode == "max" and v > best + margin) or (mode == "min" and v < best - margin):
                    best_k, best = k, v
            if best_k != policy[s]:
                policy[s] = best_k
                improved = True
        values = vals
        if not improved:
            return values
    raise RuntimeError("policy iteration did not terminate")


def _oracle_prob0(mdp, free, fixed, mode, tick_values, inner):
    """Free states whose optimal value is 0.

    A state is positive if some choice (max) or every choice (min) has a
    successor that is positive.
    """

    def hits(ch, reach):
        for t, p in ch.transitions:
            if p == 0:
                continue
            if not inner(ch):
                if tick_values[t] > 0:
                    return True
            elif t in fixed:
                if fixed[t] > 0:
                    return True
            elif t in reach:
                return True
        return False

    quant = any if mode == "max" else all
    reach: set = set()
    changed = True
    while changed:
        changed = False
        for s in free:
            if s not in reach and quant(hits(ch, reach) for ch in mdp.choices[s]):
                reach.add(s)
                changed = True
    return [s for s in free if s not in reach]


def _evaluate_policy(mdp, live, policy, values, tick_values, inner, exact=True):
    """Solve x = P_policy x + b on ``live`` states (states outside are constants)."""
    vals = list(values)
    # under a fixed policy, live states that cannot reach a positive constant are 0
    live_set = set(live)
    rev: dict[int, set] = {s: set() for s in live}
    positive = set()
    for s in live:
        ch = mdp.choices[s][policy[s]]
        for t, p in ch.transitions:
            if p == 0:
                continue
            if not inner(ch):
                if tick_values[t] > 0:
                    positive.add(s)
            elif t in live_set:
                rev[t].add(s)
            elif vals[t] > 0:
                positive.add(s)
    reach, stack = set(positive), list(positive)
    while stack:
        t = stack.pop()
        for s in rev[t]:
            if s not in reach:
                reach.add(s)
                stack.append(s)
    for s in live:
        if s not in reach:
            vals[s] = Fraction(0)
    solve = [s for s in live if s in reach]
    if not solve:
        return vals
    idx = {s: k for k, s in enumerate(solve)}
    m = len(solve)
    A = [[Fraction(0)] * m for _ in range(m)]
    b = [Fraction(0)] * m
    for s in solve:
        r = idx[s]
        A[r][r] += 1
        ch = mdp.choices[s][policy[s]]
        for t, p in ch.transitions:
            p = _exact(p)
            if not inner(ch):
                b[r] += p * tick_values[t]
            elif t in idx:
                A[r][idx[t]] -= p
            else:
                b[r] += p * vals[t]
    if exact:
        x = _gauss(A, b)
    else:
        x = [Fraction(float(v)) for v in np.linalg.solve(np.array(A, dtype=float), np.array(b, dtype=float))]
    for s in solve:
        vals[s] = x[idx[s]]
    return vals


def _gauss(A, b):
    """Exact Gauss-Jordan elimination."""
    m = len(b)
    A = [row[:] + [b[i]] for i, row in enumerate(A)]
    for c in range(m):
        piv = next(r for r in range(c, m) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        row_c = A[c]
        inv = 1 / row_c[c]
        nz = [k for k in range(c, m + 1) if row_c[k] != 0]
        for r in range(m):
            row_r = A[r]
            if r != c and row_r[c] != 0:
                f = row_r[c] * inv
                for k in nz:
                    row_r[k] -= f * row_c[k]
    return [A[i][m] / A[i][i] for i in range(m)]
