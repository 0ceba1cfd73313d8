"""Exhaustive per-step audit of the compatibility and conservation invariants."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from palps.environment import EnvironmentUndefined, env_of, merge
from palps.semantics import Configuration, Interpreter, close_channels, initial_configuration


@dataclass
class Audit:
    transitions: int = 0
    states: int = 0
    fanouts: int = 0
    compat_violations: list = field(default_factory=list)
    mass_violations: list = field(default_factory=list)
    mixed: int = 0
    worst_mass_error: float = 0.0

    def add(self, other: "Audit") -> None:
        self.transitions += other.transitions
        self.states += other.states
        self.fanouts += other.fanouts
        self.compat_violations += other.compat_violations
        self.mass_violations += other.mass_violations
        self.mixed += other.mixed
        self.worst_mass_error = max(self.worst_mass_error, other.worst_mass_error)


def audit_model(model, max_states: int) -> Audit:
    """BFS over at most ``max_states`` configurations, checking every raw step.

    The interpreter's own compatibility assertion is switched off so that a
    violation is counted here rather than raised.
    """
    m = close_channels(model)
    interp = Interpreter(m, check_compat=False)
    init = initial_configuration(m)
    seen = {init}
    queue = deque([init])
    out = Audit()
    while queue and out.states < max_states:
        c = queue.popleft()
        out.states += 1
        fan = interp.system_steps(c.env, c.system)
        if fan.kind == "probabilistic":
            out.fanouts += 1
            total = sum(st.weight for st in fan.steps)
            err = abs(float(total) - 1.0)
            out.worst_mass_error = max(out.worst_mass_error, err)
            if err > 1e-9 or any(not (0 < st.weight <= 1) for st in fan.steps):
                out.mass_violations.append((c.key, total))
            if any(st.label is not None for st in fan.steps):
                out.mixed += 1
        elif any(st.label is None for st in fan.steps):
            out.mixed += 1
        for st in fan.steps:
            out.transitions += 1
            try:
                env = merge(c.env, [st.delta])
            except EnvironmentUndefined as exc:
                out.compat_violations.append((c.key, str(exc)))
                continue
            if env_of(st.target) != env:
                out.compat_violations.append((c.key, st.note))
                continue
            nxt = Configuration(env, st.target)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return out
