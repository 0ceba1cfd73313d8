"""PALPS: a process algebra for spatially distributed populations.

Models are parsed from ``.palps`` files, executed under a probabilistic
operational semantics, explored into Markov decision processes and checked
against PCTL properties or estimated by simulation.
"""

from .parser import ParseError, parse_formula, parse_formula_file, parse_model, pretty
from .pctl import CheckResult, brute_force_prob, check
from .semantics import Configuration, Interpreter, canonicalize, close_channels, initial_configuration
from .simulator import Estimate, Scheduler, Simulator, estimate, run
from .statespace import BuildReport, ExploreOptions, Mdp, build, export
from .wellformed import check_wellformed, lint

__all__ = [
    "BuildReport",
    "CheckResult",
    "Configuration",
    "Estimate",
    "ExploreOptions",
    "Interpreter",
    "Mdp",
    "ParseError",
    "Scheduler",
    "Simulator",
    "brute_force_prob",
    "build",
    "canonicalize",
    "check",
    "check_wellformed",
    "close_channels",
    "estimate",
    "export",
    "initial_configuration",
    "lint",
    "parse_formula",
    "parse_formula_file",
    "parse_model",
    "pretty",
    "run",
]
