"""Regenerate ``corpus/tiny_*.expected.json`` from the exact oracle."""

from __future__ import annotations

import json

from palps.corpus import corpus_list
from palps.pctl import _first_prob, brute_force_prob
from palps.pctl_syntax import atoms
from palps.statespace import ExploreOptions, build

DEPTH = {"tiny_dispersal": 8}


def main() -> None:
    for entry in corpus_list():
        if not entry.name.startswith("tiny_") or entry.property_path is None:
            continue
        model = entry.load()
        lines = entry.property_path.read_text(encoding="utf-8")
        from palps.parser import parse_formula_file

        formulas = parse_formula_file(lines, model)
        opts = ExploreOptions(max_depth=DEPTH.get(entry.name))
        mdp, report = build(model, [a for _, f in formulas for a in atoms(f)], opts)
        values = {}
        for text, f in formulas:
            path = _first_prob(f).path
            values[text] = {
                q: str(brute_force_prob(mdp, path, q, truncated="fail")) for q in ("min", "max")
            }
            if report.truncated:
                for q in ("min", "max"):
                    hi = brute_force_prob(mdp, path, q, truncated="succeed")
                    assert str(hi) == values[text][q], (entry.name, text, q)
        out = {"max_depth": opts.max_depth, "states": report.states, "values": values}
        path = entry.model_path.with_name(entry.name + ".expected.json")
        path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(path.name, report.states)


if __name__ == "__main__":
    main()
