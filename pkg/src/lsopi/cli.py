"""Command-line front end: ``lsopi check|oracle|bracket FILE``.

System files are YAML mappings::

    name: chained form
    states: [x1, x2, x3, x4]
    f:  ["0", "0", "0", "0"]
    g1: ["1", "x3", "x4", "0"]
    g2: ["0", "0", "0", "1"]

or, for a system that is not affine in the inputs, ``controls: [u1, u2]`` and
``F: [...]`` with one right-hand side per state.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import yaml

from .engine import ClassificationError, ProlongationError, Verdict, affinize, run_lsopi
from .funlinalg import FunMatrix, GenericityError, Sampler, generic_rank
from .geometry import ControlAffineSystem, VectorField, lie_bracket
from .symcore import ExprSyntaxError, ZeroDenominatorError, parse_expr

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_PARSE = 2
EXIT_GENERICITY = 3

DEFAULT_SEED = 42
DEFAULT_SAMPLES = 5


class SpecError(ValueError):
    """Invalid system file; the message carries ``path:line:col``."""


@dataclass
class _Loc:
    path: str
    line: int
    col: int

    def __str__(self):
        return f"{self.path}:{self.line}:{self.col}"


def _loc(path, node) -> _Loc:
    m = node.start_mark
    return _Loc(str(path), m.line + 1, m.column + 1)


def _mapping(node) -> dict:
    return {k.value: v for k, v in node.value}


def _strings(path, node, key: str) -> list[tuple[str, _Loc]]:
    if not isinstance(node, yaml.SequenceNode):
        raise SpecError(f"{_loc(path, node)}: '{key}' must be a list")
    out = []
    for item in node.value:
        if not isinstance(item, yaml.ScalarNode):
            raise SpecError(f"{_loc(path, item)}: entries of '{key}' must be scalars")
        out.append((str(item.value), _loc(path, item)))
    return out


def _parse_all(items, vars, key):
    exprs = []
    for i, (text, where) in enumerate(items):
        try:
            exprs.append(parse_expr(text, vars))
        except ExprSyntaxError as exc:
            raise SpecError(f"{where}: {key}[{i}]: {exc}") from None
        except ZeroDenominatorError as exc:
            raise SpecError(f"{where}: {key}[{i}]: {exc}") from None
    return exprs


def parse_system_text(text: str, path: str = "<string>") -> ControlAffineSystem:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise SpecError(f"{path}: {exc}") from None
    if not isinstance(root, yaml.MappingNode):
        raise SpecError(f"{path}:1:1: expected a mapping at the top level")
    top = _mapping(root)
    name = top["name"].value if "name" in top else Path(path).stem
    if "states" not in top:
        raise SpecError(f"{_loc(path, root)}: missing 'states'")
    states = [s for s, _ in _strings(path, top["states"], "states")]
    if len(set(states)) != len(states):
        raise SpecError(f"{_loc(path, top['states'])}: duplicate state names")

    if "F" in top:
        if "controls" not in top:
            raise SpecError(f"{_loc(path, top['F'])}: 'F' needs 'controls'")
        controls = [s for s, _ in _strings(path, top["controls"], "controls")]
        if len(controls) != 2:
            raise SpecError(f"{_loc(path, top['controls'])}: exactly two controls are supported")
        items = _strings(path, top["F"], "F")
        if len(items) != len(states):
            raise SpecError(f"{_loc(path, top['F'])}: 'F' has {len(items)} entries for {len(states)} states")
        F = _parse_all(items, tuple(states) + tuple(controls), "F")
        try:
            return affinize(states, controls, F, name=name)
        except ValueError as exc:
            raise SpecError(f"{_loc(path, top['F'])}: {exc}") from None

    fields = {}
    for key in ("f", "g1", "g2"):
        if key not in top:
            raise SpecError(f"{_loc(path, root)}: missing '{key}'")
        items = _strings(path, top[key], key)
        if len(items) != len(states):
            raise SpecError(f"{_loc(path, top[key])}: '{key}' has {len(items)} entries for {len(states)} states")
        fields[key] = VectorField(_parse_all(items, states, key), states)
    system = ControlAffineSystem(tuple(states), fields["f"], fields["g1"], fields["g2"], name=name)
    cols = FunMatrix.from_columns([system.g1.comps, system.g2.comps], system.n, system.states)
    if generic_rank(cols) != 2:
        raise SpecError(f"{_loc(path, top['g2'])}: g1 and g2 are linearly dependent")
    return system


def parse_system(path) -> ControlAffineSystem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"{path}: {exc.strerror}") from None
    return parse_system_text(text, str(path))


def report_dict(verdict: Verdict, seed: int, samples: int, system: ControlAffineSystem, trace: bool = False) -> dict:
    out = verdict.to_dict()
    out["system"] = system.name
    out["seed"] = seed
    out["samples"] = samples
    if trace:
        out["systems"] = [dict(s.describe(), lineage=list(s.lineage)) for s in verdict.systems]
    return out


def emit_report(report: dict, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode()
    return render_table(report).encode()


def render_table(report: dict) -> str:
    head = f"{report['system']}: {report['verdict']}"
    if report["ell"] is not None:
        head += f" (ell = {report['ell']})"
    if not report["conclusive"]:
        head += " [non-conclusive]"
    lines = [head]
    if report["reason"]:
        lines.append(f"reason: {report['reason']}")
    cols = ("step", "n", "k", "case", "r", "growth", "ranks", "prolonged")
    rows = []
    for s in report["steps"]:
        rows.append((
            str(s["index"]), str(s["n"]), "-" if s["k"] is None else str(s["k"]), s["case"],
            "-" if s["r"] is None else str(s["r"]),
            ",".join(map(str, s["growth_vector"])) or "-",
            ",".join(map(str, s["ranks"])),
            s["prolonged_control"] or "-",
        ))
    widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(cols)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines.append(fmt.format(*cols))
    for s, row in zip(report["steps"], rows):
        lines.append(fmt.format(*row).rstrip())
        for note in s["notes"]:
            lines.append(f"    {note}")
        if s["H_generators"]:
            for g in s["H_generators"]:
                lines.append(f"    H: [{', '.join(g)}]")
    for i, sysd in enumerate(report.get("systems", [])):
        lines.append(f"system {i}: states {', '.join(sysd['states'])}")
        for key in ("f", "g1", "g2"):
            lines.append(f"  {key} = [{', '.join(sysd[key])}]")
        for entry in sysd["lineage"]:
            lines.append(f"  {entry}")
    return "\n".join(lines) + "\n"


def _field(system: ControlAffineSystem, text: str) -> VectorField:
    if text in ("f", "g1", "g2"):
        return getattr(system, text)
    comps = [c.strip() for c in text.split(";")]
    if len(comps) != system.n:
        raise SpecError(f"vector field '{text}' needs {system.n} ';'-separated components")
    try:
        return VectorField.parse(comps, system.states)
    except ExprSyntaxError as exc:
        raise SpecError(f"vector field '{text}': {exc}") from None


def _default_seed() -> int:
    env = os.environ.get("LSOPI_SEED")
    if env is None:
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise SpecError(f"LSOPI_SEED must be an integer, got {env!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lsopi", description="Linearization by successive one-fold prolongations.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="run the decision procedure")
    c.add_argument("file")
    c.add_argument("--json", action="store_true", help="machine-readable report")
    c.add_argument("--trace", action="store_true", help="include every intermediate system")
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    c.add_argument("--max-steps", type=int, default=None)

    o = sub.add_parser("oracle", help="brute-force search over raw-input prolongations")
    o.add_argument("file")
    o.add_argument("--depth", type=int, default=3)

    b = sub.add_parser("bracket", help="print a Lie bracket")
    b.add_argument("file")
    b.add_argument("--with", dest="pair", nargs=2, metavar=("V", "W"), required=True,
                   help="f, g1, g2 or ';'-separated components")
    return p


def _check(args, out) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    system = parse_system(args.file)
    verdict = run_lsopi(system, max_steps=args.max_steps, smp=Sampler(seed=seed, samples=args.samples))
    report = report_dict(verdict, seed, args.samples, system, trace=args.trace)
    out.write(emit_report(report, "json" if args.json else "text"))
    return EXIT_OK


def _oracle(args, out) -> int:
    from .oracle import brute_force_lsop

    if not 0 <= args.depth <= 4:
        raise SpecError("depth must be between 0 and 4")
    system = parse_system(args.file)
    w = brute_force_lsop(system, args.depth)
    if w is None:
        out.write(f"no raw-input prolongation sequence up to depth {args.depth} is static feedback linearizable\n".encode())
        return EXIT_OK
    seq = " ".join(f"u{i}" for i in w.controls()) or "(none)"
    out.write(f"static feedback linearizable after {len(w)} prolongation(s): {seq}; rho = {w.rho}\n".encode())
    return EXIT_OK


def _bracket(args, out) -> int:
    system = parse_system(args.file)
    V, W = (_field(system, t) for t in args.pair)
    out.write(("[" + ", ".join(lie_bracket(V, W).to_strings()) + "]\n").encode())
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = sys.stdout.buffer
    handler = {"check": _check, "oracle": _oracle, "bracket": _bracket}[args.command]
    try:
        code = handler(args, out)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except GenericityError as exc:
        print(f"genericity failure: {exc}", file=sys.stderr)
        return EXIT_GENERICITY
    except (ProlongationError, ClassificationError) as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    out.flush()
    return code


if __name__ == "__main__":
    raise SystemExit(main())
