"""Command-line interface.

Subcommands::

    psiter solve FILE      least parametric solution of an equation file
    psiter analyze FILE    compile a program to interval equations and solve
    psiter eval FILE --at p1=5,p2=3
    psiter check FILE --grid -5..5
    psiter gen exp --m 3

Exit codes: 1 input/parse error, 2 unsatisfiable assumption, 3 exact
satisfiability check exceeded its branch limit, 4 setting outside the
assumption, 5 oracle check found a mismatch.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path
from typing import Sequence

from .eqsys import EquationSystem, ParseError, format_system, parse_system
from .extint import NEG_INF, POS_INF, format_extint
from .frontend import compile_program, lower_name, parse_program, upper_name
from .generators import exp_family_text
from .linear import LinIneq, parse_constraint
from .partition import (
    EmptyAssumption,
    OutsideAssumption,
    format_pretty,
    format_regions,
)
from .psi import PSIResult, check_solution, grid, psi_solve
from .sat import SatLimitError

log = logging.getLogger(__name__)

EXIT_PARSE = 1
EXIT_EMPTY = 2
EXIT_SAT_LIMIT = 3
EXIT_OUTSIDE = 4
EXIT_MISMATCH = 5


class UsageError(ValueError):
    pass


# ------------------------------------------------------------ assumptions


_BOOL_RE = re.compile(r"\s*(\\/|/\\|\(|\))")


def _bool_tokens(text: str) -> list[str]:
    out = []
    pos = 0
    buf = ""
    while pos < len(text):
        m = _BOOL_RE.match(text, pos)
        if m:
            if buf.strip():
                out.append(buf.strip())
            buf = ""
            out.append(m.group(1))
            pos = m.end()
        else:
            buf += text[pos]
            pos += 1
    if buf.strip():
        out.append(buf.strip())
    return out


def parse_assumption(text: str, names: Sequence[str]) -> list[list[LinIneq]]:
    """Disjunctive normal form of a boolean combination of linear constraints.

    ``/\\`` binds tighter than ``\\/``; parentheses group.  Constant-false
    disjuncts are dropped, so an empty list means the assumption is false.
    """
    toks = _bool_tokens(text)
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else None

    def disj() -> list[list]:
        nonlocal pos
        out = conj()
        while peek() == "\\/":
            pos += 1
            out = out + conj()
        return out

    def conj() -> list[list]:
        nonlocal pos
        out = atom()
        while peek() == "/\\":
            pos += 1
            rhs = atom()
            out = [a + b for a in out for b in rhs]
        return out

    def atom() -> list[list]:
        nonlocal pos
        t = peek()
        if t is None:
            raise UsageError("incomplete assumption")
        pos += 1
        if t == "(":
            out = disj()
            if peek() != ")":
                raise UsageError("missing ')' in assumption")
            pos += 1
            return out
        if t in ("\\/", "/\\", ")"):
            raise UsageError(f"unexpected {t!r} in assumption")
        try:
            cons = parse_constraint(t, names)
        except ValueError as e:
            raise UsageError(f"bad assumption constraint {t!r}: {e}") from e
        if any(c is False for c in cons):
            return []
        return [[c for c in cons if c is not True]]

    result = disj()
    if pos != len(toks):
        raise UsageError(f"unexpected {toks[pos]!r} in assumption")
    return result


def parse_setting(text: str, names: Sequence[str]) -> tuple[int, ...]:
    values: dict[str, int] = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise UsageError(f"expected name=value, got {part!r}")
        name, value = (s.strip() for s in part.split("=", 1))
        if name not in names:
            raise UsageError(f"unknown parameter {name!r}")
        try:
            values[name] = int(value)
        except ValueError as e:
            raise UsageError(f"parameter {name} needs an integer value") from e
    missing = [n for n in names if n not in values]
    if missing:
        raise UsageError(f"missing values for {', '.join(missing)}")
    return tuple(values[n] for n in names)


def parse_grid(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*", text)
    if not m:
        raise UsageError(f"grid must look like lo..hi, got {text!r}")
    lo, hi = int(m.group(1)), int(m.group(2))
    if lo > hi:
        raise UsageError("empty grid range")
    return lo, hi


# -------------------------------------------------------------- pipeline


def load(path: str, program: bool):
    """``(system, is_program)`` from an equation or program file."""
    text = Path(path).read_text(encoding="utf-8")
    if program:
        system, _ = compile_program(parse_program(text))
        return system, True
    return parse_system(text), False


def solve_all(system: EquationSystem, args) -> list[tuple[list[LinIneq], PSIResult]]:
    disjuncts = parse_assumption(args.assume, system.params) if args.assume else [[]]
    out = []
    for cons in disjuncts:
        try:
            res = psi_solve(system, cons, repr=args.repr, sat_mode=args.sat, validate=args.validate)
        except EmptyAssumption:
            log.info("skipping empty disjunct %s", [str(c) for c in cons])
            continue
        out.append((cons, res))
    if not out:
        raise EmptyAssumption("assumption admits no integer parameter setting")
    return out


def render(system: EquationSystem, cons: list[LinIneq], res: PSIResult, fmt: str) -> list[str]:
    names = system.params
    space = res.space
    lines = []
    for x in system.variables:
        part = res.assignment[x]
        if fmt == "pretty":
            lines.append(f"{x}: {format_pretty(space.to_tree(part), names)}")
        else:
            lines.append(f"{x}:")
            regs = [(list(cons) + r, v) for r, v in space.regions(part)]
            lines.extend("  " + line for line in format_regions(regs, names))
    return lines


def _interval(m, p) -> str:
    if m == NEG_INF or p == NEG_INF:
        return "empty"
    lo = format_extint(-m) if m != POS_INF else "-inf"
    return f"[{lo}, {format_extint(p)}]"


def _program_points(system: EquationSystem) -> list[tuple[str, int]]:
    seen = []
    for x in system.variables:
        m = re.fullmatch(r"(.+)_(\d+)m", x)
        if m:
            seen.append((m.group(1), int(m.group(2))))
    return seen


# -------------------------------------------------------------- commands


def cmd_solve(args, out) -> int:
    system, _ = load(args.file, args.program or args.command == "analyze" or args.file.endswith(".prog"))
    results = solve_all(system, args)
    for cons, res in results:
        if len(results) > 1 or cons:
            out.write("# assuming " + (" /\\ ".join(str(c) for c in cons) or "true") + "\n")
        for line in render(system, cons, res, args.format):
            out.write(line + "\n")
        if args.stats:
            for line in res.stats.lines():
                out.write(f"# {line}\n")
    return 0


def cmd_eval(args, out) -> int:
    is_prog = args.program or args.file.endswith(".prog")
    system, _ = load(args.file, is_prog)
    point = parse_setting(args.at, system.params)
    results = solve_all(system, args)
    for _, res in results:
        if res.space.in_assumption(point):
            break
    else:
        raise OutsideAssumption(f"{dict(zip(system.params, point))} is outside the assumption")
    values = res.values(point)
    for x in system.variables:
        out.write(f"{x} = {format_extint(values[x])}\n")
    if is_prog:
        for var, u in _program_points(system):
            out.write(f"{var}@{u}: {_interval(values[lower_name(var, u)], values[upper_name(var, u)])}\n")
    return 0


def cmd_check(args, out) -> int:
    system, _ = load(args.file, args.program or args.file.endswith(".prog"))
    lo, hi = parse_grid(args.grid)
    results = solve_all(system, args)
    checked = matched = 0
    first = None
    for _, res in results:
        report = check_solution(system, res.assignment, grid(lo, hi, system.k), res.space)
        checked += report.checked
        matched += report.checked - len({m[0] for m in report.mismatches})
        if report.mismatches and first is None:
            first = report.mismatches[0]
    line = f"{matched}/{checked} settings match"
    if first is not None:
        p, x, got, want = first
        line += f"; first mismatch at {p}: {x} = {format_extint(got)}, expected {format_extint(want)}"
    out.write(line + "\n")
    out.write("PASS\n" if first is None else "FAIL\n")
    return 0 if first is None else EXIT_MISMATCH


def cmd_gen(args, out) -> int:
    if args.m < 0:
        raise UsageError("--m must be non-negative")
    out.write(exp_family_text(args.m))
    return 0


def cmd_compile(args, out) -> int:
    system, _ = load(args.file, True)
    out.write(format_system(system))
    return 0


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the parse-error code; argparse's own 2 means an empty assumption here."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _ArgumentParser(prog="psiter", description="Exact least solutions of parametric integer equation systems.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp, with_format=True):
        sp.add_argument("file")
        sp.add_argument("--program", action="store_true", help="treat FILE as a program (implied by .prog)")
        sp.add_argument("--assume", help=r"parameter assumption, e.g. '0 <= p1 /\ p1 <= p2'")
        sp.add_argument("--sat", choices=("fm", "exact"), default="exact", help="check used for the final purge")
        sp.add_argument("--repr", choices=("auto", "tree", "list"), default="auto")
        sp.add_argument("--validate", action="store_true", help="check partition invariants and value bounds")
        if with_format:
            sp.add_argument("--format", choices=("pretty", "regions"), default="pretty")
            sp.add_argument("--stats", action="store_true")

    sp = sub.add_parser("solve", help="solve an equation file")
    solver_flags(sp)
    sp.set_defaults(func=cmd_solve)
    sp = sub.add_parser("analyze", help="compile a program and solve its interval equations")
    solver_flags(sp)
    sp.set_defaults(func=cmd_solve)
    sp = sub.add_parser("eval", help="evaluate the solution at a parameter setting")
    solver_flags(sp, with_format=False)
    sp.add_argument("--at", required=True, help="setting such as p1=5,p2=3")
    sp.set_defaults(func=cmd_eval)
    sp = sub.add_parser("check", help="compare with the non-parametric solver on a grid")
    solver_flags(sp, with_format=False)
    sp.add_argument("--grid", required=True, help="range lo..hi for every parameter")
    sp.set_defaults(func=cmd_check)
    sp = sub.add_parser("compile", help="print the interval equations of a program")
    sp.add_argument("file")
    sp.set_defaults(func=cmd_compile)
    sp = sub.add_parser("gen", help="generate a benchmark family")
    sp.add_argument("family", choices=("exp",))
    sp.add_argument("--m", type=int, required=True)
    sp.set_defaults(func=cmd_gen)
    return p


_VALUE_FLAGS = ("--grid", "--at", "--assume")


def _join_dash_values(argv: list[str]) -> list[str]:
    """Turn ``--grid -5..5`` into ``--grid=-5..5`` so argparse does not read the value as a flag."""
    out = []
    i = 0
    while i < len(argv):
        if argv[i] in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(_join_dash_values(sys.argv[1:] if argv is None else list(argv)))
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except (ParseError, UsageError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except EmptyAssumption as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EMPTY
    except SatLimitError as e:
        print(f"error: exact check infeasible: {e}", file=sys.stderr)
        return EXIT_SAT_LIMIT
    except OutsideAssumption as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_OUTSIDE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
