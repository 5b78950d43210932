"""Parametric integer equation systems: AST, text format, pointwise semantics.

A system is a list of equations ``x = e0 \\/ e1 \\/ ... \\/ er`` where every
alternative is built from constants, parameters ``p`` / ``-p``, variables,
minimum ``/\\``, addition ``+``, the non-negativity test ``;`` and scaling
``c * e`` by a non-negative literal.  Equations are kept in normal form:
alternative 0 is always a constant (``-inf`` is prepended when needed).

File format::

    params p1, p2
    x = p1 \\/ (x + 1 /\\ p2)   # comment

One equation per line.  Precedence, loosest first: ``\\/`` (top level
only), ``/\\``, ``;`` (right associative), ``+``, ``*``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence, Union

from .extint import (
    NEG_INF,
    ExtInt,
    ext_add,
    ext_guard,
    ext_min,
    ext_scale,
    format_extint,
    is_finite,
)


class ParseError(ValueError):
    """Malformed input text; carries a 1-based line and column."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line else ""
        super().__init__(where + message)


# --------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Const:
    value: ExtInt


@dataclass(frozen=True)
class Param:
    index: int


@dataclass(frozen=True)
class NegParam:
    index: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Min:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Guard:
    test: "Expr"
    value: "Expr"


@dataclass(frozen=True)
class Scale:
    coeff: int
    arg: "Expr"

    def __post_init__(self):
        if self.coeff < 0:
            raise ValueError(f"negative scale coefficient {self.coeff}")


Expr = Union[Const, Param, NegParam, Var, Min, Add, Guard, Scale]


@dataclass(frozen=True)
class Equation:
    lhs: str
    alternatives: tuple[Expr, ...]

    @property
    def r(self) -> int:
        """Number of non-constant alternatives."""
        return len(self.alternatives) - 1


@dataclass(frozen=True)
class EquationSystem:
    params: tuple[str, ...]
    equations: tuple[Equation, ...]

    @property
    def k(self) -> int:
        return len(self.params)

    @property
    def n(self) -> int:
        return len(self.equations)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(eq.lhs for eq in self.equations)

    def equation(self, name: str) -> Equation:
        for eq in self.equations:
            if eq.lhs == name:
                return eq
        raise KeyError(name)

    def __str__(self) -> str:
        return format_system(self)


def normalize_alternatives(alts: Sequence[Expr]) -> tuple[Expr, ...]:
    alts = tuple(alts)
    if alts and isinstance(alts[0], Const):
        return alts
    return (Const(NEG_INF),) + alts


def make_system(params: Sequence[str], equations: Mapping[str, Sequence[Expr]] | Sequence[tuple[str, Sequence[Expr]]]) -> EquationSystem:
    """Build and validate a normalized system from ``(lhs, alternatives)`` pairs."""
    items = equations.items() if isinstance(equations, Mapping) else equations
    eqs = tuple(Equation(lhs, normalize_alternatives(alts)) for lhs, alts in items)
    system = EquationSystem(tuple(params), eqs)
    validate_system(system)
    return system


def validate_system(system: EquationSystem) -> None:
    names = [eq.lhs for eq in system.equations]
    seen: set[str] = set()
    for name in names:
        if name in seen:
            raise ParseError(f"duplicate definition of {name}")
        seen.add(name)
    if len(set(system.params)) != len(system.params):
        raise ParseError("duplicate parameter name")
    clash = seen & set(system.params)
    if clash:
        raise ParseError(f"name used as both parameter and variable: {sorted(clash)[0]}")
    for eq in system.equations:
        if not eq.alternatives or not isinstance(eq.alternatives[0], Const):
            raise ValueError(f"equation for {eq.lhs} is not in normal form")
        for alt in eq.alternatives:
            for node in walk(alt):
                if isinstance(node, Var) and node.name not in seen:
                    raise ParseError(f"undefined variable {node.name}")
                if isinstance(node, (Param, NegParam)) and not 0 <= node.index < system.k:
                    raise ParseError(f"parameter index {node.index} out of range")


def walk(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, (Min, Add)):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, Guard):
        yield from walk(e.test)
        yield from walk(e.value)
    elif isinstance(e, Scale):
        yield from walk(e.arg)


# ------------------------------------------------------------- semantics


def eval_pointwise(e: Expr, setting: Sequence[int], assign: Mapping[str, ExtInt]) -> ExtInt:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return assign[e.name]
    if isinstance(e, Param):
        return setting[e.index]
    if isinstance(e, NegParam):
        return -setting[e.index]
    if isinstance(e, Add):
        return ext_add(eval_pointwise(e.left, setting, assign), eval_pointwise(e.right, setting, assign))
    if isinstance(e, Min):
        return ext_min(eval_pointwise(e.left, setting, assign), eval_pointwise(e.right, setting, assign))
    if isinstance(e, Guard):
        return ext_guard(eval_pointwise(e.test, setting, assign), eval_pointwise(e.value, setting, assign))
    if isinstance(e, Scale):
        return ext_scale(e.coeff, eval_pointwise(e.arg, setting, assign))
    raise TypeError(f"not an expression: {e!r}")


def eval_rhs(eq: Equation, setting: Sequence[int], assign: Mapping[str, ExtInt]) -> ExtInt:
    return max(eval_pointwise(alt, setting, assign) for alt in eq.alternatives)


def substitute(e: Expr, setting: Sequence[int]) -> Expr:
    if isinstance(e, Param):
        return Const(setting[e.index])
    if isinstance(e, NegParam):
        return Const(-setting[e.index])
    if isinstance(e, Min):
        return Min(substitute(e.left, setting), substitute(e.right, setting))
    if isinstance(e, Add):
        return Add(substitute(e.left, setting), substitute(e.right, setting))
    if isinstance(e, Guard):
        return Guard(substitute(e.test, setting), substitute(e.value, setting))
    if isinstance(e, Scale):
        return Scale(e.coeff, substitute(e.arg, setting))
    return e


def instantiate(system: EquationSystem, setting: Sequence[int]) -> EquationSystem:
    """Replace every parameter by its value, yielding a system with ``k == 0``."""
    if len(setting) != system.k:
        raise ValueError(f"setting has {len(setting)} entries, system has {system.k} parameters")
    eqs = tuple(
        Equation(eq.lhs, tuple(substitute(alt, setting) for alt in eq.alternatives))
        for eq in system.equations
    )
    return EquationSystem((), eqs)


def is_solution(system: EquationSystem, setting: Sequence[int], assign: Mapping[str, ExtInt]) -> bool:
    return all(assign[eq.lhs] == eval_rhs(eq, setting, assign) for eq in system.equations)


# ---------------------------------------------------------- size measures


def expr_size(e: Expr) -> int:
    """Number of operator nodes (``/\\``, ``+``, ``;``, ``*``) in ``e``."""
    return sum(1 for node in walk(e) if isinstance(node, (Min, Add, Guard, Scale)))


def value_bound(system: EquationSystem) -> int:
    """``max(c, 2) ** (s * n) * a`` bounding every finite value in a least solution.

    ``a`` is the largest absolute finite constant (at least 1, so that the
    unit coefficients of parameters are covered), ``c`` the largest scale
    coefficient and ``s`` the largest operator count of a right-hand side.
    """
    a, c, s = 1, 0, 0
    for eq in system.equations:
        size = 0
        for alt in eq.alternatives:
            size += expr_size(alt)
            for node in walk(alt):
                if isinstance(node, Const) and is_finite(node.value):
                    a = max(a, abs(node.value))
                elif isinstance(node, Scale):
                    c = max(c, node.coeff)
        s = max(s, size)
    return max(c, 2) ** (s * system.n) * a


# ---------------------------------------------------------------- printing

# binding strength, loosest first
_PREC = {Min: 1, Guard: 2, Add: 3, Scale: 4}


def format_expr(e: Expr, params: Sequence[str] = ()) -> str:
    def name(i: int) -> str:
        return params[i] if i < len(params) else f"p{i + 1}"

    def go(e: Expr, ctx: int) -> str:
        if isinstance(e, Const):
            return format_extint(e.value)
        if isinstance(e, Var):
            return e.name
        if isinstance(e, Param):
            return name(e.index)
        if isinstance(e, NegParam):
            return "-" + name(e.index)
        prec = _PREC[type(e)]
        if isinstance(e, Min):
            text = f"{go(e.left, prec)} /\\ {go(e.right, prec + 1)}"
        elif isinstance(e, Add):
            text = f"{go(e.left, prec)} + {go(e.right, prec + 1)}"
        elif isinstance(e, Guard):
            # right associative
            text = f"{go(e.test, prec + 1)} ; {go(e.value, prec)}"
        else:
            text = f"{e.coeff} * {go(e.arg, prec)}"
        return f"({text})" if prec < ctx else text

    return go(e, 0)


def format_system(system: EquationSystem) -> str:
    lines = ["params " + ", ".join(system.params) if system.params else "params"]
    for eq in system.equations:
        rhs = " \\/ ".join(format_expr(alt, system.params) for alt in eq.alternatives)
        lines.append(f"{eq.lhs} = {rhs}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<num>-?\d+)
  | (?P<inf>-?inf\b)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>\\/|/\\|[;+*()=,-])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(line: str, lineno: int) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if not m:
            raise ParseError(f"unexpected character {line[pos]!r}", lineno, pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), lineno, pos + 1))
        pos = m.end()
    tokens.append(Token("eol", "", lineno, len(line) + 1))
    return tokens


class _ExprParser:
    def __init__(self, tokens: list[Token], params: Sequence[str]):
        self.tokens = tokens
        self.pos = 0
        self.params = {name: i for i, name in enumerate(params)}

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            raise self.error(f"expected {text!r}, found {tok.text or 'end of line'!r}", tok)
        return tok

    def rhs(self) -> list[Expr]:
        alts = [self.min_expr()]
        while self.peek().text == "\\/":
            self.next()
            alts.append(self.min_expr())
        if self.peek().kind != "eol":
            raise self.error(f"unexpected {self.peek().text!r}")
        return alts

    def min_expr(self) -> Expr:
        e = self.guard_expr()
        while self.peek().text == "/\\":
            self.next()
            e = Min(e, self.guard_expr())
        return e

    def guard_expr(self) -> Expr:
        e = self.add_expr()
        if self.peek().text == ";":
            self.next()
            return Guard(e, self.guard_expr())
        return e

    def add_expr(self) -> Expr:
        e = self.scale_expr()
        while self.peek().text == "+":
            self.next()
            e = Add(e, self.scale_expr())
        return e

    def scale_expr(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num" and self.tokens[self.pos + 1].text == "*":
            self.next()
            self.next()
            coeff = int(tok.text)
            if coeff < 0:
                raise self.error(f"negative scale coefficient {coeff}", tok)
            return Scale(coeff, self.scale_expr())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.next()
        if tok.kind == "num":
            return Const(int(tok.text))
        if tok.kind == "inf":
            return Const(NEG_INF if tok.text.startswith("-") else float("inf"))
        if tok.kind == "ident":
            if tok.text in self.params:
                return Param(self.params[tok.text])
            return Var(tok.text)
        if tok.text == "-":
            name = self.next()
            if name.kind != "ident" or name.text not in self.params:
                raise self.error("'-' may only negate a parameter", name)
            return NegParam(self.params[name.text])
        if tok.text == "(":
            e = self.min_expr()
            if self.peek().text == "\\/":
                raise self.error("'\\/' is only allowed at the top level of a right-hand side")
            self.expect(")")
            return e
        raise self.error(f"unexpected {tok.text or 'end of line'!r}", tok)


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def parse_params_line(line: str, lineno: int) -> list[str]:
    rest = line.strip()[len("params"):]
    names = [n.strip() for n in rest.split(",")] if rest.strip() else []
    for n in names:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", n):
            raise ParseError(f"bad parameter name {n!r}", lineno, 1)
    return names


def parse_expr(text: str, params: Sequence[str] = ()) -> Expr:
    p = _ExprParser(tokenize(text, 1), params)
    e = p.min_expr()
    if p.peek().kind != "eol":
        raise p.error(f"unexpected {p.peek().text!r}")
    return e


def parse_system(text: str) -> EquationSystem:
    """Parse the equation file format into a normalized, validated system."""
    params: list[str] | None = None
    equations: list[tuple[str, list[Expr], int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        if params is None:
            if re.match(r"\s*params\b", line):
                params = parse_params_line(line, lineno)
                continue
            params = []
        tokens = tokenize(line, lineno)
        if tokens[0].kind != "ident" or tokens[1].text != "=":
            raise ParseError("expected '<variable> = <expression>'", lineno, tokens[0].col)
        parser = _ExprParser(tokens, params)
        parser.pos = 2
        equations.append((tokens[0].text, parser.rhs(), lineno))
    params = params or []
    seen: dict[str, int] = {}
    for lhs, _, lineno in equations:
        if lhs in seen:
            raise ParseError(f"duplicate definition of {lhs}", lineno, 1)
        if lhs in params:
            raise ParseError(f"{lhs} is declared as a parameter", lineno, 1)
        seen[lhs] = lineno
    for lhs, alts, lineno in equations:
        for alt in alts:
            for node in walk(alt):
                if isinstance(node, Var) and node.name not in seen:
                    raise ParseError(f"undefined variable {node.name}", lineno, 1)
    return make_system(params, [(lhs, alts) for lhs, alts, _ in equations])
