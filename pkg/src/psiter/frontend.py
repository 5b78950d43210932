"""Compile small parameterized programs into interval equations.

Language (one statement per ``;``, blocks in braces, ``#`` comments)::

    params p1, p2
    x = p1;
    while (x < p2) { x = x + 1; }
    if (x >= 0) { y = 2 * x; } else { y = -p1 + 3; }

Right-hand sides are integer-affine in the parameters, optionally plus one
variable with a non-negative coefficient (``y``, ``y + g``, ``c * y + g``).
Conditions compare a variable against a parameter expression with
``< <= > >=``.

For each program point ``u`` and variable ``x`` the compiler introduces
``x_{u}m`` (the negated lower bound) and ``x_{u}p`` (the upper bound), so
the interval at ``u`` is ``[-x_{u}m, x_{u}p]`` and unreachable points get
``-inf`` for both.  Point 0 is the program entry, where every variable
ranges over all integers; it has no unknowns of its own.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

from .eqsys import (
    Add,
    Const,
    EquationSystem,
    Expr,
    Guard,
    Min,
    NegParam,
    Param,
    ParseError,
    Scale,
    Var,
    make_system,
)
from .extint import NEG_INF, POS_INF

log = logging.getLogger(__name__)

# ------------------------------------------------------------------- AST


@dataclass(frozen=True)
class ParamExpr:
    """``const + sum(coeffs[i] * p_i)``."""

    const: int
    coeffs: tuple[int, ...]

    def negate(self) -> "ParamExpr":
        return ParamExpr(-self.const, tuple(-a for a in self.coeffs))

    def shift(self, d: int) -> "ParamExpr":
        return ParamExpr(self.const + d, self.coeffs)

    def __call__(self, point: Sequence[int]) -> int:
        return self.const + sum(a * p for a, p in zip(self.coeffs, point))


@dataclass(frozen=True)
class Assign:
    target: str
    # value = coeff * source + offset; source is None for a pure parameter expression
    source: str | None
    coeff: int
    offset: ParamExpr
    line: int = 0


@dataclass(frozen=True)
class Cond:
    var: str
    op: str
    bound: ParamExpr


@dataclass(frozen=True)
class While:
    cond: Cond
    body: tuple["Stmt", ...]


@dataclass(frozen=True)
class If:
    cond: Cond
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...]


Stmt = Union[Assign, While, If]


@dataclass(frozen=True)
class Program:
    params: tuple[str, ...]
    body: tuple[Stmt, ...]

    @property
    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}

        def visit(stmts):
            for s in stmts:
                if isinstance(s, Assign):
                    seen.setdefault(s.target)
                elif isinstance(s, While):
                    visit(s.body)
                else:
                    visit(s.then)
                    visit(s.orelse)

        visit(self.body)
        return tuple(seen)


# ---------------------------------------------------------------- parser

_TOK_RE = re.compile(r"\s*(?:(#[^\n]*)|(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(<=|>=|==|[<>=;{}()+\-*,]))")


@dataclass
class _Tok:
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def where(p: int) -> tuple[int, int]:
        import bisect

        ln = bisect.bisect_right(line_starts, p) - 1
        return ln + 1, p - line_starts[ln] + 1

    while True:
        m = _TOK_RE.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:]
            if rest.strip():
                ln, col = where(pos + len(rest) - len(rest.lstrip()))
                raise ParseError(f"unexpected character {rest.strip()[0]!r}", ln, col)
            break
        pos = m.end()
        if m.group(1):
            continue
        tok = m.group(2) or m.group(3) or m.group(4)
        start = m.start(2) if m.group(2) else m.start(3) if m.group(3) else m.start(4)
        toks.append(_Tok(tok, *where(start)))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok], params: list[str]):
        self.toks = toks
        self.i = 0
        self.params = params

    def peek(self, off: int = 0) -> str | None:
        j = self.i + off
        return self.toks[j].text if j < len(self.toks) else None

    def error(self, msg: str):
        if self.i < len(self.toks):
            t = self.toks[self.i]
            raise ParseError(msg, t.line, t.col)
        last = self.toks[-1] if self.toks else _Tok("", 1, 1)
        raise ParseError(msg + " at end of input", last.line, last.col)

    def take(self, expected: str | None = None) -> str:
        t = self.peek()
        if t is None or (expected is not None and t != expected):
            self.error(f"expected {expected!r}" if expected else "unexpected end of input")
        self.i += 1
        return t

    def block(self) -> tuple[Stmt, ...]:
        self.take("{")
        out = []
        while self.peek() != "}":
            if self.peek() is None:
                self.error("missing '}'")
            out.append(self.stmt())
        self.take("}")
        return tuple(out)

    def stmt(self) -> Stmt:
        t = self.peek()
        if t == "while":
            self.take()
            cond = self.cond()
            return While(cond, self.block())
        if t == "if":
            self.take()
            cond = self.cond()
            then = self.block()
            orelse: tuple[Stmt, ...] = ()
            if self.peek() == "else":
                self.take()
                orelse = self.block()
            return If(cond, then, orelse)
        line = self.toks[self.i].line if self.i < len(self.toks) else 0
        target = self.ident()
        if target in self.params:
            self.error(f"cannot assign to parameter {target}")
        self.take("=")
        source, coeff, offset = self.rhs()
        self.take(";")
        return Assign(target, source, coeff, offset, line)

    def ident(self) -> str:
        t = self.peek()
        if t is None or not (t[0].isalpha() or t[0] == "_") or t in ("while", "if", "else"):
            self.error("expected a variable name")
        self.i += 1
        return t

    def terms(self, stop: set[str]) -> list[tuple[int, str | None]]:
        """Signed terms ``(coeff, name)`` of a sum; ``name`` is None for constants."""
        out = []
        first = True
        while True:
            sign = 1
            if not first:
                op = self.peek()
                if op not in ("+", "-"):
                    break
                self.take()
                if op == "-":
                    sign = -1
            while self.peek() in ("-", "("):
                if self.peek() == "-":
                    self.take()
                    sign = -sign
                else:
                    # parenthesized single term such as (-p1) or (-1)
                    self.take("(")
                    inner = self.terms(stop | {")"})
                    self.take(")")
                    out.extend((sign * c, n) for c, n in inner)
                    break
            else:
                t = self.peek()
                if t is None or t in stop:
                    self.error("expected a term")
                if t.isdigit():
                    self.take()
                    value = int(t)
                    if self.peek() == "*":
                        self.take()
                        out.append((sign * value, self.ident()))
                    else:
                        out.append((sign * value, None))
                else:
                    out.append((sign, self.ident()))
            first = False
        return out

    def param_expr(self, terms: list[tuple[int, str | None]]) -> ParamExpr:
        const = 0
        coeffs = [0] * len(self.params)
        for c, name in terms:
            if name is None:
                const += c
            elif name in self.params:
                coeffs[self.params.index(name)] += c
            else:
                self.error(f"{name} is not a parameter")
        return ParamExpr(const, tuple(coeffs))

    def rhs(self) -> tuple[str | None, int, ParamExpr]:
        terms = self.terms({";"})
        var_terms = [(c, n) for c, n in terms if n is not None and n not in self.params]
        rest = [(c, n) for c, n in terms if n is None or n in self.params]
        if len(var_terms) > 1:
            self.error("unsupported right-hand side: more than one program variable")
        if var_terms:
            c, name = var_terms[0]
            if c < 0:
                self.error("unsupported right-hand side: negative variable coefficient")
            return name, c, self.param_expr(rest)
        return None, 0, self.param_expr(rest)

    def cond(self) -> Cond:
        self.take("(")
        var = self.ident()
        if var in self.params:
            self.error("unsupported condition: left side must be a program variable")
        op = self.peek()
        if op not in ("<", "<=", ">", ">="):
            self.error("unsupported condition: expected a variable compared with < <= > >=")
        self.take()
        terms = self.terms({")"})
        for _, n in terms:
            if n is not None and n not in self.params:
                self.error("unsupported condition: right side must be a parameter expression")
        bound = self.param_expr(terms)
        self.take(")")
        return Cond(var, op, bound)


def parse_program(text: str) -> Program:
    """Parse a program; raises ``ParseError`` on syntax errors and use before assignment."""
    lines = text.splitlines()
    params: list[str] = []
    body_start = 0
    for idx, raw in enumerate(lines):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("params"):
            rest = s[len("params") :].strip()
            params = [p.strip() for p in rest.split(",")] if rest else []
            for p in params:
                if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", p):
                    raise ParseError(f"bad parameter name {p!r}", idx + 1, 1)
            if len(set(params)) != len(params):
                raise ParseError("duplicate parameter name", idx + 1, 1)
            body_start = idx + 1
        break
    body_text = "\n" * body_start + "\n".join(lines[body_start:])
    parser = _Parser(_tokenize(body_text), params)
    stmts = []
    while parser.peek() is not None:
        stmts.append(parser.stmt())
    prog = Program(tuple(params), tuple(stmts))
    _check_defined(prog)
    return prog


def _check_defined(prog: Program) -> None:
    def uses(s: Stmt) -> list[str]:
        if isinstance(s, Assign):
            return [s.source] if s.source else []
        return [s.cond.var]

    def visit(stmts, defined: frozenset) -> frozenset:
        for s in stmts:
            for v in uses(s):
                if v not in defined:
                    line = s.line if isinstance(s, Assign) else 0
                    raise ParseError(f"variable {v} used before assignment", line)
            if isinstance(s, Assign):
                defined = defined | {s.target}
            elif isinstance(s, While):
                visit(s.body, defined)
            else:
                defined = visit(s.then, defined) & visit(s.orelse, defined)
        return defined

    visit(prog.body, frozenset())


# ------------------------------------------------------------------- CFG


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str  # "skip", "assign", "true", "false"
    assign: Assign | None = None
    # guard edges test ``var < bound`` (true) or ``var >= bound`` (false)
    var: str | None = None
    bound: ParamExpr | None = None


@dataclass
class CFG:
    params: tuple[str, ...]
    variables: tuple[str, ...]
    points: int
    edges: list[Edge]
    entry: int = 0
    exit: int = 0
    # program points attached to each statement, for the interpreter
    stmt_points: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def incoming(self, v: int) -> list[Edge]:
        return [e for e in self.edges if e.dst == v]


def _strict_bound(cond: Cond) -> tuple[ParamExpr, bool]:
    """``(g, flip)`` such that the condition is ``var < g`` (``flip=False``) or ``var >= g``."""
    op, g = cond.op, cond.bound
    if op == "<":
        return g, False
    if op == "<=":
        return g.shift(1), False
    if op == ">":
        return g.shift(1), True
    return g, True  # >=


def build_cfg(prog: Program) -> CFG:
    """Control-flow graph with points numbered in creation order (entry is 0)."""
    edges: list[Edge] = []
    stmt_points: dict[int, tuple[int, ...]] = {}
    counter = [0]

    def new() -> int:
        counter[0] += 1
        return counter[0]

    def guard_edges(src: int, cond: Cond, t: int, f: int) -> None:
        g, flip = _strict_bound(cond)
        lt, ge = ("false", "true") if flip else ("true", "false")
        # the edge into ``t`` is taken when the condition holds
        edges.append(Edge(src, t, lt, var=cond.var, bound=g))
        edges.append(Edge(src, f, ge, var=cond.var, bound=g))

    def seq(stmts, cur: int) -> int:
        for s in stmts:
            cur = stmt(s, cur)
        return cur

    def stmt(s: Stmt, cur: int) -> int:
        if isinstance(s, Assign):
            v = new()
            edges.append(Edge(cur, v, "assign", assign=s))
            stmt_points[id(s)] = (v,)
            return v
        if isinstance(s, While):
            head = cur
            if cur == 0:
                head = new()
                edges.append(Edge(cur, head, "skip"))
            body = new()
            # exit is numbered after the body
            placeholder = len(edges)
            end = seq(s.body, body)
            edges.append(Edge(end, head, "skip"))
            out = new()
            g_edges: list[Edge] = []
            g, flip = _strict_bound(s.cond)
            lt, ge = ("false", "true") if flip else ("true", "false")
            g_edges.append(Edge(head, body, lt, var=s.cond.var, bound=g))
            g_edges.append(Edge(head, out, ge, var=s.cond.var, bound=g))
            edges[placeholder:placeholder] = g_edges
            stmt_points[id(s)] = (head, body, end, out)
            return out
        t = new()
        placeholder = len(edges)
        end_t = seq(s.then, t)
        f = new()
        end_f = seq(s.orelse, f)
        join = new()
        g, flip = _strict_bound(s.cond)
        lt, ge = ("false", "true") if flip else ("true", "false")
        edges[placeholder:placeholder] = [Edge(cur, t, lt, var=s.cond.var, bound=g)]
        edges.append(Edge(cur, f, ge, var=s.cond.var, bound=g))
        edges.append(Edge(end_t, join, "skip"))
        edges.append(Edge(end_f, join, "skip"))
        stmt_points[id(s)] = (t, end_t, f, end_f, join)
        return join

    last = seq(prog.body, 0)
    return CFG(prog.params, prog.variables, counter[0] + 1, edges, 0, last, stmt_points)


# --------------------------------------------------------------- compile


def lower_name(var: str, u: int) -> str:
    return f"{var}_{u}m"


def upper_name(var: str, u: int) -> str:
    return f"{var}_{u}p"


INF = Const(POS_INF)


def _param_expr(g: ParamExpr) -> Expr:
    """Expression for ``g`` built from constants, ``p``/``-p`` literals and scaling."""
    terms: list[Expr] = []
    for i, a in enumerate(g.coeffs):
        if a == 0:
            continue
        atom: Expr = Param(i) if a > 0 else NegParam(i)
        terms.append(atom if abs(a) == 1 else Scale(abs(a), atom))
    if g.const or not terms:
        terms.append(Const(g.const))
    out = terms[0]
    for t in terms[1:]:
        out = Add(out, t)
    return out


def _plus(e: Expr, g: ParamExpr) -> Expr:
    if g.const == 0 and not any(g.coeffs):
        return e
    return Add(e, _param_expr(g))


def compile_cfg(cfg: CFG) -> EquationSystem:
    def lo(x: str, u: int) -> Expr:
        return INF if u == cfg.entry else Var(lower_name(x, u))

    def hi(x: str, u: int) -> Expr:
        return INF if u == cfg.entry else Var(upper_name(x, u))

    def contribution(e: Edge, x: str) -> tuple[Expr, Expr]:
        u = e.src
        if e.kind == "skip":
            return lo(x, u), hi(x, u)
        if e.kind == "assign":
            a = e.assign
            if a.target != x:
                return lo(x, u), hi(x, u)
            if a.source is None:
                vl: Expr = _param_expr(a.offset.negate())
                vh: Expr = _param_expr(a.offset)
                if u != cfg.entry:
                    # only where the source point is reachable
                    reach = Add(hi(x, u), INF)
                    vl, vh = Guard(reach, vl), Guard(reach, vh)
                return vl, vh
            sl, sh = lo(a.source, u), hi(a.source, u)
            if a.coeff != 1:
                sl, sh = Scale(a.coeff, sl), Scale(a.coeff, sh)
            return _plus(sl, a.offset.negate()), _plus(sh, a.offset)
        # guard edges: reachability/feasibility tests, then the clipped interval
        gl, gh = lo(e.var, u), hi(e.var, u)
        g = e.bound
        if e.kind == "true":  # var < g
            tests = [Add(gh, INF), Add(_plus(gl, g), Const(-1))]
            if x == e.var:
                vl, vh = Min(gl, INF), Min(gh, Add(_param_expr(g), Const(-1)))
            else:
                vl, vh = Min(lo(x, u), INF), Min(hi(x, u), INF)
        else:  # var >= g
            tests = [_plus(gh, g.negate()), Add(gl, INF)]
            if x == e.var:
                vl, vh = Min(gl, _param_expr(g.negate())), Min(gh, INF)
            else:
                vl, vh = Min(lo(x, u), INF), Min(hi(x, u), INF)
        for t in reversed(tests):
            vl, vh = Guard(t, vl), Guard(t, vh)
        return vl, vh

    incoming: dict[int, list[Edge]] = {}
    for e in cfg.edges:
        incoming.setdefault(e.dst, []).append(e)
    eqs = []
    for u in range(1, cfg.points):
        for x in cfg.variables:
            los, his = [], []
            for e in incoming.get(u, []):
                cl, ch = contribution(e, x)
                los.append(cl)
                his.append(ch)
            eqs.append((lower_name(x, u), los or [Const(NEG_INF)]))
            eqs.append((upper_name(x, u), his or [Const(NEG_INF)]))
    return make_system(cfg.params, eqs)


def compile_program(prog: Program) -> tuple[EquationSystem, CFG]:
    cfg = build_cfg(prog)
    return compile_cfg(cfg), cfg


# ----------------------------------------------------------- interpreter


@dataclass
class Visit:
    point: int
    env: dict[str, int]


def run_program(prog: Program, cfg: CFG, setting: Sequence[int], max_steps: int = 10_000) -> Iterator[Visit]:
    """Concrete execution, yielding the environment at every program point reached.

    Stops silently after ``max_steps`` statement executions.
    """
    env: dict[str, int] = {}
    steps = [0]

    def holds(cond: Cond) -> bool:
        v, g = env[cond.var], cond.bound(setting)
        return {"<": v < g, "<=": v <= g, ">": v > g, ">=": v >= g}[cond.op]

    class _Stop(Exception):
        pass

    def tick():
        steps[0] += 1
        if steps[0] > max_steps:
            raise _Stop

    def exec_seq(stmts, cur: int) -> Iterator[Visit]:
        for s in stmts:
            tick()
            pts = cfg.stmt_points[id(s)]
            if isinstance(s, Assign):
                src = env[s.source] if s.source else 0
                env[s.target] = s.coeff * src + s.offset(setting)
                yield Visit(pts[0], dict(env))
            elif isinstance(s, While):
                head, body, end, out = pts
                if head != cur:
                    yield Visit(head, dict(env))
                while holds(s.cond):
                    tick()
                    yield Visit(body, dict(env))
                    yield from exec_seq(s.body, body)
                    yield Visit(head, dict(env))
                yield Visit(out, dict(env))
            else:
                t, end_t, f, end_f, join = pts
                if holds(s.cond):
                    yield Visit(t, dict(env))
                    yield from exec_seq(s.then, t)
                else:
                    yield Visit(f, dict(env))
                    yield from exec_seq(s.orelse, f)
                yield Visit(join, dict(env))
            cur = pts[-1]

    yield Visit(0, {})
    try:
        yield from exec_seq(prog.body, 0)
    except _Stop:
        return
