"""System generators: the exponential-fragmentation family and random systems."""

from __future__ import annotations

import random

from .eqsys import (
    Add,
    Const,
    EquationSystem,
    Expr,
    Guard,
    Min,
    NegParam,
    Param,
    Scale,
    Var,
    make_system,
    parse_system,
)
from .extint import NEG_INF, POS_INF


def exp_family_text(m: int) -> str:
    """Equation file for the family whose solution needs ``2**(m+1) + 3`` pieces.

    ``x_i = x_{i+1} \\/ -2^i + x'_{i+1}``, ``x'_i = x'_{i+1} /\\ 2^i + x_{i+1}``
    for ``1 <= i < m``, closed by the ``m``-level pair on ``x``/``x'`` and
    ``x = p /\\ -p``, ``x' = -p \\/ p``.
    """
    if m < 0:
        raise ValueError("m must be non-negative")

    def names(i: int) -> tuple[str, str]:
        return (f"x{i}", f"x{i}'") if i <= m else ("x", "x'")

    lines = ["params p"]
    for i in range(1, m + 1):
        lo, hi = names(i)
        nlo, nhi = names(i + 1)
        lines.append(f"{lo} = {nlo} \\/ {-(2 ** i)} + {nhi}")
        lines.append(f"{hi} = {nhi} /\\ {2 ** i} + {nlo}")
    if m == 0:
        # the m-level pair alone
        lines.append("x0 = x \\/ -1 + x'")
        lines.append("x0' = x' /\\ 1 + x")
    lines.append("x = p /\\ -p")
    lines.append("x' = -p \\/ p")
    return "\n".join(lines) + "\n"


def exp_family(m: int) -> EquationSystem:
    return parse_system(exp_family_text(m))


def exp_family_closed_form(m: int, p: int) -> int:
    """Least-solution value of ``x1`` (``x0`` for ``m == 0``) at parameter ``p``."""
    t = 2 ** m
    if p <= -t - 1:
        return -p - t
    if p >= t + 1:
        return p - t
    return 0 if p % 2 == 0 else -1


def random_expr(
    rng: random.Random,
    variables: list[str],
    k: int,
    depth: int,
    const_range: tuple[int, int] = (-5, 5),
    max_scale: int = 2,
    inf_rate: float = 0.05,
) -> Expr:
    if depth <= 0 or rng.random() < 0.3:
        roll = rng.random()
        if roll < inf_rate:
            return Const(rng.choice((NEG_INF, POS_INF)))
        if roll < 0.35:
            return Const(rng.randint(*const_range))
        if k and roll < 0.55:
            i = rng.randrange(k)
            return Param(i) if rng.random() < 0.6 else NegParam(i)
        return Var(rng.choice(variables))
    sub = lambda: random_expr(rng, variables, k, depth - 1, const_range, max_scale, inf_rate)  # noqa: E731
    roll = rng.random()
    if roll < 0.45:
        return Add(sub(), sub())
    if roll < 0.7:
        return Min(sub(), sub())
    if roll < 0.85:
        return Guard(sub(), sub())
    return Scale(rng.randint(0, max_scale), sub())


def random_system(
    rng: random.Random,
    n: int,
    r: int,
    k: int,
    *,
    depth: int = 2,
    const_range: tuple[int, int] = (-5, 5),
    max_scale: int = 2,
) -> EquationSystem:
    """A normalized system with ``n`` variables, up to ``r`` non-constant alternatives each."""
    variables = [f"x{i}" for i in range(n)]
    params = [f"p{i + 1}" for i in range(k)]
    eqs = []
    for x in variables:
        head = Const(rng.choice((NEG_INF, rng.randint(*const_range))))
        alts = [random_expr(rng, variables, k, depth, const_range, max_scale) for _ in range(rng.randint(1, r))]
        eqs.append((x, [head, *alts]))
    return make_system(params, eqs)


def random_program_text(rng: random.Random, k: int = 2, *, stmts: int = 3, depth: int = 1) -> str:
    """A small terminating-or-not program over variables ``x``, ``y`` and ``k`` parameters."""
    params = [f"p{i + 1}" for i in range(k)]
    variables = ["x", "y"]

    def pexpr() -> str:
        terms = []
        for p in params:
            if rng.random() < 0.5:
                terms.append(rng.choice([p, f"-{p}", f"2*{p}"]))
        if not terms or rng.random() < 0.5:
            terms.append(str(rng.randint(-3, 3)))
        return " + ".join(terms).replace("+ -", "- ")

    def rhs() -> str:
        roll = rng.random()
        v = rng.choice(variables)
        if roll < 0.3:
            return pexpr()
        if roll < 0.6:
            return f"{v} + {rng.randint(-2, 3)}"
        if roll < 0.75:
            return f"{v} + {rng.choice(params)}" if params else v
        if roll < 0.85:
            return f"{rng.randint(0, 2)} * {v}"
        return v

    def cond() -> str:
        return f"{rng.choice(variables)} {rng.choice(['<', '<=', '>', '>='])} {pexpr()}"

    def block(n: int, d: int, indent: str) -> list[str]:
        out = []
        for _ in range(n):
            roll = rng.random()
            if d > 0 and roll < 0.25:
                out.append(f"{indent}while ({cond()}) {{")
                out.extend(block(rng.randint(1, 2), d - 1, indent + "  "))
                out.append(f"{indent}}}")
            elif d > 0 and roll < 0.45:
                out.append(f"{indent}if ({cond()}) {{")
                out.extend(block(rng.randint(1, 2), d - 1, indent + "  "))
                out.append(f"{indent}}} else {{")
                out.extend(block(rng.randint(0, 2), d - 1, indent + "  "))
                out.append(f"{indent}}}")
            else:
                out.append(f"{indent}{rng.choice(variables)} = {rhs()};")
        return out

    lines = ["params " + ", ".join(params)]
    lines += [f"x = {pexpr()};", f"y = {pexpr()};"]
    lines += block(stmts, depth, "")
    return "\n".join(lines) + "\n"
