"""Ground truth for parameter-free systems.

Two independent solvers for the least solution of a system with ``k == 0``:

* ``solve_si`` -- ordinary max-strategy iteration: Bellman-Ford style
  round robin from the top element for the current strategy, then local
  strategy improvement, until the strategy is stable.
* ``solve_kleene`` -- plain Kleene iteration from the bottom element, with
  values above the a-priori bound ``value_bound(system)`` replaced by
  ``+inf``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Mapping, Sequence

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
    eval_pointwise,
    value_bound,
)
from .extint import NEG_INF, POS_INF, ExtInt

Strategy = Dict[str, int]
VarAssign = Dict[str, ExtInt]


class BoundViolation(AssertionError):
    """A run-time check of the termination or size bounds failed."""


@dataclass
class SIRun:
    """Solution plus a trace of a strategy iteration run."""

    solution: VarAssign
    strategy: Strategy
    improvements: int
    # BF values of every round of every improvement step
    rounds: list[list[VarAssign]] = field(default_factory=list)


def next_si(strategy: Mapping[str, int], assign: Mapping[str, ExtInt], system: EquationSystem) -> Strategy:
    """Locally optimal improvement: keep a maximal choice, else the first maximal one."""
    out = {}
    for eq in system.equations:
        values = [eval_pointwise(alt, (), assign) for alt in eq.alternatives]
        best = max(values)
        cur = strategy[eq.lhs]
        out[eq.lhs] = cur if values[cur] == best else values.index(best)
    return out


def _bellman_ford(system: EquationSystem, strategy: Mapping[str, int], trace: list | None = None) -> VarAssign:
    assign: VarAssign = {x: POS_INF for x in system.variables}
    for _ in range(system.n):
        for eq in system.equations:
            assign[eq.lhs] = eval_pointwise(eq.alternatives[strategy[eq.lhs]], (), assign)
        if trace is not None:
            trace.append(dict(assign))
    return assign


def strategy_bound(system: EquationSystem) -> int:
    """``(r + 1) ** n`` with ``r`` the largest number of non-constant alternatives."""
    r = max((eq.r for eq in system.equations), default=0)
    return (r + 1) ** system.n


def run_si(system: EquationSystem, *, trace: bool = False) -> SIRun:
    if system.k:
        raise ValueError("strategy iteration oracle needs a parameter-free system")
    strategy = {x: 0 for x in system.variables}
    limit = strategy_bound(system)
    rounds: list[list[VarAssign]] = []
    improvements = 0
    while True:
        per_round: list[VarAssign] | None = [] if trace else None
        assign = _bellman_ford(system, strategy, per_round)
        if trace:
            rounds.append(per_round)
        improvements += 1
        if improvements > limit:
            raise BoundViolation(f"{improvements} improvement steps exceed (r+1)^n = {limit}")
        old, strategy = strategy, next_si(strategy, assign, system)
        if strategy == old:
            return SIRun(assign, strategy, improvements, rounds)


def solve_si(system: EquationSystem) -> VarAssign:
    """Least solution of a parameter-free system by strategy iteration."""
    return run_si(system).solution


# ------------------------------------------------------------------ Kleene


def _compile(e: Expr, slots: Mapping[str, int]) -> str:
    """Python source evaluating ``e`` over the value list ``v``."""
    if isinstance(e, Const):
        return repr(e.value) if e.value not in (NEG_INF, POS_INF) else ("NEG" if e.value == NEG_INF else "POS")
    if isinstance(e, Var):
        return f"v[{slots[e.name]}]"
    if isinstance(e, (Param, NegParam)):
        raise ValueError("Kleene oracle needs a parameter-free system")
    if isinstance(e, Add):
        return f"add({_compile(e.left, slots)}, {_compile(e.right, slots)})"
    if isinstance(e, Min):
        return f"min({_compile(e.left, slots)}, {_compile(e.right, slots)})"
    if isinstance(e, Guard):
        return f"({_compile(e.value, slots)} if {_compile(e.test, slots)} >= 0 else NEG)"
    if isinstance(e, Scale):
        return f"scale({e.coeff}, {_compile(e.arg, slots)})"
    raise TypeError(e)


def _ray_bound(e: Expr, base: Sequence[ExtInt], slope: Sequence[int], slots: Mapping[str, int]):
    """Lower bound ``alpha + beta * t`` of ``e(base + t * slope)`` valid for all ``t >= 0``.

    Returns ``NEG_INF``/``POS_INF`` for the constant infinite bounds, else a pair.
    """
    if isinstance(e, Const):
        return e.value if e.value in (NEG_INF, POS_INF) else (e.value, 0)
    if isinstance(e, Var):
        i = slots[e.name]
        return base[i] if base[i] in (NEG_INF, POS_INF) else (base[i], slope[i])
    if isinstance(e, Scale):
        a = _ray_bound(e.arg, base, slope, slots)
        if a == NEG_INF:
            return NEG_INF
        if a == POS_INF:
            return (0, 0) if e.coeff == 0 else POS_INF
        return (e.coeff * a[0], e.coeff * a[1])
    if isinstance(e, Guard):
        a = _ray_bound(e.test, base, slope, slots)
        if a == NEG_INF or (a != POS_INF and (a[0] < 0 or a[1] < 0)):
            return NEG_INF
        return _ray_bound(e.value, base, slope, slots)
    a = _ray_bound(e.left, base, slope, slots)
    b = _ray_bound(e.right, base, slope, slots)
    if a == NEG_INF or b == NEG_INF:
        return NEG_INF
    if isinstance(e, Add):
        if a == POS_INF or b == POS_INF:
            return POS_INF
        return (a[0] + b[0], a[1] + b[1])
    if a == POS_INF:
        return b
    if b == POS_INF:
        return a
    return (min(a[0], b[0]), min(a[1], b[1]))


def _diverges_linearly(system: EquationSystem, base: Sequence[ExtInt], slope: Sequence[Fraction], slots) -> bool:
    """Certificate ``F(b + t*slope) >= b + (t+1)*slope`` for all ``t >= 0``, some ``b <= base``.

    With ``b`` below the least solution, monotonicity gives
    ``F^t(b) >= b + t*slope``, so every variable with positive slope is
    ``+inf`` in the least solution.  ``b`` starts at ``base`` and is lowered
    where needed (a few descending rounds); lowering keeps it below the
    least solution.
    """
    b = list(base)
    for _ in range(system.n + 1):
        lowered = False
        for i, eq in enumerate(system.equations):
            if b[i] == POS_INF or b[i] == NEG_INF:
                continue
            best = None
            for alt in eq.alternatives:
                line = _ray_bound(alt, b, slope, slots)
                if line == POS_INF:
                    best = POS_INF
                    break
                if line != NEG_INF and line[1] >= slope[i]:
                    cand = line[0] - slope[i]
                    best = cand if best is None else max(best, cand)
            if best is None:
                return False
            if best < b[i]:
                b[i] = best
                lowered = True
        if not lowered:
            return True
    return False


def solve_kleene(system: EquationSystem, max_steps: int | None = None, *, accelerate: bool = True) -> VarAssign:
    """Least solution by Kleene iteration from ``-inf`` with clamping at the value bound.

    Iterates never exceed the least solution, and every finite value of the
    least solution is at most ``value_bound(system)``, so an iterate above
    the bound can only converge to ``+inf``.  With ``accelerate`` the
    iteration periodically tries a linear-divergence certificate (see
    ``_diverges_linearly``) and jumps the certified variables to ``+inf``.
    """
    from .extint import ext_add, ext_scale, is_finite

    if system.k:
        raise ValueError("Kleene oracle needs a parameter-free system")
    bound = value_bound(system)
    slots = {x: i for i, x in enumerate(system.variables)}
    body = []
    for i, eq in enumerate(system.equations):
        alts = [_compile(alt, slots) for alt in eq.alternatives]
        rhs = alts[0] if len(alts) == 1 else f"max({', '.join(alts)})"
        body.append(f"    t = {rhs}\n    if t > B:\n        t = POS\n    if t != v[{i}]:\n        v[{i}] = t\n        changed = True")
    src = "def step(v):\n    changed = False\n" + "\n".join(body) + "\n    return changed\n"
    env = {"NEG": NEG_INF, "POS": POS_INF, "add": ext_add, "scale": ext_scale, "B": bound}
    exec(compile(src, "<kleene>", "exec"), env)
    step = env["step"]
    values = [NEG_INF] * system.n
    steps = 0
    window = 8
    before = list(values)
    # chaotic (in-place) iteration from the bottom element
    while step(values):
        steps += 1
        if max_steps is not None and steps > max_steps:
            raise RuntimeError(f"Kleene iteration exceeded {max_steps} steps")
        if not accelerate or steps % window:
            continue
        # growth over the window, spread over window * n simultaneous steps
        # (one in-place step can carry growth around a whole cycle)
        slope = [
            Fraction(b - a, window * system.n) if is_finite(a) and is_finite(b) else 0
            for a, b in zip(before, values)
        ]
        if any(d > 0 for d in slope) and _diverges_linearly(system, values, slope, slots):
            values = [POS_INF if d > 0 else v for v, d in zip(values, slope)]
        before = list(values)
    return dict(zip(system.variables, values))


def check_solution_pointwise(system: EquationSystem, assign: Mapping[str, ExtInt]) -> bool:
    """True when ``assign`` satisfies every (parameter-free) equation exactly."""
    for eq in system.equations:
        if assign[eq.lhs] != max(eval_pointwise(alt, (), assign) for alt in eq.alternatives):
            return False
    return True
