"""Parametric strategy iteration.

The engine mirrors ordinary max-strategy iteration with every value and
every choice replaced by a partition of the parameter space:

1. the strategy ``sigma`` starts with the constant alternative everywhere;
2. a Bellman-Ford phase runs ``n`` round-robin rounds from ``+inf`` where
   each variable takes the alternative ``sigma`` selects in each region;
3. ``next`` switches, per region, to a maximal alternative unless the
   current one is already maximal;
4. the loop stops once the new strategy equals the old one region-wise.

The number of improvement steps is checked against ``(r+1)**n`` on every
run, and with ``validate=True`` every intermediate partition is checked
for the structural invariants and for the value bound of the system.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Mapping, Sequence

from . import sat
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
    instantiate,
    value_bound,
)
from .extint import ExtInt
from .linear import AffineFn, LinIneq
from .oracle import BoundViolation, solve_si, strategy_bound
from .partition import (
    Space,
    leaf_argmax,
    leaf_guard,
    leaf_min,
    leaf_scale,
    leaf_add,
    make_space,
)

log = logging.getLogger(__name__)

ParamAssign = Dict[str, Any]
ParamStrategy = Dict[str, Any]


@dataclass
class PSIStats:
    improvements: int = 0
    bf_rounds: int = 0
    leaf_counts: dict[str, int] = field(default_factory=dict)
    max_leaves: int = 0
    max_labels: int = 0
    fm_calls: int = 0
    exact_calls: int = 0
    wall_time: float = 0.0

    def lines(self) -> list[str]:
        return [
            f"improvement rounds: {self.improvements}",
            f"bellman-ford rounds: {self.bf_rounds}",
            "final leaf counts: " + ", ".join(f"{x}={c}" for x, c in self.leaf_counts.items()),
            f"largest partition: {self.max_leaves} leaves, {self.max_labels} labels",
            f"fm calls: {self.fm_calls}",
            f"exact sat calls: {self.exact_calls}",
            f"wall time: {self.wall_time:.3f} s",
        ]


@dataclass
class PSIResult:
    system: EquationSystem
    space: Space
    assignment: ParamAssign
    strategy: ParamStrategy
    stats: PSIStats
    # per improvement step: the assignment computed by the Bellman-Ford phase
    trace: list[ParamAssign] = field(default_factory=list)

    def value(self, x: str, point: Sequence[int]) -> ExtInt:
        return self.space.value_at(self.assignment[x], point)(point)

    def values(self, point: Sequence[int]) -> dict[str, ExtInt]:
        return {x: self.value(x, point) for x in self.system.variables}


def eval_lifted(space: Space, e: Expr, rho: Mapping[str, Any]):
    """Partition of the value of a max-free expression under ``rho``."""
    k = space.k
    if isinstance(e, Const):
        return space.leaf(AffineFn.constant(e.value, k))
    if isinstance(e, Param):
        return space.leaf(AffineFn.proj(e.index, k))
    if isinstance(e, NegParam):
        return space.leaf(AffineFn.proj(e.index, k, -1))
    if isinstance(e, Var):
        return rho[e.name]
    if isinstance(e, Scale):
        return space.apply(leaf_scale(e.coeff, k), eval_lifted(space, e.arg, rho))
    left = eval_lifted(space, e.left if not isinstance(e, Guard) else e.test, rho)
    right = eval_lifted(space, e.right if not isinstance(e, Guard) else e.value, rho)
    if isinstance(e, Add):
        return space.apply(leaf_add, left, right)
    if isinstance(e, Min):
        return space.apply(leaf_min, left, right)
    if isinstance(e, Guard):
        return space.apply(leaf_guard, left, right)
    raise TypeError(f"unexpected expression {e!r}")


class _Checker:
    """Structural and value-bound checks on every partition the engine builds."""

    def __init__(self, space: Space, system: EquationSystem, enabled: bool, stats: PSIStats):
        self.space = space
        self.enabled = enabled
        self.stats = stats
        self.bound = value_bound(system)

    def __call__(self, part, what: str):
        s = self.space
        leaves = s.leaf_count(part)
        self.stats.max_leaves = max(self.stats.max_leaves, leaves)
        self.stats.max_labels = max(self.stats.max_labels, s.label_count(part))
        if not self.enabled:
            return part
        s.validate(part)
        # label entries are differences of two bounded numbers
        limit = 2 * self.bound
        for v in s.numbers(part):
            if abs(v) > limit:
                raise BoundViolation(f"{what}: number {v} exceeds the bound {limit}")
        for v in s.leaves(part):
            if isinstance(v, AffineFn):
                for a in v.numbers():
                    if abs(a) > self.bound:
                        raise BoundViolation(f"{what}: coefficient {a} exceeds the value bound {self.bound}")
        return part


def _needed(space: Space, sigma) -> set[int]:
    return set(space.leaves(sigma))


def bellman_ford(space: Space, system: EquationSystem, sigma: ParamStrategy, check=None, stats: PSIStats | None = None) -> ParamAssign:
    """``n`` round-robin rounds from ``+inf`` for the max-free system selected by ``sigma``."""
    k = space.k
    rho: ParamAssign = {x: space.leaf(AffineFn.constant(float("inf"), k)) for x in system.variables}
    for _ in range(system.n):
        changed = False
        for eq in system.equations:
            # only alternatives chosen somewhere are evaluated
            vals = {i: eval_lifted(space, eq.alternatives[i], rho) for i in sorted(_needed(space, sigma[eq.lhs]))}
            new = space.select(sigma[eq.lhs], vals)
            changed = changed or new != rho[eq.lhs]
            rho[eq.lhs] = new
            if check is not None:
                check(rho[eq.lhs], f"value of {eq.lhs}")
        if stats is not None:
            stats.bf_rounds += 1
        # a round that rebuilt every partition identically is a fixpoint of the
        # round map, so the remaining rounds would return the same assignment
        if not changed:
            break
    return rho


def next_strategy(space: Space, system: EquationSystem, sigma: ParamStrategy, rho: ParamAssign, check=None) -> ParamStrategy:
    """Locally optimal improvement of ``sigma`` with respect to ``rho``."""
    out = {}
    for eq in system.equations:
        vals = [eval_lifted(space, alt, rho) for alt in eq.alternatives]
        out[eq.lhs] = space.apply(leaf_argmax, sigma[eq.lhs], *vals)
        if check is not None:
            check(out[eq.lhs], f"strategy of {eq.lhs}")
    return out


def psi_solve(
    system: EquationSystem,
    assumption: Sequence[LinIneq] = (),
    *,
    repr: str = "auto",
    sat_mode: str = "exact",
    validate: bool = False,
    trace: bool = False,
) -> PSIResult:
    """Least parametric solution of ``system`` over the settings satisfying ``assumption``.

    ``sat_mode="exact"`` removes integer-empty regions from the result with
    the exact integer check; ``"fm"`` keeps the Fourier-Motzkin pruned form.
    """
    if sat_mode not in ("fm", "exact"):
        raise ValueError(f"unknown sat mode {sat_mode!r}")
    t0 = time.perf_counter()
    fm0, ex0 = sat.STATS.fm_calls, sat.STATS.exact_calls
    space = make_space(system.k, assumption, repr)
    stats = PSIStats()
    check = _Checker(space, system, validate, stats)
    limit = strategy_bound(system)
    sigma: ParamStrategy = {x: space.leaf(0) for x in system.variables}
    steps: list[ParamAssign] = []
    while True:
        rho = bellman_ford(space, system, sigma, check, stats)
        if trace:
            steps.append(dict(rho))
        stats.improvements += 1
        if stats.improvements > limit:
            raise BoundViolation(f"{stats.improvements} improvement steps exceed (r+1)^n = {limit}")
        new = next_strategy(space, system, sigma, rho, check)
        log.debug("improvement %d: %s", stats.improvements, {x: space.leaf_count(t) for x, t in new.items()})
        if all(space.equal(new[x], sigma[x]) for x in system.variables):
            break
        sigma = new
    if sat_mode == "exact":
        rho = {x: space.purge(t) for x, t in rho.items()}
        sigma = {x: space.purge(t) for x, t in sigma.items()}
    for x, t in rho.items():
        check(t, f"final value of {x}")
    stats.leaf_counts = {x: space.leaf_count(t) for x, t in rho.items()}
    stats.fm_calls = sat.STATS.fm_calls - fm0
    stats.exact_calls = sat.STATS.exact_calls - ex0
    stats.wall_time = time.perf_counter() - t0
    return PSIResult(system, space, rho, sigma, stats, steps)


# ------------------------------------------------------------- grid check


@dataclass
class CheckReport:
    checked: int = 0
    skipped: int = 0
    mismatches: list[tuple[tuple[int, ...], str, ExtInt, ExtInt]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def summary(self) -> str:
        matched = self.checked - len({m[0] for m in self.mismatches})
        text = f"{matched}/{self.checked} settings match"
        if self.mismatches:
            p, x, got, want = self.mismatches[0]
            text += f"; first mismatch at {p}: {x} = {got}, expected {want}"
        return text


def grid(lo: int, hi: int, k: int) -> Iterable[tuple[int, ...]]:
    return itertools.product(range(lo, hi + 1), repeat=k)


def check_solution(
    system: EquationSystem,
    rho: ParamAssign,
    points: Iterable[Sequence[int]],
    space: Space,
    *,
    stop_at_first: bool = False,
) -> CheckReport:
    """Compare ``rho`` with the strategy-iteration oracle at each setting in the assumption."""
    report = CheckReport()
    for p in points:
        p = tuple(p)
        if not space.in_assumption(p):
            report.skipped += 1
            continue
        report.checked += 1
        want = solve_si(instantiate(system, p))
        for x in system.variables:
            got = space.value_at(rho[x], p)(p)
            if got != want[x]:
                report.mismatches.append((p, x, got, want[x]))
                if stop_at_first:
                    return report
    return report
