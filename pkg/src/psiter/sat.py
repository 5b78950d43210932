"""Satisfiability of conjunctions of linear inequalities over the integers.

Two deciders:

* ``fm_satisfiable`` -- Fourier-Motzkin elimination with gcd tightening.
  ``False`` is definitive (no integer point); ``True`` may be a false
  positive for integer-empty but rationally non-empty conjunctions.
* ``exact_satisfiable`` / ``integer_point`` -- a complete integer decision
  procedure.  It reduces one variable per step by the cheapest sound rule:
  dropping one-sided variables, exact elimination when one side has unit
  coefficients, enumeration of narrowly bounded variables, and otherwise
  the Omega test's dark shadow plus splinters (equalities are removed by a
  unimodular change of variables).  The total number of branches is capped;
  exceeding the cap raises ``SatLimitError``.

Rows are pairs ``(coeffs, bound)`` meaning ``coeffs . p <= bound``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .linear import LinIneq

log = logging.getLogger(__name__)

Row = tuple[tuple[int, ...], int]

DEFAULT_BRANCH_CAP = 10**6
# bounded variables with at most this many values are enumerated directly
ENUM_WIDTH = 32


class SatLimitError(RuntimeError):
    """The exact integer check needed more branches than allowed."""


@dataclass
class SatStats:
    fm_calls: int = 0
    fm_cache_hits: int = 0
    exact_calls: int = 0

    def reset(self) -> None:
        self.fm_calls = self.fm_cache_hits = self.exact_calls = 0


STATS = SatStats()
# keyed by the frozenset of reduced rows; plain dict get/set is atomic in CPython
_FM_MEMO: dict[frozenset, bool] = {}
_FM_MEMO_MAX = 200_000


def clear_cache() -> None:
    _FM_MEMO.clear()


# ------------------------------------------------------------------ rows


def _tighten(coeffs: Sequence[int], bound: int) -> Optional[Row] | bool:
    """Reduced row, or ``True``/``False`` for a constant one."""
    g = 0
    for a in coeffs:
        g = math.gcd(g, a)
    if g == 0:
        return bound >= 0
    if g == 1:
        return tuple(coeffs), bound
    return tuple(a // g for a in coeffs), bound // g


def _rows_of(constraints: Iterable[LinIneq | Row]) -> Optional[dict[tuple[int, ...], int]]:
    """Reduced rows keyed by coefficient vector (tightest bound kept); ``None`` if trivially false."""
    rows: dict[tuple[int, ...], int] = {}
    for c in constraints:
        coeffs, bound = (c.coeffs, c.bound) if isinstance(c, LinIneq) else c
        r = _tighten(coeffs, bound)
        if r is True:
            continue
        if r is False:
            return None
        a, b = r
        if a not in rows or b < rows[a]:
            rows[a] = b
    return rows


def _opposite_clash(rows: dict[tuple[int, ...], int]) -> bool:
    """``a.p <= b`` together with ``-a.p <= b'`` where ``b + b' < 0``."""
    for a, b in rows.items():
        nb = rows.get(tuple(-x for x in a))
        if nb is not None and b + nb < 0:
            return True
    return False


# ------------------------------------------------------- Fourier-Motzkin


def _fm_core(rows: dict[tuple[int, ...], int]) -> bool:
    k = len(next(iter(rows))) if rows else 0
    while rows:
        if _opposite_clash(rows):
            return False
        pos = [0] * k
        neg = [0] * k
        for a in rows:
            for j, x in enumerate(a):
                if x > 0:
                    pos[j] += 1
                elif x < 0:
                    neg[j] += 1
        # one-sided variables can always be satisfied: drop their rows
        one_sided = [j for j in range(k) if (pos[j] == 0) != (neg[j] == 0)]
        if one_sided:
            rows = {a: b for a, b in rows.items() if all(a[j] == 0 for j in one_sided)}
            continue
        live = [j for j in range(k) if pos[j]]
        j = min(live, key=lambda v: (pos[v] * neg[v], pos[v] + neg[v], v))
        uppers = [(a, b) for a, b in rows.items() if a[j] > 0]
        lowers = [(a, b) for a, b in rows.items() if a[j] < 0]
        out = {a: b for a, b in rows.items() if a[j] == 0}
        for ua, ub in uppers:
            for la, lb in lowers:
                mu, ml = -la[j], ua[j]
                r = _tighten([mu * x + ml * y for x, y in zip(ua, la)], mu * ub + ml * lb)
                if r is True:
                    continue
                if r is False:
                    return False
                a, b = r
                if a not in out or b < out[a]:
                    out[a] = b
        rows = out
    return True


def fm_satisfiable(constraints: Iterable[LinIneq | Row]) -> bool:
    """Fourier-Motzkin with integer tightening; ``False`` means no integer point."""
    STATS.fm_calls += 1
    rows = _rows_of(constraints)
    if rows is None:
        return False
    key = frozenset(rows.items())
    hit = _FM_MEMO.get(key)
    if hit is not None:
        STATS.fm_cache_hits += 1
        return hit
    res = _fm_core(rows)
    if len(_FM_MEMO) >= _FM_MEMO_MAX:
        _FM_MEMO.clear()
    _FM_MEMO[key] = res
    return res


# --------------------------------------------------------- exact solver


class _Budget:
    def __init__(self, cap: int):
        self.cap = cap
        self.used = 0

    def spend(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.cap:
            raise SatLimitError(f"exact integer check exceeded {self.cap} branches")


def _ceildiv(a: int, b: int) -> int:
    return -((-a) // b)


def _substitute(rows: dict[tuple[int, ...], int], j: int, value: int) -> Optional[dict[tuple[int, ...], int]]:
    """Fix ``p_j = value``."""
    out = []
    for a, b in rows.items():
        if a[j]:
            out.append((a[:j] + (0,) + a[j + 1 :], b - a[j] * value))
        else:
            out.append((a, b))
    return _rows_of(out)


def _var_range(rows: dict[tuple[int, ...], int], j: int, point: Sequence[int]) -> tuple[Fraction | None, Fraction | None]:
    """Rational bounds of ``p_j`` once every other variable is fixed by ``point``."""
    lo = hi = None
    for a, b in rows.items():
        if not a[j]:
            continue
        rest = b - sum(x * point[i] for i, x in enumerate(a) if i != j)
        v = Fraction(rest, a[j])
        if a[j] > 0:
            hi = v if hi is None or v < hi else hi
        else:
            lo = v if lo is None or v > lo else lo
    return lo, hi


def _pick_value(lo: Fraction | None, hi: Fraction | None) -> int:
    if lo is not None:
        v = math.ceil(lo)
    elif hi is not None:
        v = math.floor(hi)
    else:
        v = 0
    if hi is not None and v > hi:
        raise AssertionError("back-substitution found an empty range")
    return v


def _projected_bounds(rows: dict[tuple[int, ...], int], j: int) -> tuple[int | None, int | None] | None:
    """Integer bounds of ``p_j`` over the rational shadow; ``None`` if the shadow is empty."""
    k = len(next(iter(rows)))
    cur = dict(rows)
    for v in range(k):
        if v == j:
            continue
        uppers = [(a, b) for a, b in cur.items() if a[v] > 0]
        lowers = [(a, b) for a, b in cur.items() if a[v] < 0]
        out = {a: b for a, b in cur.items() if a[v] == 0}
        for ua, ub in uppers:
            for la, lb in lowers:
                mu, ml = -la[v], ua[v]
                r = _tighten([mu * x + ml * y for x, y in zip(ua, la)], mu * ub + ml * lb)
                if r is True:
                    continue
                if r is False:
                    return None
                a, b = r
                if a not in out or b < out[a]:
                    out[a] = b
        cur = out
    lo = hi = None
    for a, b in cur.items():
        if a[j] > 0:
            v = b // a[j]
            hi = v if hi is None else min(hi, v)
        elif a[j] < 0:
            v = _ceildiv(b, a[j])
            lo = v if lo is None else max(lo, v)
    if lo is not None and hi is not None and lo > hi:
        return None
    return lo, hi


def _unimodular(c: Sequence[int]) -> tuple[list[list[int]], int]:
    """Unimodular ``U`` and column ``p`` with ``c . U = g * e_p``, ``g = gcd(c) > 0``."""
    k = len(c)
    U = [[int(i == j) for j in range(k)] for i in range(k)]
    v = list(c)
    while True:
        nz = [i for i in range(k) if v[i]]
        p = min(nz, key=lambda i: abs(v[i]))
        if len(nz) == 1:
            break
        for q in nz:
            if q == p:
                continue
            f = v[q] // v[p]
            if f:
                v[q] -= f * v[p]
                for row in U:
                    row[q] -= f * row[p]
    if v[p] < 0:
        v[p] = -v[p]
        for row in U:
            row[p] = -row[p]
    return U, p


def _solve(rows: dict[tuple[int, ...], int], eqs: list[Row], k: int, budget: _Budget) -> Optional[list[int]]:
    budget.spend()
    if eqs:
        return _eliminate_equality(rows, eqs, k, budget)
    if not rows:
        return [0] * k
    if _opposite_clash(rows) or not _fm_core(dict(rows)):
        return None
    pos = [0] * k
    neg = [0] * k
    unit_up = [True] * k
    unit_lo = [True] * k
    for a in rows:
        for j, x in enumerate(a):
            if x > 0:
                pos[j] += 1
                unit_up[j] &= x == 1
            elif x < 0:
                neg[j] += 1
                unit_lo[j] &= x == -1
    live = [j for j in range(k) if pos[j] or neg[j]]

    def finish(sub_rows, j):
        point = _solve(sub_rows, [], k, budget)
        if point is None:
            return None
        point[j] = _pick_value(*_var_range(rows, j, point))
        return point

    # one-sided variable: its rows can always be satisfied afterwards
    for j in live:
        if not pos[j] or not neg[j]:
            return finish({a: b for a, b in rows.items() if a[j] == 0}, j)

    # unit coefficients on one side make the real shadow exact
    for j in sorted(live, key=lambda v: pos[v] * neg[v]):
        if unit_up[j] or unit_lo[j]:
            shadow = _shadow(rows, j, dark=False)
            if shadow is None:
                return None
            return finish(shadow, j)

    # narrowly bounded variable: enumerate
    best = None
    for j in live:
        bounds = _projected_bounds(rows, j)
        if bounds is None:
            return None
        lo, hi = bounds
        if lo is not None and hi is not None and (best is None or hi - lo < best[1] - best[0]):
            best = (lo, hi, j)
    if best is not None and best[1] - best[0] < ENUM_WIDTH:
        lo, hi, j = best
        for v in range(lo, hi + 1):
            sub = _substitute(rows, j, v)
            if sub is None:
                continue
            point = _solve(sub, [], k, budget)
            if point is not None:
                point[j] = v
                return point
        return None

    # Omega test: dark shadow, then splinters
    j = min(live, key=lambda v: (pos[v] * neg[v], v))
    dark = _shadow(rows, j, dark=True)
    if dark is not None:
        point = finish(dark, j)
        if point is not None:
            return point
    m = max(a[j] for a in rows if a[j] > 0)
    for a, b in list(rows.items()):
        if a[j] >= 0:
            continue
        coef = -a[j]
        top = (m * coef - coef - m) // m
        for t in range(top + 1):
            # coef * p_j = (rest of the lower bound) + t
            point = _solve(rows, [(tuple(-x for x in a), t - b)], k, budget)
            if point is not None:
                return point
    return None


def _shadow(rows: dict[tuple[int, ...], int], j: int, *, dark: bool) -> Optional[dict[tuple[int, ...], int]]:
    uppers = [(a, b) for a, b in rows.items() if a[j] > 0]
    lowers = [(a, b) for a, b in rows.items() if a[j] < 0]
    out = [(a, b) for a, b in rows.items() if a[j] == 0]
    for ua, ub in uppers:
        for la, lb in lowers:
            mu, ml = -la[j], ua[j]
            slack = (mu - 1) * (ml - 1) if dark else 0
            out.append(([mu * x + ml * y for x, y in zip(ua, la)], mu * ub + ml * lb - slack))
    return _rows_of(out)


def _eliminate_equality(rows, eqs: list[Row], k: int, budget: _Budget) -> Optional[list[int]]:
    (c, d), rest = eqs[0], eqs[1:]
    g = 0
    for x in c:
        g = math.gcd(g, x)
    if g == 0:
        return _solve(rows, rest, k, budget) if d == 0 else None
    if d % g:
        return None
    c = [x // g for x in c]
    d //= g
    U, p = _unimodular(c)

    def transform(a: Sequence[int], b: int) -> tuple[list[int], int]:
        t = [sum(a[i] * U[i][q] for i in range(k)) for q in range(k)]
        b -= t[p] * d
        t[p] = 0
        return t, b

    new_rows = _rows_of(transform(a, b) for a, b in rows.items())
    if new_rows is None:
        return None
    new_eqs = [tuple(transform(a, b)) for a, b in rest]
    y = _solve(new_rows, [(tuple(a), b) for a, b in new_eqs], k, budget)
    if y is None:
        return None
    y[p] = d
    return [sum(U[i][q] * y[q] for q in range(k)) for i in range(k)]


def integer_point(constraints: Iterable[LinIneq | Row], *, cap: int = DEFAULT_BRANCH_CAP) -> Optional[list[int]]:
    """An integer point satisfying every constraint, or ``None`` if there is none."""
    STATS.exact_calls += 1
    cons = list(constraints)
    rows = _rows_of(cons)
    if rows is None:
        return None
    k = len(next(iter(rows))) if rows else _arity(cons)
    point = _solve(rows, [], k, _Budget(cap))
    if point is not None:
        for a, b in rows.items():
            if sum(x * v for x, v in zip(a, point)) > b:
                raise AssertionError(f"witness {point} violates {a} <= {b}")
    return point


def _arity(cons: list) -> int:
    for c in cons:
        return len(c.coeffs if isinstance(c, LinIneq) else c[0])
    return 0


def exact_satisfiable(constraints: Iterable[LinIneq | Row], *, cap: int = DEFAULT_BRANCH_CAP) -> bool:
    """Complete integer satisfiability check."""
    return integer_point(constraints, cap=cap) is not None


def brute_force_point(constraints: Iterable[LinIneq | Row], box: int) -> Optional[tuple[int, ...]]:
    """Reference search over ``[-box, box]^k`` (tests only; exponential in ``k``)."""
    cons = list(constraints)
    rows = [(c.coeffs, c.bound) if isinstance(c, LinIneq) else c for c in cons]
    k = _arity(cons)
    for p in itertools.product(range(-box, box + 1), repeat=k):
        if all(sum(a * x for a, x in zip(coeffs, p)) <= b for coeffs, b in rows):
            return p
    return None
