"""Piecewise values over the parameter space.

Two representations share one interface (a *space*):

* ``TreeSpace`` -- region trees for any number of parameters.  A ``Node``
  carries a canonical ``LinIneq`` label; its ``yes`` child covers the
  settings where the label holds, ``no`` those where its integer complement
  holds.  Labels strictly increase (by ``LinIneq.key``) along every path,
  every path is Fourier-Motzkin satisfiable together with the space's
  assumption, and sibling subtrees are never equal.
* ``ListSpace`` -- breakpoint lists for a single parameter.

All operations go through ``space.apply(fn, *parts)``: the inputs are
refined to a common partition and ``fn`` maps the tuple of region values to
either a value or a small *split tree* (``Leaf``/``Node`` with arbitrary,
possibly non-canonical labels) that subdivides the region further.  The
leaf functions below (``leaf_min``, ``leaf_guard``, ``leaf_argmax``...)
produce such split trees and are shared by both spaces.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

from .linear import (
    NEG_FN,
    AffineFn,
    LinIneq,
    aff_add,
    aff_guard_split,
    aff_le,
    aff_scale,
    canonical_polarity,
    format_affine,
    format_ineq,
    neg_ineq,
    parse_affine,
    parse_constraint,
)
from .sat import exact_satisfiable, fm_satisfiable

log = logging.getLogger(__name__)


class TreeInvariantError(AssertionError):
    """A partition violates one of its structural invariants."""


class OutsideAssumption(ValueError):
    """A parameter setting does not satisfy the space's assumption."""


class EmptyAssumption(ValueError):
    """The assumption admits no integer parameter setting."""


# ------------------------------------------------------------------- trees


@dataclass(frozen=True)
class Leaf:
    value: Any


@dataclass(frozen=True)
class Node:
    label: LinIneq
    yes: "Tree"
    no: "Tree"


Tree = Leaf | Node


class _Empty:
    """Marker for a subtree without integer points."""

    def __repr__(self) -> str:
        return "EMPTY"


EMPTY = _Empty()


def split(c, yes, no):
    """Split tree ``if c then yes else no``; ``c`` may be a bool or a raw inequality.

    ``yes``/``no`` are values or split trees.
    """
    if c is True:
        return yes
    if c is False:
        return no
    y = yes if isinstance(yes, (Leaf, Node)) else Leaf(yes)
    n = no if isinstance(no, (Leaf, Node)) else Leaf(no)
    return y if y == n else Node(c, y, n)


def tree_labels(t) -> set[LinIneq]:
    out: set[LinIneq] = set()
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, Node):
            out.add(u.label)
            stack.append(u.yes)
            stack.append(u.no)
    return out


def tree_leaves(t) -> list[Leaf]:
    out = []
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, Node):
            stack.append(u.no)
            stack.append(u.yes)
        else:
            out.append(u)
    return out


def _cofactor(t, c: LinIneq, holds: bool):
    if isinstance(t, Leaf):
        return t
    if t.label == c:
        return _cofactor(t.yes if holds else t.no, c, holds)
    yes = _cofactor(t.yes, c, holds)
    no = _cofactor(t.no, c, holds)
    if yes is t.yes and no is t.no:
        return t
    return yes if yes == no else Node(t.label, yes, no)


def _canonical_labels(t):
    """Flip nodes whose label is not in canonical polarity."""
    if isinstance(t, Leaf):
        return t
    lab, negated = canonical_polarity(t.label)
    yes, no = _canonical_labels(t.yes), _canonical_labels(t.no)
    if negated:
        yes, no = no, yes
    return yes if yes == no else Node(lab, yes, no)


def leaf_bound(n_labels: int, k: int) -> int:
    """Largest leaf count of a region tree over ``n_labels`` distinct labels in ``k`` dimensions."""
    return sum(math.comb(n_labels, i) for i in range(min(k, n_labels) + 1))


# --------------------------------------------------------- leaf functions
#
# Leaf functions receive the region values of their inputs and return a
# value or a split tree.


def leaf_add(f: AffineFn, g: AffineFn) -> AffineFn:
    return aff_add(f, g)


def leaf_scale(c: int, k: int) -> Callable[[AffineFn], AffineFn]:
    return lambda f: aff_scale(c, f, k)


def leaf_min(f: AffineFn, g: AffineFn):
    return split(aff_le(f, g), f, g)


def leaf_max(f: AffineFn, g: AffineFn):
    return split(aff_le(f, g), g, f)


def leaf_guard(test: AffineFn, value: AffineFn):
    return split(aff_guard_split(test), value, NEG_FN)


def leaf_argmax(current: int, *values: AffineFn):
    """Index choice: keep ``current`` where its value is maximal, else the smallest maximal index.

    Realized as a scan over the indices in order that switches only on a
    strict improvement, starting from ``current``.
    """

    def scan(best: int, i: int):
        if i == len(values):
            return best
        if i == best:
            return scan(best, i + 1)
        # values[i] <= values[best] keeps best
        return split(aff_le(values[i], values[best]), scan(best, i + 1), scan(i, i + 1))

    return scan(current, 0)


def leaf_select(index: int, *values):
    return values[index]


# -------------------------------------------------------------- TreeSpace


class TreeSpace:
    """Region trees over ``k`` parameters restricted to ``assumption``."""

    kind = "tree"

    def __init__(self, k: int, assumption: Sequence[LinIneq] = (), *, check_leaf_bound: bool = True):
        self.k = k
        self.assumption = tuple(assumption)
        self.check_leaf_bound = check_leaf_bound
        if not fm_satisfiable(self.assumption) or not exact_satisfiable(self.assumption):
            raise EmptyAssumption("assumption admits no integer parameter setting")
        self._dirty = False

    # -- construction

    def leaf(self, value) -> Leaf:
        return Leaf(value)

    def _sat(self, path: tuple[LinIneq, ...]) -> bool:
        return fm_satisfiable(self.assumption + path)

    def _exact(self, path: tuple[LinIneq, ...]) -> bool:
        return exact_satisfiable(self.assumption + path)

    def _join(self, path, c: LinIneq, yes, no, sat: Callable | None = None):
        """Node ``c`` over ``yes``/``no`` under ``path``, dropped when one child covers both sides."""
        if yes is EMPTY:
            return no
        if no is EMPTY:
            return yes
        if yes == no:
            return yes
        if isinstance(yes, Leaf) and isinstance(no, Leaf):
            return Node(c, yes, no)
        sat = sat or self._sat
        if self._restrict(no, path + (c,), sat) == yes:
            return no
        if self._restrict(yes, path + (neg_ineq(c),), sat) == no:
            return yes
        return Node(c, yes, no)

    def _restrict(self, t, path, sat):
        """``t`` with branches that are empty under ``path`` removed."""
        if isinstance(t, Leaf):
            return t
        pos, neg = t.label, neg_ineq(t.label)
        s_yes, s_no = sat(path + (pos,)), sat(path + (neg,))
        if s_yes and s_no:
            yes = self._restrict(t.yes, path + (pos,), sat)
            no = self._restrict(t.no, path + (neg,), sat)
            return yes if yes == no else Node(t.label, yes, no)
        if s_yes:
            return self._restrict(t.yes, path, sat)
        if s_no:
            return self._restrict(t.no, path, sat)
        return EMPTY

    def apply(self, fn: Callable, *trees, relevant: Callable | None = None):
        """Common refinement of ``trees`` with ``fn`` applied per region.

        ``relevant(trees)`` may restrict which inputs are refined below the
        current node (inputs outside it are passed to ``fn`` as ``None``
        when they are not leaves).
        """
        self._dirty = False
        out = self._apply((), None, tuple(trees), fn, relevant)
        if self._dirty:
            out = self._rebuild((), out)
        if out is EMPTY:
            raise TreeInvariantError("result covers no integer point")
        return out

    def _apply(self, path, last, trees, fn, relevant):
        idx = relevant(trees) if relevant is not None else range(len(trees))
        best: LinIneq | None = None
        for i in idx:
            t = trees[i]
            if isinstance(t, Node) and (best is None or t.label.key < best.key):
                best = t.label
        if best is None:
            args = [t.value if isinstance(t, Leaf) else None for t in trees]
            return self._graft(path, last, fn(*args))
        pos, neg = best, neg_ineq(best)
        s_yes = self._sat(path + (pos,))
        s_no = self._sat(path + (neg,))
        if s_yes and s_no:
            yes = self._apply(path + (pos,), best, tuple(t.yes if isinstance(t, Node) and t.label == best else t for t in trees), fn, relevant)
            no = self._apply(path + (neg,), best, tuple(t.no if isinstance(t, Node) and t.label == best else t for t in trees), fn, relevant)
            return self._join(path, best, yes, no)
        if s_yes or s_no:
            side = s_yes
            sub = tuple((t.yes if side else t.no) if isinstance(t, Node) and t.label == best else t for t in trees)
            return self._apply(path, last, sub, fn, relevant)
        return EMPTY

    def _graft(self, path, last, r):
        if not isinstance(r, (Leaf, Node)):
            return Leaf(r)
        if isinstance(r, Leaf):
            return r
        r = _canonical_labels(r)
        labels = tree_labels(r)
        if last is None or min(c.key for c in labels) > last.key:
            return self._rebuild(path, r)
        # out of order below this path: fix the whole result afterwards
        self._dirty = True
        return r

    def _rebuild(self, path, t):
        """Ordered, pruned, canonical tree equivalent to ``t`` under ``path``."""
        if isinstance(t, Leaf):
            return t
        c = min(tree_labels(t), key=lambda x: x.key)
        pos, neg = c, neg_ineq(c)
        s_yes = self._sat(path + (pos,))
        s_no = self._sat(path + (neg,))
        if s_yes and s_no:
            return self._join(path, c, self._rebuild(path + (pos,), _cofactor(t, c, True)), self._rebuild(path + (neg,), _cofactor(t, c, False)))
        if s_yes:
            return self._rebuild(path, _cofactor(t, c, True))
        if s_no:
            return self._rebuild(path, _cofactor(t, c, False))
        return EMPTY

    def normalize(self, t):
        """Re-establish ordering, canonical polarity and path satisfiability."""
        out = self._rebuild((), _canonical_labels(t))
        if out is EMPTY:
            raise TreeInvariantError("tree covers no integer point")
        return out

    def from_raw(self, r):
        """Partition from a value or split tree."""
        if not isinstance(r, (Leaf, Node)):
            return Leaf(r)
        return self.normalize(r)

    def select(self, sigma, values: dict[int, Any]):
        """Per region, the value partition chosen by the index partition ``sigma``."""
        order = sorted(values)
        pos = {i: j + 1 for j, i in enumerate(order)}
        memo: dict[int, frozenset] = {}

        def indices(t) -> frozenset:
            key = id(t)
            got = memo.get(key)
            if got is None:
                got = frozenset(u.value for u in tree_leaves(t))
                memo[key] = got
            return got

        def relevant(trees):
            return [0, *(pos[i] for i in indices(trees[0]))]

        def pick(index, *vals):
            return vals[pos[index] - 1]

        return self.apply(pick, sigma, *(values[i] for i in order), relevant=relevant)

    # -- queries

    def in_assumption(self, point: Sequence[int]) -> bool:
        return all(c.holds(point) for c in self.assumption)

    def value_at(self, t, point: Sequence[int]):
        if len(point) != self.k:
            raise ValueError(f"expected {self.k} parameter values, got {len(point)}")
        if not self.in_assumption(point):
            raise OutsideAssumption(f"{tuple(point)} violates the assumption")
        while isinstance(t, Node):
            t = t.yes if t.label.holds(point) else t.no
        return t.value

    def equal(self, a, b) -> bool:
        if a == b:
            return True
        out = self.apply(lambda x, y: x == y, a, b)
        return all(u.value for u in tree_leaves(out))

    def leaf_count(self, t) -> int:
        return len(tree_leaves(t))

    def label_count(self, t) -> int:
        return len(tree_labels(t))

    def leaves(self, t) -> list:
        return [u.value for u in tree_leaves(t)]

    def regions(self, t) -> list[tuple[list[LinIneq], Any]]:
        """``(path constraints, value)`` per leaf, in pre-order."""
        out = []

        def walk(u, path):
            if isinstance(u, Leaf):
                out.append((list(path), u.value))
                return
            walk(u.yes, path + [u.label])
            walk(u.no, path + [neg_ineq(u.label)])

        walk(t, [])
        return out

    def numbers(self, t) -> Iterable[int]:
        """Every finite number in labels and affine leaf values."""
        for c in tree_labels(t):
            yield from c.coeffs
            yield c.bound
        for u in tree_leaves(t):
            if isinstance(u.value, AffineFn):
                yield from u.value.numbers()

    def purge(self, t):
        """Drop regions without integer points (exact check)."""

        def walk(u, path):
            if isinstance(u, Leaf):
                return u
            pos, neg = u.label, neg_ineq(u.label)
            yes = walk(u.yes, path + (pos,)) if exact_satisfiable(self.assumption + path + (pos,)) else EMPTY
            no = walk(u.no, path + (neg,)) if exact_satisfiable(self.assumption + path + (neg,)) else EMPTY
            return self._join(path, u.label, yes, no, self._exact)

        out = walk(t, ())
        if out is EMPTY:
            raise TreeInvariantError("tree covers no integer point")
        return out

    def to_tree(self, t):
        return t

    def validate(self, t) -> None:
        """Check ordering, canonical polarity, path satisfiability, sibling distinctness, leaf-count bound."""

        def walk(u, path, last):
            if isinstance(u, Leaf):
                return
            c = u.label
            if len(c.coeffs) != self.k:
                raise TreeInvariantError(f"label {c} has wrong arity")
            if canonical_polarity(c)[0] != c:
                raise TreeInvariantError(f"label {c} is not in canonical polarity")
            if last is not None and not c.key > last.key:
                raise TreeInvariantError(f"label {c} does not follow {last}")
            if u.yes == u.no:
                raise TreeInvariantError(f"equal children below {c}")
            for sub, cons in ((u.yes, c), (u.no, neg_ineq(c))):
                p = path + (cons,)
                if not self._sat(p):
                    raise TreeInvariantError(f"unsatisfiable path {[str(x) for x in p]}")
                walk(sub, p, c)

        walk(t, (), None)
        if self.check_leaf_bound:
            n = self.label_count(t)
            leaves = self.leaf_count(t)
            bound = leaf_bound(n, self.k)
            if leaves > bound:
                raise TreeInvariantError(f"{leaves} leaves exceed the bound {bound} for {n} labels, k={self.k}")


# -------------------------------------------------------------- BreakList


@dataclass(frozen=True)
class BreakList:
    """Values on consecutive intervals of the domain split after each breakpoint.

    With domain ``[lo, hi]`` (either end may be unbounded) and breakpoints
    ``z0 < ... < zr`` the intervals are ``[lo, z0], [z0+1, z1], ..., [zr+1, hi]``.
    """

    breaks: tuple[int, ...]
    values: tuple

    def lookup(self, p: int):
        return self.values[bisect.bisect_left(self.breaks, p)]


class ListSpace:
    """Breakpoint lists for one parameter restricted to ``assumption``."""

    kind = "list"

    def __init__(self, k: int, assumption: Sequence[LinIneq] = ()):
        if k != 1:
            raise ValueError("breakpoint lists need exactly one parameter")
        self.k = 1
        self.assumption = tuple(assumption)
        lo = hi = None
        for c in self.assumption:
            a, b = c.coeffs[0], c.bound
            if a > 0:
                v = b // a
                hi = v if hi is None else min(hi, v)
            else:
                v = -(b // -a)
                lo = v if lo is None else max(lo, v)
        if lo is not None and hi is not None and lo > hi:
            raise EmptyAssumption("assumption admits no integer parameter setting")
        self.lo, self.hi = lo, hi

    def leaf(self, value) -> BreakList:
        return BreakList((), (value,))

    def _intervals(self, bl: BreakList):
        starts = [self.lo, *(z + 1 for z in bl.breaks)]
        ends = [*bl.breaks, self.hi]
        return list(zip(starts, ends, bl.values))

    def _resolve(self, r, a, b, out: list) -> None:
        """Append ``(a', b', value)`` pieces of split tree ``r`` on ``[a, b]``."""
        if a is not None and b is not None and a > b:
            return
        if not isinstance(r, (Leaf, Node)):
            out.append((a, b, r))
            return
        if isinstance(r, Leaf):
            out.append((a, b, r.value))
            return
        coef, bound = r.label.coeffs[0], r.label.bound
        if coef > 0:
            cut = bound // coef  # label holds for p <= cut
            self._resolve(r.yes, a, cut if b is None else min(b, cut), out)
            self._resolve(r.no, cut + 1 if a is None else max(a, cut + 1), b, out)
        else:
            cut = -(bound // -coef)  # label holds for p >= cut
            self._resolve(r.no, a, cut - 1 if b is None else min(b, cut - 1), out)
            self._resolve(r.yes, cut if a is None else max(a, cut), b, out)

    def _assemble(self, pieces) -> BreakList:
        breaks: list[int] = []
        values: list = []
        for a, b, v in pieces:
            if values and values[-1] == v:
                continue
            if values:
                breaks.append(a - 1)
            values.append(v)
        return BreakList(tuple(breaks), tuple(values))

    def apply(self, fn: Callable, *lists: BreakList, relevant: Callable | None = None) -> BreakList:
        cuts = sorted(set().union(*(bl.breaks for bl in lists)))
        pieces: list = []
        starts = [self.lo, *(z + 1 for z in cuts)]
        ends = [*cuts, self.hi]
        for a, b in zip(starts, ends):
            probe = b if b is not None else (a if a is not None else 0)
            args = [bl.lookup(probe) for bl in lists]
            self._resolve(fn(*args), a, b, pieces)
        if not pieces:
            raise TreeInvariantError("result covers no integer point")
        return self._assemble(pieces)

    def from_raw(self, r) -> BreakList:
        pieces: list = []
        self._resolve(r, self.lo, self.hi, pieces)
        return self._assemble(pieces)

    def normalize(self, bl: BreakList) -> BreakList:
        return self._assemble(self._intervals(bl))

    def select(self, sigma: BreakList, values: dict[int, BreakList]) -> BreakList:
        order = sorted(values)
        pos = {i: j for j, i in enumerate(order)}
        return self.apply(lambda idx, *vals: vals[pos[idx]], sigma, *(values[i] for i in order))

    def in_assumption(self, point: Sequence[int]) -> bool:
        return all(c.holds(point) for c in self.assumption)

    def value_at(self, bl: BreakList, point: Sequence[int]):
        if len(point) != 1:
            raise ValueError(f"expected 1 parameter value, got {len(point)}")
        if not self.in_assumption(point):
            raise OutsideAssumption(f"{tuple(point)} violates the assumption")
        return bl.lookup(point[0])

    def equal(self, a: BreakList, b: BreakList) -> bool:
        return self.normalize(a) == self.normalize(b)

    def leaf_count(self, bl: BreakList) -> int:
        return len(bl.values)

    def label_count(self, bl: BreakList) -> int:
        return len(bl.breaks)

    def leaves(self, bl: BreakList) -> list:
        return list(bl.values)

    def regions(self, bl: BreakList) -> list[tuple[list[LinIneq], Any]]:
        out = []
        for a, b, v in self._intervals(bl):
            cons = []
            if a is not None and a != self.lo:
                cons.append(LinIneq((-1,), -a))
            if b is not None and b != self.hi:
                cons.append(LinIneq((1,), b))
            out.append((cons, v))
        return out

    def numbers(self, bl: BreakList) -> Iterable[int]:
        yield from bl.breaks
        for v in bl.values:
            if isinstance(v, AffineFn):
                yield from v.numbers()

    def purge(self, bl: BreakList) -> BreakList:
        return bl

    def to_tree(self, bl: BreakList):
        """Equivalent ordered region tree (labels ``p1 >= z + 1``, largest breakpoint first)."""
        t = Leaf(bl.values[0])
        for z, v in zip(bl.breaks, bl.values[1:]):
            t = Node(LinIneq((-1,), -(z + 1)), Leaf(v), t)
        return t

    def validate(self, bl: BreakList) -> None:
        if len(bl.values) != len(bl.breaks) + 1:
            raise TreeInvariantError("value count must be breakpoint count + 1")
        if any(x >= y for x, y in zip(bl.breaks, bl.breaks[1:])):
            raise TreeInvariantError(f"breakpoints not ascending: {bl.breaks}")
        if bl.breaks and self.lo is not None and bl.breaks[0] < self.lo:
            raise TreeInvariantError("breakpoint below the domain")
        if bl.breaks and self.hi is not None and bl.breaks[-1] >= self.hi:
            raise TreeInvariantError("breakpoint at or above the domain end")
        if any(x == y for x, y in zip(bl.values, bl.values[1:])):
            raise TreeInvariantError("adjacent intervals carry equal values")


Space = TreeSpace | ListSpace


def make_space(k: int, assumption: Sequence[LinIneq] = (), repr: str = "auto") -> Space:
    """``list`` (or ``auto`` with one parameter) gives breakpoint lists, otherwise region trees."""
    if repr == "list" or (repr == "auto" and k == 1):
        return ListSpace(k, assumption)
    if repr not in ("tree", "auto"):
        raise ValueError(f"unknown representation {repr!r}")
    return TreeSpace(k, assumption)


# ------------------------------------------------------- lifted operators


def align(space: Space, a, b):
    return space.apply(lambda x, y: (x, y), a, b)


def lift_add(space: Space, a, b):
    return space.apply(leaf_add, a, b)


def lift_scale(space: Space, c: int, a):
    return space.apply(leaf_scale(c, space.k), a)


def lift_min(space: Space, a, b):
    return space.apply(leaf_min, a, b)


def lift_max(space: Space, a, b):
    return space.apply(leaf_max, a, b)


def lift_guard(space: Space, test, value):
    return space.apply(leaf_guard, test, value)


def argmax_keep_current(space: Space, sigma, values: Sequence):
    return space.apply(leaf_argmax, sigma, *values)


# ---------------------------------------------------------- text formats


def format_value(v, names: Sequence[str] = ()) -> str:
    if isinstance(v, AffineFn):
        return format_affine(v, names)
    return str(v)


def format_pretty(t, names: Sequence[str] = (), fmt: Callable = format_value) -> str:
    """Nested ``if <ineq> then ... else ...`` text of a region tree."""
    if isinstance(t, Leaf):
        return fmt(t.value, names)
    return f"if {format_ineq(t.label, names)} then {format_pretty(t.yes, names, fmt)} else {format_pretty(t.no, names, fmt)}"


def format_regions(regions: Iterable[tuple[Sequence[LinIneq], Any]], names: Sequence[str] = (), fmt: Callable = format_value) -> list[str]:
    return [f"[{'; '.join(format_ineq(c, names) for c in cons)}] -> {fmt(v, names)}" for cons, v in regions]


def parse_regions(lines: Iterable[str], names: Sequence[str]) -> list[tuple[list[LinIneq], AffineFn]]:
    """Inverse of ``format_regions`` for affine values."""
    out = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if not line.startswith("[") or "] -> " not in line:
            raise ValueError(f"malformed region line {line!r}")
        body, value = line[1:].split("] -> ", 1)
        cons: list[LinIneq] = []
        for part in body.split(";"):
            if part.strip():
                for c in parse_constraint(part, names):
                    if c is False:
                        raise ValueError(f"contradictory region constraint {part!r}")
                    if c is not True:
                        cons.append(c)
        out.append((cons, parse_affine(value, names)))
    return out


def from_regions(space: Space, regions: Sequence[tuple[Sequence[LinIneq], Any]]):
    """Partition whose value on each listed region is the region's value.

    The regions must cover the assumption; where several overlap the first
    one listed wins.
    """
    if not regions:
        raise ValueError("no regions")
    out = None
    for cons, v in regions:
        t = Leaf(v)
        for c in reversed(cons):
            t = Node(c, t, Leaf(None))
        part = space.from_raw(t)
        out = part if out is None else space.apply(lambda a, b: b if a is None else a, out, part)
    if None in space.leaves(out):
        raise ValueError("regions do not cover the parameter space")
    return out
