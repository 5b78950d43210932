"""Affine functions of the parameters and linear inequalities over them.

``AffineFn`` is the leaf value of a parametric value: ``-inf``, ``+inf``, or
``const + sum(coeffs[i] * p_i)``.  ``LinIneq`` is ``sum(coeffs[i] * p_i) <= bound``,
always stored gcd-reduced with a floored bound, never with an all-zero
coefficient vector (those are decided at construction by ``make_ineq``).

Inequalities are totally ordered by ``LinIneq.key``: number of non-zero
coefficients, then the coefficient vector lexicographically, then the bound.
Region-tree labels use the canonical polarity, i.e. the smaller of an
inequality and its integer complement.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

from .extint import NEG_INF, POS_INF, ExtInt

NEG = "-inf"
POS = "+inf"
AFF = "aff"


@dataclass(frozen=True)
class AffineFn:
    kind: str
    const: int = 0
    coeffs: tuple[int, ...] = ()

    @staticmethod
    def constant(value: ExtInt, k: int) -> "AffineFn":
        if value == NEG_INF:
            return AffineFn(NEG)
        if value == POS_INF:
            return AffineFn(POS)
        return AffineFn(AFF, int(value), (0,) * k)

    @staticmethod
    def proj(i: int, k: int, sign: int = 1) -> "AffineFn":
        coeffs = [0] * k
        coeffs[i] = sign
        return AffineFn(AFF, 0, tuple(coeffs))

    @property
    def is_affine(self) -> bool:
        return self.kind == AFF

    def __call__(self, point: Sequence[int]) -> ExtInt:
        if self.kind == NEG:
            return NEG_INF
        if self.kind == POS:
            return POS_INF
        return self.const + sum(a * p for a, p in zip(self.coeffs, point))

    def numbers(self) -> tuple[int, ...]:
        return (self.const, *self.coeffs) if self.kind == AFF else ()

    def __str__(self) -> str:
        return format_affine(self)


NEG_FN = AffineFn(NEG)
POS_FN = AffineFn(POS)


def format_affine(f: AffineFn, names: Sequence[str] = ()) -> str:
    if f.kind == NEG:
        return "-inf"
    if f.kind == POS:
        return "inf"
    terms = [str(f.const)]
    for i, a in enumerate(f.coeffs):
        if a:
            terms.append(f"{a}*{_pname(i, names)}")
    return " + ".join(terms)


def _pname(i: int, names: Sequence[str]) -> str:
    return names[i] if i < len(names) else f"p{i + 1}"


# ----------------------------------------------------------------- LinIneq


@dataclass(frozen=True)
class LinIneq:
    coeffs: tuple[int, ...]
    bound: int
    key: tuple = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        nnz = sum(1 for a in self.coeffs if a)
        object.__setattr__(self, "key", (nnz, self.coeffs, self.bound))

    def holds(self, point: Sequence[int]) -> bool:
        return sum(a * p for a, p in zip(self.coeffs, point)) <= self.bound

    def __lt__(self, other: "LinIneq") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return format_ineq(self)


def format_ineq(c: LinIneq, names: Sequence[str] = ()) -> str:
    lhs = " + ".join(f"{a}*{_pname(i, names)}" for i, a in enumerate(c.coeffs) if a)
    return f"{lhs} <= {c.bound}"


Ineq = Union[LinIneq, bool]


def make_ineq(coeffs: Sequence[int], bound: int) -> Ineq:
    """Reduced ``coeffs . p <= bound``, or ``True``/``False`` when it is constant."""
    g = 0
    for a in coeffs:
        g = math.gcd(g, a)
    if g == 0:
        return bound >= 0
    return LinIneq(tuple(a // g for a in coeffs), bound // g)


def neg_ineq(c: LinIneq) -> LinIneq:
    """Integer complement: ``not (a.p <= b)`` is ``-a.p <= -b - 1``."""
    return LinIneq(tuple(-a for a in c.coeffs), -c.bound - 1)


def cmp_order(c1: LinIneq, c2: LinIneq) -> int:
    return (c1.key > c2.key) - (c1.key < c2.key)


def canonical_polarity(c: LinIneq) -> tuple[LinIneq, bool]:
    """``(label, negated)``: the smaller of ``c`` and its complement, and whether it is the complement."""
    n = neg_ineq(c)
    return (n, True) if n.key < c.key else (c, False)


# -------------------------------------------------------- affine operators


def aff_add(f: AffineFn, g: AffineFn) -> AffineFn:
    if f.kind == NEG or g.kind == NEG:
        return NEG_FN
    if f.kind == POS or g.kind == POS:
        return POS_FN
    return AffineFn(AFF, f.const + g.const, tuple(a + b for a, b in zip(f.coeffs, g.coeffs)))


def aff_scale(c: int, f: AffineFn, k: int | None = None) -> AffineFn:
    if c < 0:
        raise ValueError("scale coefficient must be non-negative")
    if f.kind == NEG:
        return NEG_FN
    if f.kind == POS:
        if c:
            return POS_FN
        if k is None:
            raise ValueError("need the parameter count to build 0 * inf")
        return AffineFn.constant(0, k)
    return AffineFn(AFF, c * f.const, tuple(c * a for a in f.coeffs))


def aff_cmp_split(f: AffineFn, g: AffineFn) -> Ineq:
    """Where ``f <= g``: ``True``/``False`` if everywhere/nowhere, else the inequality.

    Both arguments must be finite affine functions.
    """
    return make_ineq(tuple(a - b for a, b in zip(f.coeffs, g.coeffs)), g.const - f.const)


def aff_le(f: AffineFn, g: AffineFn) -> Ineq:
    """Like ``aff_cmp_split`` but also decides comparisons involving infinities."""
    if f.kind == NEG or g.kind == POS:
        return True
    if f.kind == POS or g.kind == NEG:
        return False
    return aff_cmp_split(f, g)


def aff_guard_split(f: AffineFn) -> Ineq:
    """Where ``f >= 0``, i.e. ``-coeffs . p <= const``."""
    if f.kind == POS:
        return True
    if f.kind == NEG:
        return False
    return make_ineq(tuple(-a for a in f.coeffs), f.const)


# ----------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_']*)|([-+*]))")


def parse_affine_terms(text: str, names: Sequence[str]) -> tuple[int, list[int]]:
    """``(const, coeffs)`` of a sum like ``2*p1 - p2 + 3`` over the parameter ``names``."""
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ValueError(f"cannot parse linear expression {text!r} at offset {pos}")
        tokens.append(m.group(1) or m.group(2) or m.group(3))
        pos = m.end()
    coeffs = [0] * len(names)
    const = 0
    i = 0
    expect_term = True
    while i < len(tokens) or expect_term:
        if not expect_term:
            if tokens[i] not in "+-":
                raise ValueError(f"expected + or - in {text!r}")
            expect_term = True
            continue
        sign = 1
        while i < len(tokens) and tokens[i] in ("+", "-"):
            sign = -sign if tokens[i] == "-" else sign
            i += 1
        if i >= len(tokens):
            raise ValueError(f"incomplete linear expression {text!r}")
        value = sign
        tok = tokens[i]
        if tok.isdigit():
            value *= int(tok)
            i += 1
            if i < len(tokens) and tokens[i] == "*":
                i += 1
                if i >= len(tokens) or not (tokens[i][0].isalpha() or tokens[i][0] == "_"):
                    raise ValueError(f"expected a parameter after * in {text!r}")
            elif i >= len(tokens) or not (tokens[i][0].isalpha() or tokens[i][0] == "_"):
                const += value
                expect_term = False
                continue
            tok = tokens[i]
        if not (tok[0].isalpha() or tok[0] == "_"):
            raise ValueError(f"unexpected {tok!r} in {text!r}")
        if tok not in names:
            raise ValueError(f"unknown parameter {tok!r}")
        coeffs[list(names).index(tok)] += value
        i += 1
        expect_term = False
    return const, coeffs


_REL_RE = re.compile(r"(<=|>=|<|>|==|=)")


def parse_constraint(text: str, names: Sequence[str]) -> list[Ineq]:
    """Parse ``lhs REL rhs`` (``<= < >= > =``) into reduced inequalities.

    Equalities yield two inequalities; chains like ``0 <= p1 <= p2`` are
    accepted and split pairwise.
    """
    parts = _REL_RE.split(text)
    if len(parts) < 3 or len(parts) % 2 == 0:
        raise ValueError(f"expected a comparison, got {text!r}")
    out: list[Ineq] = []
    for i in range(0, len(parts) - 2, 2):
        lc, la = parse_affine_terms(parts[i], names)
        rel = parts[i + 1]
        rc, ra = parse_affine_terms(parts[i + 2], names)
        # lhs - rhs  REL  0
        diff = [x - y for x, y in zip(la, ra)]
        c0 = lc - rc
        if rel in ("<=", "<"):
            out.append(make_ineq(diff, -c0 - (1 if rel == "<" else 0)))
        elif rel in (">=", ">"):
            out.append(make_ineq([-x for x in diff], c0 - (1 if rel == ">" else 0)))
        else:
            out.append(make_ineq(diff, -c0))
            out.append(make_ineq([-x for x in diff], c0))
    return out


def param_names(k: int) -> list[str]:
    return [f"p{i + 1}" for i in range(k)]


def parse_affine(text: str, names: Sequence[str]) -> AffineFn:
    text = text.strip()
    if text in ("inf", "+inf"):
        return POS_FN
    if text == "-inf":
        return NEG_FN
    const, coeffs = parse_affine_terms(text, names)
    return AffineFn(AFF, const, tuple(coeffs))
