"""Extended integers: the complete lattice Z u {-inf, +inf}.

Finite values are plain Python ``int`` (arbitrary precision).  The two
infinities are the float sentinels ``NEG_INF`` and ``POS_INF``; Python
compares them exactly against ints of any size, so ``min``/``max``/``<``
work natively.  Arithmetic must go through the helpers below because the
lattice has its own rules (``-inf`` absorbs ``+inf``, ``0 * inf == 0``).
"""

from __future__ import annotations

import math
from typing import Union

ExtInt = Union[int, float]

NEG_INF: float = -math.inf
POS_INF: float = math.inf


def is_finite(a: ExtInt) -> bool:
    return a != NEG_INF and a != POS_INF


def ext_add(a: ExtInt, b: ExtInt) -> ExtInt:
    if a == NEG_INF or b == NEG_INF:
        return NEG_INF
    if a == POS_INF or b == POS_INF:
        return POS_INF
    return a + b


def ext_scale(c: int, a: ExtInt) -> ExtInt:
    """Multiply by a non-negative integer scalar (``0 * inf == 0``)."""
    if c < 0:
        raise ValueError(f"scale coefficient must be non-negative, got {c}")
    if a == NEG_INF:
        return NEG_INF
    if a == POS_INF:
        return 0 if c == 0 else POS_INF
    return c * a


def ext_min(a: ExtInt, b: ExtInt) -> ExtInt:
    return a if a <= b else b


def ext_max(a: ExtInt, b: ExtInt) -> ExtInt:
    return a if a >= b else b


def ext_guard(a: ExtInt, b: ExtInt) -> ExtInt:
    """Test of non-negativity ``a ; b``: ``b`` when ``a >= 0``, else ``-inf``."""
    return b if a >= 0 else NEG_INF


def parse_extint(text: str) -> ExtInt:
    text = text.strip()
    if text == "inf" or text == "+inf":
        return POS_INF
    if text == "-inf":
        return NEG_INF
    return int(text)


def format_extint(a: ExtInt) -> str:
    if a == POS_INF:
        return "inf"
    if a == NEG_INF:
        return "-inf"
    return str(int(a))
