"""Associative aggregate functions with an identity and an optional inverse."""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Any, Callable, Optional


@dataclass(frozen=True)
class Aggregate:
    name: str
    op: Callable[[Any, Any], Any]
    identity: Any
    inverse: Optional[Callable[[Any, Any], Any]] = None  # inverse(total, part) undoes part

    def fold(self, values) -> Any:
        acc = self.identity
        for x in values:
            acc = self.op(acc, x)
        return acc


def _min(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a if a <= b else b


def _max(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a if a >= b else b


SUM = Aggregate("sum", operator.add, 0, operator.sub)
XOR = Aggregate("xor", operator.xor, 0, operator.xor)
# None is the identity so that min/max work over any totally ordered type (tuples, Fractions).
MIN = Aggregate("min", _min, None)
MAX = Aggregate("max", _max, None)
OR = Aggregate("or", operator.or_, False)


def bounded_union(limit: int) -> Aggregate:
    """Union of frozensets that refuses to grow past `limit` elements."""

    def op(a: frozenset, b: frozenset) -> frozenset:
        out = a | b
        if len(out) > limit:
            raise OverflowError(f"union grew to {len(out)} > {limit}")
        return out

    return Aggregate(f"union<={limit}", op, frozenset())
