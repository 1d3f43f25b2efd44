"""Right-continuous step functions on the extended real line.

A :class:`StepFunction` stores finite breakpoints ``b_1 < ... < b_k`` and
``k + 1`` segment values for ``(-inf, b_1), [b_1, b_2), ..., [b_k, inf)``.
The value at the isolated point ``lambda = +inf`` is kept separately, since
the abstention output need not agree with the last finite segment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Sequence, Union

import numpy as np

from confgen import _backend


@total_ordering
@dataclass(frozen=True)
class ExtendedLambda:
    """A point of ``[-inf, inf]``: ``kind`` is -1, 0 or +1."""

    kind: int
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in (-1, 0, 1):
            raise ValueError(f"bad kind {self.kind!r}")
        if self.kind == 0 and not math.isfinite(self.value):
            raise ValueError("finite lambda must carry a finite value")

    @classmethod
    def finite(cls, value: float) -> "ExtendedLambda":
        return cls(0, float(value))

    @property
    def is_finite(self) -> bool:
        return self.kind == 0

    def _key(self):
        return (self.kind, self.value if self.kind == 0 else 0.0)

    def __lt__(self, other):
        other = as_lambda(other)
        return self._key() < other._key()

    def __eq__(self, other):
        try:
            other = as_lambda(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def to_float(self) -> float:
        """Float view for comparisons against finite scores only."""
        if self.kind == 0:
            return self.value
        return math.inf if self.kind > 0 else -math.inf

    def to_json(self) -> Union[float, str]:
        if self.kind == 0:
            return self.value
        return "inf" if self.kind > 0 else "-inf"

    def __repr__(self):
        if self.kind == 0:
            return f"ExtendedLambda({self.value!r})"
        return "POS_INF" if self.kind > 0 else "NEG_INF"

    __str__ = lambda self: str(self.to_json())  # noqa: E731


NEG_INF = ExtendedLambda(-1)
POS_INF = ExtendedLambda(1)

LambdaLike = Union[ExtendedLambda, float, int, str]


def as_lambda(x: LambdaLike) -> ExtendedLambda:
    """Coerce floats, ints and the literals ``"inf"``/``"-inf"``."""
    if isinstance(x, ExtendedLambda):
        return x
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "+inf", "infinity", "+infinity"):
            return POS_INF
        if s in ("-inf", "-infinity"):
            return NEG_INF
        x = float(s)
    if isinstance(x, (bool,)) or not isinstance(x, (int, float, np.integer, np.floating)):
        raise TypeError(f"cannot interpret {x!r} as a lambda")
    x = float(x)
    if math.isnan(x):
        raise ValueError("lambda cannot be NaN")
    if x == math.inf:
        return POS_INF
    if x == -math.inf:
        return NEG_INF
    return ExtendedLambda.finite(x)


class StepFunction:
    """Immutable right-continuous, piecewise-constant, non-negative function."""

    __slots__ = ("breakpoints", "values", "at_inf")

    def __init__(self, breakpoints: Sequence[float], values: Sequence[float], at_inf: float):
        bps = np.array(breakpoints, dtype=float).reshape(-1)
        vals = np.array(values, dtype=float).reshape(-1)
        if vals.size != bps.size + 1:
            raise ValueError(
                f"need len(values) == len(breakpoints) + 1, got {vals.size} and {bps.size}"
            )
        if not np.all(np.isfinite(bps)):
            raise ValueError("breakpoints must be finite")
        if bps.size > 1 and not np.all(np.diff(bps) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("segment values must be finite and non-negative")
        at_inf = float(at_inf)
        if not at_inf >= 0:
            raise ValueError("value at +inf must be non-negative")
        bps.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "at_inf", at_inf)

    def __setattr__(self, name, value):
        raise AttributeError("StepFunction is immutable")

    @classmethod
    def constant(cls, value: float, at_inf: float | None = None) -> "StepFunction":
        return cls([], [value], value if at_inf is None else at_inf)

    def segment_index(self, lam: LambdaLike) -> int:
        """Index into ``values`` of the segment containing a finite or -inf lambda."""
        lam = as_lambda(lam)
        if lam.kind < 0:
            return 0
        if lam.kind > 0:
            raise ValueError("+inf is not inside any finite segment")
        return int(np.searchsorted(self.breakpoints, lam.value, side="right"))

    def __call__(self, lam: LambdaLike) -> float:
        return eval_at(self, lam)

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (
            np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.values, other.values)
            and self.at_inf == other.at_inf
        )

    def __repr__(self):
        return (
            f"StepFunction(breakpoints={self.breakpoints.tolist()}, "
            f"values={self.values.tolist()}, at_inf={self.at_inf})"
        )

    def segments(self):
        """Yield ``(left_endpoint, value)`` pairs, left endpoint of the first is NEG_INF."""
        yield NEG_INF, float(self.values[0])
        for b, v in zip(self.breakpoints, self.values[1:]):
            yield ExtendedLambda.finite(b), float(v)

    def is_non_decreasing(self, include_inf: bool = True) -> bool:
        ok = bool(np.all(np.diff(self.values) >= 0))
        if include_inf:
            ok = ok and self.at_inf >= self.values[-1]
        return ok


def eval_at(f: StepFunction, lam: LambdaLike) -> float:
    lam = as_lambda(lam)
    if lam.kind > 0:
        return f.at_inf
    return float(f.values[f.segment_index(lam)])


def _flatten(fs: Sequence[StepFunction]):
    counts = np.fromiter((f.breakpoints.size for f in fs), dtype=np.int64, count=len(fs))
    offsets = np.zeros(len(fs) + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    bps = np.concatenate([f.breakpoints for f in fs]) if len(fs) else np.empty(0)
    vals = np.concatenate([f.values for f in fs])
    return bps, vals, offsets


def summed(fs: Sequence[StepFunction]):
    """Pointwise sum of ``fs`` on the merged breakpoints.

    Returns ``(merged_breakpoints, segment_sums, sum_at_inf)``. Each sum is
    accumulated in input order, left to right, so the result is reproducible
    bit for bit by any loop that adds the same values in the same order.
    """
    if len(fs) == 0:
        raise ValueError("empty calibration set")
    bps, vals, offsets = _flatten(fs)
    merged = np.unique(bps)
    sums = _backend.kernels.sum_profiles(bps, vals, offsets, merged)
    acc = 0.0
    for f in fs:
        acc += f.at_inf
    return merged, sums, acc


def mean(fs: Sequence[StepFunction]) -> StepFunction:
    """Pointwise arithmetic mean (the average admissibility profile)."""
    merged, sums, at_inf = summed(fs)
    n = len(fs)
    return StepFunction(merged, sums / n, at_inf / n)


def float_ceil(x: Fraction) -> float:
    """Smallest float that is ``>= x``.

    A float ``v`` satisfies ``v >= x`` exactly iff ``v >= float_ceil(x)``.
    """
    f = float(x)
    if Fraction(f) < x:
        f = math.nextafter(f, math.inf)
    return f


def inf_at_least(f: StepFunction, target) -> ExtendedLambda:
    """Smallest lambda with ``f(lambda) >= target``; POS_INF when no finite segment qualifies.

    The comparison is exact: a :class:`fractions.Fraction` target is compared
    without rounding it first.
    """
    if target < 0:
        raise ValueError("target must be non-negative")
    if isinstance(target, Fraction):
        target = float_ceil(target)
    return first_at_least(f.breakpoints, f.values, target)


def first_at_least(breakpoints: np.ndarray, values: np.ndarray, target: float) -> ExtendedLambda:
    hits = np.flatnonzero(values >= target)
    if hits.size == 0:
        return POS_INF
    j = int(hits[0])
    if j == 0:
        return NEG_INF
    return ExtendedLambda.finite(float(breakpoints[j - 1]))


def sup_strictly_below(f: StepFunction, lam: LambdaLike) -> float:
    """``sup {f(l) : l < lam}``; 0 when nothing lies below (``lam`` = -inf)."""
    lam = as_lambda(lam)
    if lam.kind < 0:
        return 0.0
    if lam.kind > 0:
        return float(f.values.max())
    # segments strictly left of lam: those whose left endpoint is < lam
    j = int(np.searchsorted(f.breakpoints, lam.value, side="left"))
    return float(f.values[: j + 1].max())


def trace(f: StepFunction):
    """List of ``(breakpoint, value)`` pairs including the two infinite ends."""
    out = [(NEG_INF, float(f.values[0]))]
    out.extend((ExtendedLambda.finite(b), float(v)) for b, v in zip(f.breakpoints, f.values[1:]))
    out.append((POS_INF, f.at_inf))
    return out
