"""Score-based selection functions and their finite sets of breakpoints."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from confgen.errors import ValidationError
from confgen.stepfn import NEG_INF, ExtendedLambda, LambdaLike, as_lambda


class Direction(str, enum.Enum):
    UP = "up"
    DOWN = "down"


class Accum(str, enum.Enum):
    MAX = "max"
    SUM = "sum"


class Selector(str, enum.Enum):
    RUNNING_MAX = "running_max"
    RUNNING_SUM = "running_sum"
    BELOW_LAMBDA = "below_lambda"
    ABOVE_LAMBDA = "above_lambda"
    RUNNING_MAX_SINGLE = "running_max_single"
    SMALLEST_SUBSET_SUM = "smallest_subset_sum"

    @property
    def code(self) -> int:
        return _CODES[self]

    @property
    def direction(self) -> Direction:
        return Direction.DOWN if self is Selector.BELOW_LAMBDA else Direction.UP

    @property
    def accum(self) -> Optional[Accum]:
        if self in (Selector.RUNNING_MAX, Selector.RUNNING_MAX_SINGLE):
            return Accum.MAX
        if self in (Selector.RUNNING_SUM, Selector.SMALLEST_SUBSET_SUM):
            return Accum.SUM
        return None

    @property
    def streaming(self) -> bool:
        """Whether the selector supports partial generation."""
        return self in (Selector.RUNNING_MAX, Selector.RUNNING_SUM, Selector.RUNNING_MAX_SINGLE)


_CODES = {
    Selector.RUNNING_MAX: 0,
    Selector.RUNNING_SUM: 1,
    Selector.BELOW_LAMBDA: 2,
    Selector.ABOVE_LAMBDA: 3,
    Selector.RUNNING_MAX_SINGLE: 4,
    Selector.SMALLEST_SUBSET_SUM: 5,
}


@dataclass(frozen=True)
class ScoreSequence:
    scores: tuple
    direction: Direction = Direction.UP

    def __post_init__(self):
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        object.__setattr__(self, "direction", Direction(self.direction))
        if not self.scores:
            raise ValidationError("score sequence must be non-empty")
        if not all(np.isfinite(self.scores)):
            raise ValidationError("scores must be finite")

    def __len__(self):
        return len(self.scores)


@dataclass(frozen=True)
class SelectionSpec:
    kind: Selector
    direction: Optional[Direction] = None
    dedup: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", Selector(self.kind))
        if self.direction is None:
            object.__setattr__(self, "direction", self.kind.direction)
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.direction is not self.kind.direction:
            raise ValidationError(
                f"{self.kind.value} needs direction {self.kind.direction.value!r}, "
                f"got {self.direction.value!r}"
            )

    @property
    def accum(self) -> Optional[Accum]:
        return self.kind.accum

    def validate(self, scores, direction: Optional[Direction] = None) -> np.ndarray:
        """Check ``scores`` against this spec and return them as a float array."""
        if isinstance(scores, ScoreSequence):
            direction = scores.direction
            scores = scores.scores
        if direction is not None and Direction(direction) is not self.direction:
            raise ValidationError(
                f"score direction {Direction(direction).value!r} does not match "
                f"{self.kind.value} ({self.direction.value!r})"
            )
        arr = np.asarray(scores, dtype=float).reshape(-1)
        if arr.size == 0:
            raise ValidationError("score sequence must be non-empty")
        if not np.isfinite(arr).all():
            raise ValidationError("scores must be finite")
        if self.kind is Selector.RUNNING_SUM and (arr < 0).any():
            raise ValidationError("running_sum needs non-negative scores for nesting")
        return arr


@dataclass(frozen=True)
class SelectionOutput:
    indices: tuple  # 1-based element indices
    pulled_count: int
    truncated: bool = False

    @property
    def size(self) -> int:
        return len(self.indices)


def _as_scores(scores) -> np.ndarray:
    if isinstance(scores, ScoreSequence):
        scores = scores.scores
    arr = np.asarray(scores, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValidationError("score sequence must be non-empty")
    return arr


def stopping_time(scores, lam: LambdaLike, accum: Accum | str) -> int:
    """First (1-based) ``t`` whose accumulated score exceeds ``lam``, capped at the length."""
    arr = _as_scores(scores)
    accum = Accum(accum)
    x = as_lambda(lam).to_float()
    acc = 0.0
    for t, s in enumerate(arr.tolist(), start=1):
        if t == 1:
            acc = s
        elif accum is Accum.SUM:
            acc = acc + s
        elif s > acc:
            acc = s
        if acc > x:
            return t
    return arr.size


def _descending_order(arr: np.ndarray) -> np.ndarray:
    # stable: ties keep ascending original index
    return np.argsort(-arr, kind="stable")


def _dedup(indices, keys):
    seen = set()
    out = []
    for i in indices:
        k = keys[i - 1]
        if k in seen:
            continue
        seen.add(k)
        out.append(i)
    return tuple(out)


def select(
    spec: SelectionSpec,
    scores,
    lam: LambdaLike,
    keys: Optional[Sequence[str]] = None,
) -> SelectionOutput:
    return _select(spec, spec.validate(scores), lam, keys)


def _select(spec: SelectionSpec, arr: np.ndarray, lam, keys=None) -> SelectionOutput:
    lam = as_lambda(lam)
    x = lam.to_float()
    T = arr.size
    kind = spec.kind
    if kind in (Selector.RUNNING_MAX, Selector.RUNNING_SUM):
        tau = stopping_time(arr, lam, kind.accum)
        out = SelectionOutput(tuple(range(1, tau + 1)), tau)
    elif kind is Selector.RUNNING_MAX_SINGLE:
        tau = stopping_time(arr, lam, Accum.MAX)
        out = SelectionOutput((tau,), tau)
    elif kind is Selector.BELOW_LAMBDA:
        out = SelectionOutput(tuple(int(i) + 1 for i in np.flatnonzero(arr <= x)), T)
    elif kind is Selector.ABOVE_LAMBDA:
        out = SelectionOutput(tuple(int(i) + 1 for i in np.flatnonzero(arr > x)), T)
    else:
        order = _descending_order(arr)
        tau = stopping_time(arr[order], lam, Accum.SUM)
        out = SelectionOutput(tuple(sorted(int(i) + 1 for i in order[:tau])), T)
    if spec.dedup and keys is not None:
        if len(keys) != T:
            raise ValidationError("dedup keys must match the score length")
        out = SelectionOutput(_dedup(out.indices, keys), out.pulled_count)
    return out


def _candidates(kind: Selector, arr: np.ndarray) -> np.ndarray:
    if kind in (Selector.BELOW_LAMBDA, Selector.ABOVE_LAMBDA):
        return np.unique(arr)
    seq = arr[_descending_order(arr)] if kind is Selector.SMALLEST_SUBSET_SUM else arr
    if kind.accum is Accum.SUM:
        acc = np.cumsum(seq)
    else:
        acc = np.maximum.accumulate(seq)
    # the last accumulated value never changes the (already capped) output
    return np.unique(acc[:-1])


def breakpoints(spec: SelectionSpec, scores, keys: Optional[Sequence[str]] = None) -> list:
    """Sorted finite lambdas at which ``select(spec, scores, .)`` changes its output.

    ``select`` is constant on ``(-inf, b_1)`` and on each ``[b_j, b_j+1)``.
    """
    arr = spec.validate(scores)
    out = []
    prev = _select(spec, arr, NEG_INF, keys).indices
    for b in _candidates(spec.kind, arr).tolist():
        cur = _select(spec, arr, ExtendedLambda.finite(b), keys).indices
        if cur != prev:
            out.append(b)
            prev = cur
    return out


def conservative_output(spec: SelectionSpec, scores, keys=None) -> SelectionOutput:
    """The output at lambda = +inf (full prefix, full set, or empty for above_lambda)."""
    from confgen.stepfn import POS_INF

    return select(spec, scores, POS_INF, keys)
