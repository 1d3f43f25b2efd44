"""Applying a calibrated threshold, in batch or by pulling elements one at a time."""
from __future__ import annotations

from typing import Iterable, Iterator, Optional, Protocol, Tuple

from confgen.errors import StreamingUnsupported
from confgen.records import GenerationRecord
from confgen.selection import Accum, SelectionOutput, SelectionSpec, Selector, select
from confgen.stepfn import LambdaLike, as_lambda

DEFAULT_T_MAX = 1024

Element = Tuple[float, Optional[str], object]


class ElementSource(Protocol):
    def next(self) -> Optional[Element]:
        """The next ``(score, dedup_key, payload)``, or None once exhausted."""


class IterSource:
    """Adapts any iterable of scores or ``(score, key, payload)`` tuples."""

    def __init__(self, items: Iterable):
        self._it: Iterator = iter(items)
        self.pulled = 0

    def next(self) -> Optional[Element]:
        try:
            item = next(self._it)
        except StopIteration:
            return None
        self.pulled += 1
        if isinstance(item, tuple):
            score, key, payload = (tuple(item) + (None, None))[:3]
            return float(score), key, payload
        return float(item), None, None


def apply(sel: SelectionSpec, lam_hat: LambdaLike, record: GenerationRecord) -> SelectionOutput:
    """Selection at the calibrated threshold with the whole sequence available."""
    sel.validate(record.scores)
    return select(sel, record.scores.scores, lam_hat, record.dedup_keys)


def stream_apply(
    sel: SelectionSpec,
    lam_hat: LambdaLike,
    source: ElementSource,
    t_max: int = DEFAULT_T_MAX,
) -> SelectionOutput:
    """Pull elements until the accumulated score exceeds ``lam_hat`` or the source ends.

    Only the running selectors can stop early. Hitting ``t_max`` before the
    source ends is reported through ``truncated``.
    """
    if not sel.kind.streaming:
        raise StreamingUnsupported(
            f"{StreamingUnsupported.code}: {sel.kind.value} needs the whole sequence"
        )
    x = as_lambda(lam_hat).to_float()
    use_sum = sel.kind.accum is Accum.SUM
    acc = 0.0
    t = 0
    keys = []
    truncated = False
    while True:
        if t >= t_max:
            truncated = True
            break
        item = source.next()
        if item is None:
            break
        score, key, _ = item
        if use_sum and score < 0:
            raise ValueError("running_sum needs non-negative scores")
        t += 1
        keys.append(key)
        if t == 1:
            acc = score
        elif use_sum:
            acc = acc + score
        elif score > acc:
            acc = score
        if acc > x:
            break
    if t == 0:
        raise ValueError("source produced no elements")
    if sel.kind is Selector.RUNNING_MAX_SINGLE:
        return SelectionOutput((t,), t, truncated)
    indices = tuple(range(1, t + 1))
    if sel.dedup and any(k is not None for k in keys):
        seen = set()
        kept = []
        for i in indices:
            k = keys[i - 1]
            if k is not None and k in seen:
                continue
            seen.add(k)
            kept.append(i)
        indices = tuple(kept)
    return SelectionOutput(indices, t, truncated)
