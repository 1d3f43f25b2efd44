"""Instance-level admissibility aggregation and per-record admissibility profiles."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from confgen import _backend
from confgen.errors import ConfigurationError, ValidationError
from confgen.records import GenerationRecord, InstanceAdmissibilities, RecordBatch
from confgen.selection import SelectionSpec, Selector, breakpoints, select
from confgen.stepfn import NEG_INF, ExtendedLambda, StepFunction, as_lambda


class Agg(str, enum.Enum):
    MAX = "max"
    MIN = "min"
    RECALL = "recall"
    COUNT_AT_LEAST = "count_at_least"

    @property
    def code(self) -> int:
        return ("max", "min", "recall", "count_at_least").index(self.value)


COMPATIBLE = {
    Selector.RUNNING_MAX: {Agg.MAX, Agg.RECALL, Agg.COUNT_AT_LEAST},
    Selector.RUNNING_SUM: {Agg.MAX, Agg.RECALL, Agg.COUNT_AT_LEAST},
    Selector.BELOW_LAMBDA: {Agg.MAX, Agg.RECALL, Agg.COUNT_AT_LEAST},
    Selector.SMALLEST_SUBSET_SUM: {Agg.MAX, Agg.RECALL, Agg.COUNT_AT_LEAST},
    Selector.ABOVE_LAMBDA: {Agg.MIN},
    Selector.RUNNING_MAX_SINGLE: {Agg.MAX, Agg.MIN},
}


class IncompatibleSpecWarning(UserWarning):
    """Selector/aggregator pair without a monotone profile guarantee."""


@dataclass(frozen=True)
class AdmissibilitySpec:
    """How selected elements' admissibilities combine into one value.

    ``a_max``, ``abstain_value`` and ``a_min`` are in the caller's original
    scale. Internally everything is shifted down by ``a_min`` so that
    admissibility is non-negative; see :attr:`top` and :attr:`abstain`.
    """

    agg: Agg
    a_max: Optional[float] = 1.0
    abstain_value: Optional[float] = None
    a_min: float = 0.0
    beta: Optional[float] = None
    k: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "agg", Agg(self.agg))
        if self.agg is Agg.RECALL:
            if self.beta is None or not 0.0 <= self.beta <= 1.0:
                raise ValidationError("recall needs beta in [0, 1]")
        if self.agg is Agg.COUNT_AT_LEAST:
            if self.k is None or int(self.k) != self.k or self.k < 1:
                raise ValidationError("count_at_least needs an integer k >= 1")
            object.__setattr__(self, "k", int(self.k))
        if self.agg in (Agg.RECALL, Agg.COUNT_AT_LEAST) and self.a_min != 0:
            raise ValidationError(f"{self.agg.value} is an indicator; a_min must be 0")
        if self.a_max is not None:
            if not self.a_max > self.a_min:
                raise ValidationError("a_max must exceed a_min")
            ab = self.a_max if self.abstain_value is None else self.abstain_value
            if not self.a_min <= ab <= self.a_max:
                raise ValidationError("abstain value must lie in [a_min, a_max]")
        elif self.abstain_value is not None and self.abstain_value < self.a_min:
            raise ValidationError("abstain value must be >= a_min")

    @property
    def top(self) -> Optional[float]:
        """Shifted upper bound ``a_max - a_min``."""
        return None if self.a_max is None else self.a_max - self.a_min

    @property
    def abstain(self) -> float:
        """Shifted admissibility of the abstention output."""
        v = self.abstain_value if self.abstain_value is not None else self.a_max
        if v is None:
            raise ConfigurationError("abstain value needs a_max or an explicit abstain_value")
        return v - self.a_min

    @property
    def param(self) -> float:
        if self.agg is Agg.RECALL:
            return float(self.beta)
        if self.agg is Agg.COUNT_AT_LEAST:
            return float(self.k)
        return 0.0

    def shift(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float) - self.a_min

    def _need_top(self, why: str) -> float:
        if self.a_max is None:
            raise ConfigurationError(f"a_max must be set: {why}")
        return self.top


def is_compatible(sel: SelectionSpec, adm: AdmissibilitySpec) -> bool:
    return adm.agg in COMPATIBLE[sel.kind]


def default_normalizer(values) -> float:
    return math.fsum(values)


def aggregate(
    spec: AdmissibilitySpec,
    selected_values: Sequence[float],
    normalizer: Optional[float] = None,
    all_values: Optional[Sequence[float]] = None,
) -> float:
    """Admissibility of a selection from its elements' (shifted) admissibilities.

    Empty selections give 0 under ``max`` and ``a_max`` under ``min``.
    ``recall`` and ``count_at_least`` return 0 or ``a_max``. Without a
    ``normalizer``, recall divides by the sum of ``all_values``.
    """
    vals = [float(v) for v in selected_values]
    agg = spec.agg
    if agg is Agg.MAX:
        if not vals:
            spec._need_top("empty selection under max")
            return 0.0
        return max(vals)
    if agg is Agg.MIN:
        if not vals:
            return spec._need_top("empty selection under min")
        return min(vals)
    top = spec._need_top(f"{agg.value} scales its indicator by a_max")
    total = 0.0
    for v in vals:
        total = total + v
    if agg is Agg.RECALL:
        if normalizer is None:
            if all_values is None:
                raise ConfigurationError("recall needs a normalizer or all instance values")
            normalizer = default_normalizer(all_values)
        if normalizer == 0.0 or total / normalizer >= spec.beta:
            return top
        return 0.0
    return top if total >= spec.k else 0.0


def _check_values(adm: AdmissibilitySpec, shifted: np.ndarray):
    if np.any(shifted < 0):
        raise ValidationError("instance admissibility below a_min")
    if adm.a_max is not None and np.any(shifted > adm.top):
        raise ValidationError("instance admissibility above a_max")


def instance_profile(
    scores,
    adms,
    sel: SelectionSpec,
    adm: AdmissibilitySpec,
    keys: Optional[Sequence[str]] = None,
) -> StepFunction:
    """Admissibility of ``sel``'s output as a step function of lambda (shifted scale).

    This is the direct route: one selection and one aggregation per segment.
    """
    if isinstance(adms, InstanceAdmissibilities):
        normalizer, values = adms.normalizer, adms.values
    else:
        normalizer, values = None, adms
    arr = sel.validate(scores)
    shifted = adm.shift(values)
    if shifted.size != arr.size:
        raise ValidationError("scores and admissibilities differ in length")
    _check_values(adm, shifted)
    if not is_compatible(sel, adm):
        warnings.warn(
            f"{sel.kind.value} with {adm.agg.value} has no monotone guarantee",
            IncompatibleSpecWarning,
            stacklevel=2,
        )
    sv = shifted.tolist()
    if adm.agg is Agg.RECALL and normalizer is None:
        normalizer = default_normalizer(sv)
    bps = breakpoints(sel, arr, keys)
    lams = [NEG_INF] + [ExtendedLambda.finite(b) for b in bps]
    seg = []
    for lam in lams:
        out = select(sel, arr, lam, keys)
        seg.append(aggregate(adm, [sv[i - 1] for i in out.indices], normalizer))
    return StepFunction(bps, seg, adm.abstain)


def record_profile(record: GenerationRecord, sel: SelectionSpec, adm: AdmissibilitySpec):
    sel.validate(record.scores)
    return instance_profile(record.scores, record.adms, sel, adm, record.dedup_keys)


@dataclass
class ProfileBatch:
    """Profiles of many records in flat arrays (shifted scale).

    Record ``r`` owns ``breakpoints[bp_offsets[r]:bp_offsets[r+1]]`` and
    ``values[bp_offsets[r]+r : bp_offsets[r+1]+r+1]``; ``sizes`` and
    ``pulled`` share the layout of ``values``. ``at_inf`` is the abstention
    admissibility shared by all records.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    sizes: np.ndarray
    pulled: np.ndarray
    bp_offsets: np.ndarray
    at_inf: float

    @property
    def n(self) -> int:
        return len(self.bp_offsets) - 1

    def _value_slice(self, r):
        return slice(self.bp_offsets[r] + r, self.bp_offsets[r + 1] + r + 1)

    def profile(self, r: int) -> StepFunction:
        b = self.breakpoints[self.bp_offsets[r] : self.bp_offsets[r + 1]]
        return StepFunction(b, self.values[self._value_slice(r)], self.at_inf)

    def profiles(self) -> list:
        return [self.profile(r) for r in range(self.n)]

    def summed(self):
        """``(merged_breakpoints, segment_sums, sum_at_inf)`` with records added in order."""
        merged = np.unique(self.breakpoints)
        sums = _backend.kernels.sum_profiles(
            self.breakpoints, self.values, self.bp_offsets, merged
        )
        acc = 0.0
        for _ in range(self.n):
            acc += self.at_inf
        return merged, sums, acc

    def mean(self) -> StepFunction:
        merged, sums, at_inf = self.summed()
        return StepFunction(merged, sums / self.n, at_inf / self.n)

    def at(self, lam):
        """Per-record ``(admissibility, output_size, pulled_count)`` at ``lam``."""
        lam = as_lambda(lam)
        k = _backend.kernels
        if lam.kind > 0:
            last = self.bp_offsets[1:] + np.arange(self.n)
            return (
                np.full(self.n, self.at_inf),
                self.sizes[last].copy(),
                self.pulled[last].copy(),
            )
        x = lam.to_float()
        v, s = k.eval_profiles(self.breakpoints, self.values, self.sizes, self.bp_offsets, x)
        _, p = k.eval_profiles(self.breakpoints, self.values, self.pulled, self.bp_offsets, x)
        return v, s, p

    def monotone_fraction(self, include_inf: bool = False) -> float:
        ok = 0
        for r in range(self.n):
            v = self.values[self._value_slice(r)]
            good = bool(np.all(np.diff(v) >= 0))
            if include_inf:
                good = good and self.at_inf >= v[-1]
            ok += good
        return ok / self.n


def _perm(batch: RecordBatch, kind: Selector) -> np.ndarray:
    total = batch.scores.size
    idx = np.arange(total, dtype=np.int64)
    if kind in (Selector.RUNNING_MAX, Selector.RUNNING_SUM, Selector.RUNNING_MAX_SINGLE):
        return idx
    rec = np.repeat(np.arange(batch.n), batch.lengths)
    key = -batch.scores if kind is Selector.SMALLEST_SUBSET_SUM else batch.scores
    return np.lexsort((idx, key, rec)).astype(np.int64)


def build_profiles(
    records,
    sel: SelectionSpec,
    adm: AdmissibilitySpec,
    kernels=None,
) -> ProfileBatch:
    """Profiles for every record, through the batch kernel where it applies.

    Deduplicated selections (other than the single-element selector) go
    through :func:`instance_profile` record by record.
    """
    batch = records if isinstance(records, RecordBatch) else RecordBatch.from_records(records)
    if batch.direction is not sel.direction:
        raise ValidationError(
            f"records use direction {batch.direction.value!r}, "
            f"{sel.kind.value} needs {sel.direction.value!r}"
        )
    if batch.lengths.min() < 1:
        raise ValidationError("every record needs at least one element")
    if sel.kind is Selector.RUNNING_SUM and np.any(batch.scores < 0):
        raise ValidationError("running_sum needs non-negative scores for nesting")
    if not np.all(np.isfinite(batch.scores)):
        raise ValidationError("scores must be finite")
    top = adm._need_top("profiles are bounded by a_max")
    shifted = adm.shift(batch.adms)
    _check_values(adm, shifted)
    if not is_compatible(sel, adm):
        warnings.warn(
            f"{sel.kind.value} with {adm.agg.value} has no monotone guarantee",
            IncompatibleSpecWarning,
            stacklevel=2,
        )
    norms = batch.normalizers.copy()
    if adm.agg is Agg.RECALL:
        for r in np.flatnonzero(np.isnan(norms)):
            norms[r] = default_normalizer(
                shifted[batch.offsets[r] : batch.offsets[r + 1]].tolist()
            )
    norms = np.nan_to_num(norms, nan=0.0)

    if sel.dedup and batch.keys is not None and sel.kind is not Selector.RUNNING_MAX_SINGLE:
        return _build_direct(batch, shifted, norms, sel, adm)

    k = kernels or _backend.kernels
    bps, vals, counts, off = k.build_profiles(
        batch.scores,
        shifted,
        batch.offsets,
        _perm(batch, sel.kind),
        norms,
        sel.kind.code,
        adm.agg.code,
        adm.param,
        top,
    )
    if sel.kind is Selector.RUNNING_MAX_SINGLE:
        sizes = np.ones_like(counts)
    else:
        sizes = counts
    if sel.kind.streaming:
        pulled = counts
    else:
        pulled = np.repeat(batch.lengths, np.diff(off) + 1)
    return ProfileBatch(bps, vals, sizes, pulled, off, adm.abstain)


def _build_direct(batch, shifted, norms, sel, adm) -> ProfileBatch:
    bps, vals, sizes, pulled = [], [], [], []
    off = [0]
    for r in range(batch.n):
        lo, hi = batch.offsets[r], batch.offsets[r + 1]
        arr = batch.scores[lo:hi]
        sv = shifted[lo:hi].tolist()
        keys = None if batch.keys is None else batch.keys[r]
        b = breakpoints(sel, arr, keys)
        for lam in [NEG_INF] + [ExtendedLambda.finite(x) for x in b]:
            out = select(sel, arr, lam, keys)
            vals.append(aggregate(adm, [sv[i - 1] for i in out.indices], norms[r]))
            sizes.append(out.size)
            pulled.append(out.pulled_count)
        bps.extend(b)
        off.append(len(bps))
    return ProfileBatch(
        np.array(bps, dtype=float),
        np.array(vals, dtype=float),
        np.array(sizes, dtype=np.int64),
        np.array(pulled, dtype=np.int64),
        np.array(off, dtype=np.int64),
        adm.abstain,
    )
