"""Threshold calibration, its split-CP and CRC special cases, and upper-bound diagnostics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from confgen.admissibility import AdmissibilitySpec, ProfileBatch, build_profiles
from confgen.errors import ValidationError
from confgen.records import GenerationRecord, RecordBatch
from confgen.selection import SelectionSpec
from confgen.stepfn import (
    NEG_INF,
    POS_INF,
    ExtendedLambda,
    StepFunction,
    as_lambda,
    first_at_least,
    float_ceil,
    sup_strictly_below,
    summed,
)

__all__ = [
    "GenerationRecord",
    "CalibrationResult",
    "DiagnosticsReport",
    "calibrate",
    "cp_quantile",
    "crc_calibrate",
    "upper_bound_diag",
    "exact",
]

COINCIDENT_JUMP_LIMIT = 0.10


class AbstentionWarning(UserWarning):
    """The target cannot be met on the calibration set; the output abstains."""


class CoincidentJumpWarning(UserWarning):
    """Many records jump at the same lambda, which inflates the upper-bound slack."""


def exact(x) -> Fraction:
    """Exact rational for a user-facing number: floats are read as the decimal they print as."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(f"{x} is not finite")
    return Fraction(repr(x))


@dataclass(frozen=True)
class CalibrationResult:
    lambda_hat: ExtendedLambda
    gamma: float
    threshold: float
    achieved: float
    n: int
    trace: list = field(repr=False, default_factory=list)
    warnings: tuple = ()

    @property
    def abstains(self) -> bool:
        return self.lambda_hat == POS_INF

    def to_dict(self, with_trace: bool = False) -> dict:
        d = {
            "lambda_hat": self.lambda_hat.to_json(),
            "gamma": self.gamma,
            "threshold": self.threshold,
            "achieved": self.achieved,
            "n": self.n,
        }
        if self.warnings:
            d["warnings"] = list(self.warnings)
        if with_trace:
            d["trace"] = [[lam.to_json(), v] for lam, v in self.trace]
        return d


@dataclass(frozen=True)
class DiagnosticsReport:
    lambda_star: ExtendedLambda
    lambda_star_star: ExtendedLambda
    H: float
    upper_bound: float
    monotone_fraction: float
    n_plus_one: int

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star.to_json(),
            "lambda_star_star": self.lambda_star_star.to_json(),
            "H": self.H,
            "upper_bound": self.upper_bound,
            "monotone_fraction": self.monotone_fraction,
            "n_plus_one": self.n_plus_one,
        }


@dataclass
class _Summary:
    """Summed calibration profile, reusable across many targets."""

    merged: np.ndarray
    sums: np.ndarray
    sum_at_inf: float
    n: int

    @classmethod
    def of(cls, pb: ProfileBatch) -> "_Summary":
        merged, sums, s_inf = pb.summed()
        return cls(merged, sums, s_inf, pb.n)

    def first_at_least(self, target_sum: Fraction) -> ExtendedLambda:
        return first_at_least(self.merged, self.sums, float_ceil(target_sum))

    def mean_at(self, lam: ExtendedLambda) -> float:
        if lam.kind > 0:
            return self.sum_at_inf / self.n
        j = 0 if lam.kind < 0 else int(np.searchsorted(self.merged, lam.value, side="right"))
        return float(self.sums[j]) / self.n

    def mean_function(self) -> StepFunction:
        return StepFunction(self.merged, self.sums / self.n, self.sum_at_inf / self.n)

    def coincident_fraction(self, pb: ProfileBatch) -> float:
        if self.merged.size == 0:
            return 0.0
        _, counts = np.unique(pb.breakpoints, return_counts=True)
        return float(np.count_nonzero(counts > 1)) / self.merged.size


def _top(adm: AdmissibilitySpec) -> Fraction:
    return exact(adm.a_max) - exact(adm.a_min)


def _abstain(adm: AdmissibilitySpec) -> Fraction:
    v = adm.abstain_value if adm.abstain_value is not None else adm.a_max
    return exact(v) - exact(adm.a_min)


def _shifted_gamma(gamma, adm: AdmissibilitySpec) -> Fraction:
    g = exact(gamma) - exact(adm.a_min)
    if g < 0:
        raise ValidationError("gamma must be >= a_min (>= 0 for unshifted admissibility)")
    return g


def _calibrate_summary(
    summ: _Summary, adm: AdmissibilitySpec, gamma, pb: Optional[ProfileBatch] = None
) -> CalibrationResult:
    n = summ.n
    g = _shifted_gamma(gamma, adm)
    notes = []
    if g > _top(adm):
        notes.append(f"gamma {gamma} exceeds a_max {adm.a_max}: guarantee is vacuous, abstaining")
        lam = POS_INF
    else:
        lam = summ.first_at_least((n + 1) * g)
        if lam == POS_INF:
            notes.append(
                f"average admissibility never reaches (n+1)/n*gamma on {n} records: abstaining"
            )
    if _abstain(adm) < g:
        notes.append("abstain value is below gamma: the abstention floor does not hold")
    if pb is not None and summ.coincident_fraction(pb) > COINCIDENT_JUMP_LIMIT:
        notes.append("more than 10% of breakpoints are shared by several records")
    for msg in notes:
        cat = CoincidentJumpWarning if "shared" in msg else AbstentionWarning
        warnings.warn(msg, cat, stacklevel=3)
    a_min = float(adm.a_min)
    threshold = float(Fraction(n + 1, n) * g + exact(adm.a_min))
    trace = [(NEG_INF, float(summ.sums[0]) / n + a_min)]
    trace.extend(
        (ExtendedLambda.finite(b), float(s) / n + a_min)
        for b, s in zip(summ.merged.tolist(), summ.sums[1:].tolist())
    )
    trace.append((POS_INF, summ.sum_at_inf / n + a_min))
    return CalibrationResult(
        lambda_hat=lam,
        gamma=float(gamma),
        threshold=threshold,
        achieved=summ.mean_at(lam) + a_min,
        n=n,
        trace=trace,
        warnings=tuple(notes),
    )


def calibrate(
    records,
    sel: SelectionSpec,
    adm: AdmissibilitySpec,
    gamma: float,
) -> CalibrationResult:
    """Smallest lambda whose calibration-average admissibility reaches ``(n+1)/n * gamma``.

    Falls back to ``POS_INF`` (abstain) when no finite lambda qualifies. The
    comparison is exact in rational arithmetic.
    """
    pb = records if isinstance(records, ProfileBatch) else build_profiles(records, sel, adm)
    if pb.n == 0:
        raise ValidationError("empty calibration set")
    return _calibrate_summary(_Summary.of(pb), adm, gamma, pb)


def cp_quantile(scores_of_truth: Sequence[float], gamma: float) -> ExtendedLambda:
    """The ``ceil((n+1) gamma)``-th smallest score, or POS_INF past the sample."""
    s = sorted(float(x) for x in scores_of_truth)
    if not s:
        raise ValidationError("need at least one calibration score")
    g = exact(gamma)
    if not 0 < g <= 1:
        raise ValidationError("gamma must lie in (0, 1]")
    n = len(s)
    k = math.ceil((n + 1) * g)
    if k > n:
        return POS_INF
    return ExtendedLambda.finite(s[k - 1])


def crc_calibrate(utility_profiles: Sequence[StepFunction], gamma: float, lambda_max: float):
    """Conformal risk control: ``inf{lam <= lambda_max : mean U(lam) >= (n+1)/n gamma} ^ lambda_max``."""
    lam_max = as_lambda(lambda_max)
    if not lam_max.is_finite:
        raise ValidationError("lambda_max must be finite")
    n = len(utility_profiles)
    merged, sums, _ = summed(utility_profiles)
    target = float_ceil((n + 1) * exact(gamma))
    allowed = np.concatenate(([True], merged <= lam_max.value))
    hits = np.flatnonzero((sums >= target) & allowed)
    if hits.size == 0:
        return lam_max
    j = int(hits[0])
    return NEG_INF if j == 0 else ExtendedLambda.finite(float(merged[j - 1]))


def _diag_summary(summ: _Summary, pb: ProfileBatch, adm: AdmissibilitySpec, gamma):
    n1 = summ.n
    if n1 < 2:
        raise ValidationError("diagnostics need at least two records")
    top = adm._need_top("the upper bound is stated for bounded admissibility")
    g = _shifted_gamma(gamma, adm)
    lam_star = summ.first_at_least(n1 * g)
    lam_ss = summ.first_at_least(n1 * g + _top(adm))
    mean_fn = summ.mean_function()
    h = max(summ.mean_at(lam_ss) - sup_strictly_below(mean_fn, lam_ss), 0.0)
    return DiagnosticsReport(
        lambda_star=lam_star,
        lambda_star_star=lam_ss,
        H=h,
        upper_bound=float(gamma) + top / n1 + h,
        monotone_fraction=pb.monotone_fraction(include_inf=True),
        n_plus_one=n1,
    )


def upper_bound_diag(
    records_plus_one,
    sel: SelectionSpec,
    adm: AdmissibilitySpec,
    gamma: float,
) -> DiagnosticsReport:
    """lambda*, lambda**, the jump slack H and the resulting upper bound on n+1 records.

    ``monotone_fraction`` is only a heuristic proxy for monotonicity in
    conditional expectation; it cannot verify it.
    """
    pb = (
        records_plus_one
        if isinstance(records_plus_one, ProfileBatch)
        else build_profiles(records_plus_one, sel, adm)
    )
    return _diag_summary(_Summary.of(pb), pb, adm, gamma)


def head(pb: ProfileBatch, m: int) -> ProfileBatch:
    """The first ``m`` records of a profile batch."""
    nb = pb.bp_offsets[m]
    nv = nb + m
    return ProfileBatch(
        pb.breakpoints[:nb],
        pb.values[:nv],
        pb.sizes[:nv],
        pb.pulled[:nv],
        pb.bp_offsets[: m + 1],
        pb.at_inf,
    )


def tail(pb: ProfileBatch, m: int) -> ProfileBatch:
    """Records ``m`` onwards of a profile batch."""
    nb = pb.bp_offsets[m]
    nv = nb + m
    return ProfileBatch(
        pb.breakpoints[nb:],
        pb.values[nv:],
        pb.sizes[nv:],
        pb.pulled[nv:],
        pb.bp_offsets[m:] - nb,
        pb.at_inf,
    )


def as_batch(records) -> RecordBatch:
    return records if isinstance(records, RecordBatch) else RecordBatch.from_records(records)
