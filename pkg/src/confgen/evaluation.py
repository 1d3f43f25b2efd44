"""Coverage sweeps, Monte Carlo checks of the guarantee, and the tree-subset demo."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, fields
from typing import Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from confgen.admissibility import (
    AdmissibilitySpec,
    Agg,
    IncompatibleSpecWarning,
    build_profiles,
    is_compatible,
)
from confgen.calibrate import (
    _calibrate_summary,
    _diag_summary,
    _Summary,
    head,
    tail,
)
from confgen.errors import ValidationError
from confgen.records import RecordBatch
from confgen.selection import Direction, SelectionSpec, Selector
from confgen.stepfn import ExtendedLambda

DEFAULT_GAMMA_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))

SINGLE_SPLIT_NOTE = (
    "single calibration/test split: the guarantee holds in expectation over "
    "calibration draws, so a few rows may dip below gamma"
)


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    lambda_hat: ExtendedLambda
    mean_test_admissibility: float
    mean_output_size: float
    mean_pulled: float
    n_cal: int
    n_test: int
    se: float = float("nan")
    H_bar: float = float("nan")


@dataclass(frozen=True)
class ForestRow(SweepRow):
    majority_meaningful: bool = False


@dataclass(frozen=True)
class CoverageRow:
    gamma: float
    lambda_hat: float  # median over reps
    mean_test_admissibility: float
    se: float
    mean_output_size: float
    mean_pulled: float
    H_bar: float
    upper_bound: float
    frac_below_gamma: float
    frac_abstain: float
    n_cal: int
    n_test: int
    reps: int

    @property
    def lower_ok(self) -> bool:
        return self.mean_test_admissibility >= self.gamma - 3 * self.se

    @property
    def upper_ok(self) -> bool:
        return self.mean_test_admissibility <= self.upper_bound + 3 * self.se


def _mean_se(x: np.ndarray) -> Tuple[float, float]:
    m = float(np.mean(x))
    if x.size < 2:
        return m, 0.0
    return m, float(np.std(x, ddof=1) / math.sqrt(x.size))


def sweep(
    cal,
    test,
    sel: SelectionSpec,
    adm: AdmissibilitySpec,
    gamma_grid: Sequence[float] = DEFAULT_GAMMA_GRID,
) -> list:
    """Calibrate on ``cal`` for each gamma and report test-set averages, sorted by gamma.

    Test admissibility is the profile value at lambda-hat, i.e. the same
    aggregator applied to the selected output (the abstain value at +inf).
    """
    cal_pb = build_profiles(cal, sel, adm)
    test_pb = build_profiles(test, sel, adm)
    summ = _Summary.of(cal_pb)
    # H here is the jump slack of the calibration set itself, a single-split proxy
    with_h = cal_pb.n >= 2 and adm.a_max is not None
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for g in sorted(gamma_grid):
            res = _calibrate_summary(summ, adm, g, cal_pb)
            vals, sizes, pulled = test_pb.at(res.lambda_hat)
            m, se = _mean_se(vals + adm.a_min)
            h = float("nan")
            if with_h:
                h = _diag_summary(summ, cal_pb, adm, g).H
            rows.append(
                SweepRow(
                    gamma=float(g),
                    lambda_hat=res.lambda_hat,
                    mean_test_admissibility=m,
                    mean_output_size=float(np.mean(sizes)),
                    mean_pulled=float(np.mean(pulled)),
                    n_cal=cal_pb.n,
                    n_test=test_pb.n,
                    se=se,
                    H_bar=h,
                )
            )
    return rows


@dataclass(frozen=True)
class ProcessSpec:
    """Synthetic record generator.

    Each record has ``n_elements`` elements (an int, or an inclusive
    ``(low, high)`` range drawn uniformly). Scores come from ``score_dist``
    with ``score_params``; element ``t`` is admissible (value ``a_max``) with
    probability ``logistic(link_slope * score + link_intercept)``, or with
    the constant ``link_prob`` when given. Scores are negated for selectors
    that expect smaller-is-better.
    """

    n_elements: Union[int, Tuple[int, int]] = 10
    score_dist: str = "normal"
    score_params: Tuple[float, float] = (0.0, 1.0)
    link_slope: float = 2.0
    link_intercept: float = -1.5
    link_prob: Optional[float] = None
    a_max: float = 1.0
    seed: int = 0

    def __post_init__(self):
        ne = self.n_elements
        if isinstance(ne, (tuple, list)):
            lo, hi = (int(v) for v in ne)
            if not 1 <= lo <= hi:
                raise ValidationError("n_elements range must satisfy 1 <= low <= high")
            object.__setattr__(self, "n_elements", (lo, hi))
        elif int(ne) < 1:
            raise ValidationError("n_elements must be >= 1")
        p1, p2 = self.score_params
        if self.score_dist not in ("normal", "uniform", "lognormal", "exponential"):
            raise ValidationError(f"unknown score distribution {self.score_dist!r}")
        if self.score_dist in ("normal", "lognormal") and not p2 > 0:
            raise ValidationError("score scale must be positive")
        if self.score_dist == "uniform" and not p2 > p1:
            raise ValidationError("uniform needs low < high")
        if self.score_dist == "exponential" and not p1 > 0:
            raise ValidationError("exponential needs a positive scale")
        if self.link_prob is not None and not 0.0 <= self.link_prob <= 1.0:
            raise ValidationError("link probability must lie in [0, 1]")
        if not self.a_max > 0:
            raise ValidationError("a_max must be positive")

    def _scores(self, rng, size):
        p1, p2 = self.score_params
        if self.score_dist == "normal":
            return rng.normal(p1, p2, size)
        if self.score_dist == "uniform":
            return rng.uniform(p1, p2, size)
        if self.score_dist == "lognormal":
            return rng.lognormal(p1, p2, size)
        return rng.exponential(p1, size)

    def draw(self, rng: np.random.Generator, n: int, direction=Direction.UP) -> RecordBatch:
        if isinstance(self.n_elements, tuple):
            lengths = rng.integers(self.n_elements[0], self.n_elements[1] + 1, size=n)
        else:
            lengths = np.full(n, int(self.n_elements))
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        total = int(offsets[-1])
        s = self._scores(rng, total)
        if self.link_prob is not None:
            p = np.full(total, self.link_prob)
        else:
            p = 1.0 / (1.0 + np.exp(-(self.link_slope * s + self.link_intercept)))
        adm = (rng.random(total) < p) * float(self.a_max)
        if Direction(direction) is Direction.DOWN:
            s = -s
        return RecordBatch(s, adm, offsets, Direction(direction), np.full(n, np.nan))


def simulate(
    proc: ProcessSpec,
    n_cal: int,
    n_test: int,
    reps: int,
    sel: SelectionSpec,
    adm: AdmissibilitySpec,
    gamma_grid: Sequence[float] = DEFAULT_GAMMA_GRID,
) -> list:
    """Repeat (draw, calibrate, test) ``reps`` times and average per gamma.

    Each rep also runs the upper-bound diagnostics on the calibration set
    plus the first test record, giving the rep-average jump slack ``H_bar``.
    """
    if reps < 1 or n_cal < 1 or n_test < 1:
        raise ValidationError("reps, n_cal and n_test must be positive")
    grid = sorted(float(g) for g in gamma_grid)
    G = len(grid)
    adm_v = np.empty((reps, G))
    lam_v = np.empty((reps, G))
    size_v = np.empty((reps, G))
    pull_v = np.empty((reps, G))
    h_v = np.empty((reps, G))
    if not is_compatible(sel, adm):
        warnings.warn(
            f"{sel.kind.value} with {adm.agg.value} has no monotone profile; "
            "coverage may fall below gamma",
            IncompatibleSpecWarning,
            stacklevel=2,
        )
    children = np.random.SeedSequence(proc.seed).spawn(reps)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, child in enumerate(children):
            rng = np.random.default_rng(child)
            batch = proc.draw(rng, n_cal + n_test, sel.direction)
            pb = build_profiles(batch, sel, adm)
            cal_pb = head(pb, n_cal)
            test_pb = tail(pb, n_cal)
            summ = _Summary.of(cal_pb)
            plus_pb = head(pb, n_cal + 1)
            summ1 = _Summary.of(plus_pb)
            for j, g in enumerate(grid):
                res = _calibrate_summary(summ, adm, g)
                vals, sizes, pulled = test_pb.at(res.lambda_hat)
                adm_v[i, j] = float(np.mean(vals)) + adm.a_min
                lam_v[i, j] = res.lambda_hat.to_float()
                size_v[i, j] = float(np.mean(sizes))
                pull_v[i, j] = float(np.mean(pulled))
                h_v[i, j] = _diag_summary(summ1, plus_pb, adm, g).H
    top = adm.top
    rows = []
    for j, g in enumerate(grid):
        m, se = _mean_se(adm_v[:, j])
        # median: one abstaining rep would make the mean infinite
        lam_mean = float(np.median(lam_v[:, j]))
        h_bar = float(np.mean(h_v[:, j]))
        rows.append(
            CoverageRow(
                gamma=g,
                lambda_hat=lam_mean,
                mean_test_admissibility=m,
                se=se,
                mean_output_size=float(np.mean(size_v[:, j])),
                mean_pulled=float(np.mean(pull_v[:, j])),
                H_bar=h_bar,
                upper_bound=g + top / (n_cal + 1) + h_bar,
                frac_below_gamma=float(np.mean(adm_v[:, j] < g)),
                frac_abstain=float(np.mean(np.isposinf(lam_v[:, j]))),
                n_cal=n_cal,
                n_test=n_test,
                reps=reps,
            )
        )
    return rows


def forest_records(correct, weights) -> RecordBatch:
    """One record per row: scores are tree weights, admissibilities are tree correctness."""
    correct = np.asarray(correct, dtype=float)
    if correct.ndim != 2:
        raise ValidationError("prediction_correct must be an n x T matrix")
    if not np.all((correct == 0) | (correct == 1)):
        raise ValidationError("prediction_correct entries must be 0 or 1")
    n, T = correct.shape
    w = np.asarray(weights, dtype=float)
    if w.ndim == 1 and w.shape == (T,):
        w = np.broadcast_to(w, (n, T))
    if w.shape != (n, T):
        raise ValidationError(f"weights must have shape ({T},) or ({n}, {T})")
    if not np.all(w > 0):
        raise ValidationError("tree weights must be positive")
    offsets = np.arange(n + 1, dtype=np.int64) * T
    return RecordBatch(
        np.ascontiguousarray(w, dtype=float).reshape(-1),
        np.ascontiguousarray(correct).reshape(-1),
        offsets,
        Direction.UP,
        np.full(n, np.nan),
    )


def forest_specs(k: int, T: int):
    if k > T:
        raise ValidationError(f"k={k} exceeds the number of trees T={T}")
    return (
        SelectionSpec(Selector.SMALLEST_SUBSET_SUM),
        AdmissibilitySpec(Agg.COUNT_AT_LEAST, a_max=1.0, k=k),
    )


def forest_demo(
    prediction_correct,
    weights,
    k: int,
    gamma_grid: Sequence[float] = DEFAULT_GAMMA_GRID,
    test_correct=None,
    test_weights=None,
) -> list:
    """Smallest-weighted-subset of trees with at least ``k`` correct ones.

    Without a test matrix the calibration rows are reused as test rows.
    ``majority_meaningful`` marks gammas whose mean subset size is at most
    ``2k - 1``, where a majority vote of the subset is then correct.
    """
    cal = forest_records(prediction_correct, weights)
    T = int(np.asarray(prediction_correct).shape[1])
    sel, adm = forest_specs(k, T)
    if test_correct is None:
        test = cal
    else:
        test = forest_records(test_correct, weights if test_weights is None else test_weights)
    return [
        ForestRow(
            **{f.name: getattr(r, f.name) for f in fields(r)},
            majority_meaningful=r.mean_output_size <= 2 * k - 1,
        )
        for r in sweep(cal, test, sel, adm, gamma_grid)
    ]


CSV_COLUMNS = (
    "gamma",
    "lambda_hat",
    "mean_test_admissibility",
    "se",
    "mean_output_size",
    "mean_pulled",
    "H_bar",
)


def _fmt(v) -> str:
    if isinstance(v, ExtendedLambda):
        return str(v.to_json())
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_csv(rows, out: TextIO, header_lines: Sequence[str] = ()) -> None:
    """CSV with the fixed leading columns, then any extra fields of the row type."""
    for line in header_lines:
        out.write(f"# {line}\n")
    if not rows:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        return
    names = [f.name for f in fields(rows[0])]
    extra = [c for c in names if c not in CSV_COLUMNS]
    cols = list(CSV_COLUMNS) + extra
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(cols)
    for r in rows:
        writer.writerow([_fmt(getattr(r, c, float("nan"))) for c in cols])
