import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oracle_lambda_hat
from confgen.admissibility import AdmissibilitySpec, Agg, build_profiles
from confgen.calibrate import (
    AbstentionWarning,
    CoincidentJumpWarning,
    calibrate,
    cp_quantile,
    crc_calibrate,
    upper_bound_diag,
)
from confgen.errors import ConfigurationError, ValidationError
from confgen.records import GenerationRecord
from confgen.selection import SelectionSpec, Selector
from confgen.stepfn import NEG_INF, POS_INF, StepFunction

BELOW = SelectionSpec(Selector.BELOW_LAMBDA)
MAX = AdmissibilitySpec(Agg.MAX)


def test_worked_example(two_records):
    res = calibrate(two_records, BELOW, MAX, 0.6)
    assert res.lambda_hat == 0.7
    assert res.threshold == 0.9
    assert res.achieved == 1.0
    assert res.n == 2
    assert res.to_dict() == {
        "lambda_hat": 0.7, "gamma": 0.6, "threshold": 0.9, "achieved": 1.0, "n": 2
    }


def test_trace_lists_every_merged_breakpoint(two_records):
    res = calibrate(two_records, BELOW, MAX, 0.6)
    lams = [lam for lam, _ in res.trace]
    assert lams == [NEG_INF, 0.5, 0.7, POS_INF]
    assert [v for _, v in res.trace] == [0.0, 0.5, 1.0, 1.0]


def test_gamma_zero_gives_neg_inf(two_records):
    assert calibrate(two_records, BELOW, MAX, 0).lambda_hat == NEG_INF


def test_unattainable_abstains_with_warning(two_records):
    with pytest.warns(AbstentionWarning):
        res = calibrate(two_records, BELOW, MAX, 0.7)
    assert res.lambda_hat == POS_INF and res.abstains
    assert res.threshold == pytest.approx(1.05)
    assert res.to_dict()["lambda_hat"] == "inf"


def test_gamma_above_a_max(two_records):
    with pytest.warns(AbstentionWarning) as rec:
        res = calibrate(two_records, BELOW, MAX, 1.2)
    assert res.lambda_hat == POS_INF
    assert any("exceeds a_max" in str(w.message) for w in rec)


def test_low_abstain_value_warns(two_records):
    adm = AdmissibilitySpec(Agg.MAX, abstain_value=0.3)
    with pytest.warns(AbstentionWarning, match="abstain value"):
        calibrate(two_records, BELOW, adm, 0.5)


def test_empty_records():
    with pytest.raises(ValidationError, match="empty calibration set"):
        calibrate([], BELOW, MAX, 0.5)


def test_negative_gamma():
    recs = [GenerationRecord.make("a", [0.1], [1], "down")]
    with pytest.raises(ValidationError):
        calibrate(recs, BELOW, MAX, -0.1)


def test_decimal_reading_of_gamma():
    # nine records, one unit jump each at 0, 1, ..., 8
    recs = [GenerationRecord.make(i, [float(i)], [1], "down") for i in range(9)]
    # (n+1) * 0.1 = 1 exactly, so one jump is enough; the binary double 0.1
    # sits slightly above 1/10 and would demand a second jump
    assert calibrate(recs, BELOW, MAX, 0.1).lambda_hat == 0.0
    assert calibrate(recs, BELOW, MAX, 0.5).lambda_hat == 4.0


def test_a_min_reported_in_original_scale():
    adm = AdmissibilitySpec(Agg.MAX, a_max=1.0, a_min=-1.0)
    recs = [
        GenerationRecord.make("a", [0.5], [1], "down"),
        GenerationRecord.make("b", [0.7], [1], "down"),
    ]
    # shifted: values in [0, 2], gamma' = 0.2 + 1 = 1.2 -> threshold' 1.8
    res = calibrate(recs, BELOW, adm, 0.2)
    assert res.lambda_hat == 0.7
    assert res.threshold == pytest.approx(0.8)
    assert res.achieved == 1.0
    assert res.trace[0][1] == -1.0


def test_coincident_jump_warning():
    recs = [GenerationRecord.make(i, [1.0, 2.0], [0, 1], "down") for i in range(5)]
    with pytest.warns(CoincidentJumpWarning):
        calibrate(recs, BELOW, MAX, 0.5)


def test_profile_batch_input(two_records):
    pb = build_profiles(two_records, BELOW, MAX)
    assert calibrate(pb, BELOW, MAX, 0.6).lambda_hat == 0.7


# ---- cp / crc ------------------------------------------------------------

def test_cp_quantile_examples():
    assert cp_quantile([0.1, 0.4, 0.2, 0.3], 0.5) == 0.3
    assert cp_quantile([0.1, 0.4, 0.2, 0.3], 1.0) == POS_INF
    assert cp_quantile([7], 0.5) == 7
    with pytest.raises(ValidationError):
        cp_quantile([1.0], 0)
    with pytest.raises(ValidationError):
        cp_quantile([], 0.5)


def test_crc_examples():
    assert crc_calibrate([StepFunction([2.0], [0, 1], 1)], 0.5, 10.0) == 2.0
    zeros = [StepFunction.constant(0.0) for _ in range(3)]
    assert crc_calibrate(zeros, 0.5, 4.0) == 4.0
    ones = [StepFunction.constant(1.0) for _ in range(3)]
    assert crc_calibrate(ones, 0.5, 4.0) == NEG_INF


def test_crc_respects_cap():
    f = StepFunction([1.0, 5.0], [0, 0.2, 1], 1)
    assert crc_calibrate([f], 0.5, 3.0) == 3.0
    assert crc_calibrate([f], 0.5, 5.0) == 5.0


@settings(max_examples=60)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=12), st.sampled_from([0.2, 0.45, 0.7]))
def test_crc_recovers_calibrate(ints, gamma):
    scores = [i / 4 for i in ints]
    recs = [GenerationRecord.make(i, [s], [1], "down") for i, s in enumerate(scores)]
    profiles = [StepFunction([s], [0, 1], 1) for s in scores]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lam = calibrate(recs, BELOW, MAX, gamma).lambda_hat
    if lam.is_finite:
        assert crc_calibrate(profiles, gamma, 100.0) == lam


@settings(max_examples=100)
@given(
    st.lists(st.floats(-100, 100, allow_nan=False, allow_subnormal=False), min_size=1, max_size=30),
    st.sampled_from([round(0.05 * i, 2) for i in range(1, 20)]),
)
def test_cp_recovery(scores, gamma):
    recs = [GenerationRecord.make(i, [s], [1], "down") for i, s in enumerate(scores)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lam = calibrate(recs, BELOW, MAX, gamma).lambda_hat
    assert lam == cp_quantile(scores, gamma)


# ---- oracle and invariants ----------------------------------------------

PAIRS = [
    (Selector.RUNNING_MAX, Agg.MAX), (Selector.RUNNING_MAX, Agg.RECALL),
    (Selector.RUNNING_SUM, Agg.COUNT_AT_LEAST), (Selector.BELOW_LAMBDA, Agg.MAX),
    (Selector.ABOVE_LAMBDA, Agg.MIN), (Selector.RUNNING_MAX_SINGLE, Agg.MIN),
    (Selector.SMALLEST_SUBSET_SUM, Agg.RECALL), (Selector.SMALLEST_SUBSET_SUM, Agg.COUNT_AT_LEAST),
]


@st.composite
def instances(draw):
    kind, agg = draw(st.sampled_from(PAIRS))
    n = draw(st.integers(1, 12))
    recs = []
    for _ in range(n):
        T = draw(st.integers(1, 6))
        lo = 0 if kind in (Selector.RUNNING_SUM, Selector.SMALLEST_SUBSET_SUM) else -8
        sc = [x / 4 for x in draw(st.lists(st.integers(lo, 8), min_size=T, max_size=T))]
        if kind is Selector.BELOW_LAMBDA:
            sc = [-x for x in sc]
        ad = draw(st.lists(st.sampled_from([0.0, 0.5, 1.0] if agg in (Agg.MAX, Agg.MIN)
                                           else [0.0, 1.0]), min_size=T, max_size=T))
        recs.append((sc, ad))
    return kind, agg, recs


@settings(max_examples=150)
@given(instances(), st.sampled_from([0.0, 0.1, 0.25, 0.3, 0.5, 0.6, 0.7, 0.85, 0.9, 1.0]))
def test_calibrate_matches_oracle(inst, gamma):
    kind, agg, raw = inst
    recs = [GenerationRecord.make(i, s, a, kind.direction) for i, (s, a) in enumerate(raw)]
    adm = AdmissibilitySpec(agg, beta=0.5 if agg is Agg.RECALL else None,
                            k=1 if agg is Agg.COUNT_AT_LEAST else None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = calibrate(recs, SelectionSpec(kind), adm, gamma)
    want = oracle_lambda_hat(raw, kind.value, agg.value, gamma, beta=0.5, k=1)
    assert res.lambda_hat.to_float() == want
    if res.lambda_hat != POS_INF:
        # rounding is monotone, so the exact inequality survives as floats
        assert res.achieved >= res.threshold
    assert res.threshold == pytest.approx((res.n + 1) * gamma / res.n, rel=1e-15)


@settings(max_examples=60)
@given(instances())
def test_lambda_hat_monotone_in_gamma(inst):
    kind, agg, raw = inst
    recs = [GenerationRecord.make(i, s, a, kind.direction) for i, (s, a) in enumerate(raw)]
    adm = AdmissibilitySpec(agg, beta=0.5 if agg is Agg.RECALL else None,
                            k=1 if agg is Agg.COUNT_AT_LEAST else None)
    pb = build_profiles(recs, SelectionSpec(kind), adm)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lams = [calibrate(pb, None, adm, g).lambda_hat for g in np.linspace(0, 1, 11)]
    assert lams == sorted(lams)


# ---- diagnostics ---------------------------------------------------------

def _jump_records(points):
    # one record per (score, adm) jumping from 0 at the score
    return [GenerationRecord.make(i, [s], [a], "down") for i, (s, a) in enumerate(points)]


def test_diag_worked_example():
    # mean profile [1,2] -> [0, 0.6, 1] from five records
    recs = _jump_records([(1.0, 1), (1.0, 1), (1.0, 1), (2.0, 1), (2.0, 1)])
    # n+1 = 5 here, so the a_max/(n+1) term is 0.2
    rep = upper_bound_diag(recs, BELOW, MAX, 0.5)
    assert rep.lambda_star == 1.0
    assert rep.lambda_star_star == 2.0
    assert rep.H == pytest.approx(0.4)
    assert rep.upper_bound == pytest.approx(0.5 + 0.2 + 0.4)
    assert rep.monotone_fraction == 1.0


def test_diag_two_record_upper_bound():
    # with n+1 = 2 records, 0.5 + 0.5 = 1 is only reached at 2.0
    recs = [
        GenerationRecord.make("a", [1.0, 2.0], [0.6, 1.0], "down"),
        GenerationRecord.make("b", [1.0, 2.0], [0.6, 1.0], "down"),
    ]
    rep = upper_bound_diag(recs, BELOW, MAX, 0.5)
    assert rep.lambda_star_star == 2.0
    assert rep.H == pytest.approx(0.4)
    assert rep.upper_bound == pytest.approx(1.4)


def test_diag_constant_profile():
    # above_lambda + min: every output is admissible, the mean is constant 1
    recs = [GenerationRecord.make(i, [1.0], [1], "up") for i in range(3)]
    rep = upper_bound_diag(recs, SelectionSpec(Selector.ABOVE_LAMBDA), AdmissibilitySpec(Agg.MIN), 0.5)
    assert rep.lambda_star_star == NEG_INF
    assert rep.H == 1.0


def test_diag_needs_two_records_and_a_max():
    with pytest.raises(ValidationError):
        upper_bound_diag(_jump_records([(1.0, 1)]), BELOW, MAX, 0.5)
    with pytest.raises(ConfigurationError):
        upper_bound_diag(
            _jump_records([(1.0, 1), (2.0, 1)]), BELOW,
            AdmissibilitySpec(Agg.MAX, a_max=None, abstain_value=1.0), 0.5,
        )


@settings(max_examples=80)
@given(st.lists(st.tuples(st.integers(0, 6), st.sampled_from([0.0, 1.0])), min_size=2, max_size=15),
       st.sampled_from([0.1, 0.3, 0.5, 0.8]))
def test_H_bounded_by_coincident_jumps(points, gamma):
    recs = _jump_records([(float(s), a) for s, a in points])
    rep = upper_bound_diag(recs, BELOW, MAX, gamma)
    n1 = len(recs)
    _, counts = np.unique([s for s, a in points if a == 1] or [0], return_counts=True)
    j_max = int(counts.max())
    assert rep.H >= 0
    assert rep.upper_bound >= gamma
    # a finite lambda** sits on record jumps; the infinite ends do not
    if rep.lambda_star_star.is_finite:
        assert rep.H <= j_max / n1 + 1e-12
    assert math.isfinite(rep.upper_bound)
