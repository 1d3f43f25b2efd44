import io
import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confgen.admissibility import AdmissibilitySpec, Agg, IncompatibleSpecWarning, build_profiles
from confgen.errors import ValidationError
from confgen.evaluation import (
    DEFAULT_GAMMA_GRID,
    ProcessSpec,
    forest_demo,
    forest_records,
    forest_specs,
    simulate,
    sweep,
    write_csv,
)
from confgen.records import GenerationRecord
from confgen.selection import SelectionSpec, Selector
from confgen.stepfn import NEG_INF, POS_INF

BELOW = SelectionSpec(Selector.BELOW_LAMBDA)
RMAX = SelectionSpec(Selector.RUNNING_MAX)
MAX = AdmissibilitySpec(Agg.MAX)


def test_default_grid():
    assert DEFAULT_GAMMA_GRID[0] == 0.05 and DEFAULT_GAMMA_GRID[-1] == 0.95
    assert len(DEFAULT_GAMMA_GRID) == 19


def test_sweep_worked_example(two_records):
    rows = sweep(two_records, two_records, BELOW, MAX, [0.6, 0.0])
    assert [r.gamma for r in rows] == [0.0, 0.6]
    r0, r1 = rows
    assert r0.lambda_hat == NEG_INF
    assert r0.mean_test_admissibility == 0.0 and r0.mean_output_size == 0.0
    assert r1.lambda_hat == 0.7
    assert (r1.mean_test_admissibility, r1.mean_output_size) == (1.0, 1.0)
    assert (r1.n_cal, r1.n_test) == (2, 2)


def test_sweep_all_abstain():
    recs = [GenerationRecord.make(i, [0.1 * i, 0.5], [0, 1]) for i in range(4)]
    adm = AdmissibilitySpec(Agg.MAX, abstain_value=0.75)
    rows = sweep(recs, recs, RMAX, adm, [1.5])
    assert rows[0].lambda_hat == POS_INF
    assert rows[0].mean_test_admissibility == 0.75
    assert rows[0].mean_output_size == 2.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_sweep_monotone_for_nesting_selector(seed):
    rng = np.random.default_rng(seed)
    proc = ProcessSpec(n_elements=(1, 6), seed=seed)
    cal = proc.draw(rng, 15).records()
    test = proc.draw(rng, 15).records()
    rows = sweep(cal, test, RMAX, MAX, np.linspace(0, 1, 11))
    lams = [r.lambda_hat for r in rows]
    sizes = [r.mean_output_size for r in rows]
    assert lams == sorted(lams)
    assert sizes == sorted(sizes)
    for r in rows:
        assert 0 <= r.mean_test_admissibility <= 1 and r.mean_output_size >= 0


def test_process_validation():
    for bad in [
        dict(n_elements=0), dict(n_elements=(3, 2)), dict(score_dist="cauchy"),
        dict(score_params=(0, 0)), dict(score_dist="uniform", score_params=(1, 1)),
        dict(link_prob=1.5), dict(a_max=0), dict(score_dist="exponential", score_params=(0, 0)),
    ]:
        with pytest.raises(ValidationError):
            ProcessSpec(**bad)


@pytest.mark.parametrize("dist,params", [
    ("normal", (0, 1)), ("uniform", (-1, 1)), ("lognormal", (0, 0.5)), ("exponential", (1, 0)),
])
def test_process_reproducible(dist, params):
    proc = ProcessSpec(score_dist=dist, score_params=params, n_elements=(2, 5))
    a = proc.draw(np.random.default_rng(3), 10)
    b = proc.draw(np.random.default_rng(3), 10)
    assert np.array_equal(a.scores, b.scores) and np.array_equal(a.adms, b.adms)
    assert set(np.unique(a.adms)) <= {0.0, 1.0}


def test_process_negates_for_down_selectors():
    proc = ProcessSpec()
    up = proc.draw(np.random.default_rng(0), 3)
    down = proc.draw(np.random.default_rng(0), 3, "down")
    assert np.array_equal(up.scores, -down.scores)


def test_simulate_saturated():
    rows = simulate(ProcessSpec(link_prob=1.0, seed=2), 2, 5, 1, RMAX, MAX, [0.1, 0.5, 1.0])
    assert all(r.mean_test_admissibility == 1.0 for r in rows)


def test_simulate_forced_abstention():
    rows = simulate(ProcessSpec(link_prob=0.0, seed=2), 10, 10, 4, RMAX, MAX, [0.2, 0.9])
    for r in rows:
        assert r.lambda_hat == math.inf and r.frac_abstain == 1.0
        assert r.mean_test_admissibility == 1.0


def test_simulate_deterministic():
    args = (ProcessSpec(seed=11), 20, 10, 5, RMAX, MAX, [0.5, 0.8])
    a, b = io.StringIO(), io.StringIO()
    write_csv(simulate(*args), a)
    write_csv(simulate(*args), b)
    assert a.getvalue() == b.getvalue()


def test_simulate_coverage_small():
    rows = simulate(ProcessSpec(seed=5), 50, 50, 60, RMAX, MAX, [0.5, 0.7, 0.9])
    for r in rows:
        assert r.lower_ok and r.upper_ok
        assert r.H_bar >= 0


def test_simulate_warns_on_incompatible_pair():
    with pytest.warns(IncompatibleSpecWarning):
        simulate(ProcessSpec(seed=1), 5, 5, 1, SelectionSpec(Selector.ABOVE_LAMBDA), MAX, [0.5])


def test_simulate_rejects_bad_sizes():
    with pytest.raises(ValidationError):
        simulate(ProcessSpec(), 5, 5, 0, RMAX, MAX, [0.5])


# ---- forest --------------------------------------------------------------

def test_forest_all_correct_k1():
    rng = np.random.default_rng(0)
    correct = np.ones((30, 8))
    rows = forest_demo(correct, rng.uniform(0.5, 1.5, 8), 1, [0.3, 0.9, 0.95])
    for r in rows:
        assert r.mean_output_size == 1.0
        assert r.mean_test_admissibility == 1.0
        assert r.majority_meaningful


def test_forest_unattainable():
    correct = np.zeros((10, 6))
    correct[:, :2] = 1  # only k - 1 trees are ever right
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = forest_demo(correct, np.ones(6), 3, [0.1, 0.5])
    assert all(r.lambda_hat == POS_INF for r in rows)


def test_forest_validation():
    with pytest.raises(ValidationError):
        forest_demo(np.ones((3, 4)), np.ones(4), 5)
    with pytest.raises(ValidationError):
        forest_records(np.full((2, 2), 0.5), np.ones(2))
    with pytest.raises(ValidationError):
        forest_records(np.ones((2, 2)), np.array([1.0, -1.0]))
    with pytest.raises(ValidationError):
        forest_records(np.ones((2, 2)), np.ones(3))


def brute_forest_profile(correct_row, weights_row, k):
    """Every lambda in each partial-sum interval picks the same sorted prefix."""
    T = len(weights_row)
    order = sorted(range(T), key=lambda t: (-weights_row[t], t))
    partial = list(itertools.accumulate(weights_row[t] for t in order))
    pts = [-math.inf] + partial[:-1]
    vals = []
    for lam in pts:
        m = next((i + 1 for i, p in enumerate(partial) if p > lam), T)
        vals.append(1.0 if sum(correct_row[t] for t in order[:m]) >= k else 0.0)
    return pts, vals


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_forest_profile_brute_force(T, k, seed):
    k = min(k, T)
    rng = np.random.default_rng(seed)
    correct = (rng.random((6, T)) < 0.7).astype(float)
    weights = rng.integers(1, 5, (6, T)) / 2.0
    sel, adm = forest_specs(k, T)
    pb = build_profiles(forest_records(correct, weights), sel, adm)
    for r in range(6):
        f = pb.profile(r)
        w = weights[r].tolist()
        pts, vals = brute_forest_profile(correct[r].tolist(), w, k)
        # heaviest subset of each size, over all subsets
        best = [max(sum(c) for c in itertools.combinations(w, m)) for m in range(1, T + 1)]
        for lam, v in zip(pts, vals):
            assert f(lam) == v
            smallest = next((m for m, b in enumerate(best, 1) if b > lam), T)
            _, sizes, _ = pb.at(lam)
            assert sizes[r] == smallest


# ---- csv -----------------------------------------------------------------

def test_csv_layout(two_records):
    rows = sweep(two_records, two_records, BELOW, MAX, [0.0, 0.6, 1.0])
    buf = io.StringIO()
    write_csv(rows, buf, ["seed 1", "note"])
    lines = buf.getvalue().splitlines()
    assert lines[:2] == ["# seed 1", "# note"]
    assert lines[2].split(",")[:7] == [
        "gamma", "lambda_hat", "mean_test_admissibility", "se",
        "mean_output_size", "mean_pulled", "H_bar",
    ]
    assert lines[3].split(",")[1] == "-inf"
    assert lines[4].split(",")[:3] == ["0.6", "0.7", "1.0"]


def test_csv_inf_literal():
    recs = [GenerationRecord.make("a", [0.5], [0], "down"), GenerationRecord.make("b", [0.7], [0], "down")]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = sweep(recs, recs, BELOW, MAX, [0.5])
    buf = io.StringIO()
    write_csv(rows, buf)
    assert buf.getvalue().splitlines()[1].split(",")[1] == "inf"
