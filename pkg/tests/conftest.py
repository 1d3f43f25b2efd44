"""Shared oracles. These re-derive selection, aggregation and calibration from
their definitions with plain loops and exact rationals, without calling into
the package's own helpers."""
import math
from fractions import Fraction

import pytest

INF = math.inf


def oracle_select(kind, scores, lam):
    """Selected 1-based indices (sorted) at a float lambda (may be +-inf)."""
    T = len(scores)
    if kind in ("running_max", "running_sum", "running_max_single"):
        acc = None
        tau = T
        for t, s in enumerate(scores, 1):
            if acc is None:
                acc = s
            elif kind == "running_sum":
                acc += s
            else:
                acc = max(acc, s)
            if acc > lam:
                tau = t
                break
        return [tau] if kind == "running_max_single" else list(range(1, tau + 1))
    if kind == "below_lambda":
        return [i for i in range(1, T + 1) if scores[i - 1] <= lam]
    if kind == "above_lambda":
        return [i for i in range(1, T + 1) if scores[i - 1] > lam]
    # smallest subset sum: descending score, ties by ascending index
    order = sorted(range(1, T + 1), key=lambda i: (-scores[i - 1], i))
    acc = 0.0
    taken = []
    for i in order:
        acc += scores[i - 1]
        taken.append(i)
        if acc > lam:
            break
    return sorted(taken)


def oracle_agg(agg, vals, all_vals, a_max=1.0, beta=None, k=None, normalizer=None):
    if agg == "max":
        return max(vals) if vals else 0.0
    if agg == "min":
        return min(vals) if vals else a_max
    total = 0.0
    for v in vals:
        total += v
    if agg == "recall":
        n = sum(all_vals) if normalizer is None else normalizer
        return a_max if n == 0 or total / n >= beta else 0.0
    return a_max if total >= k else 0.0


def oracle_candidates(kind, scores):
    """A superset of the lambdas at which any selector's output can change."""
    c = set(scores)
    run_max, run_sum = [], []
    m = s = None
    for x in scores:
        m = x if m is None else max(m, x)
        s = x if s is None else s + x
        run_max.append(m)
        run_sum.append(s)
    c.update(run_max)
    c.update(run_sum)
    acc = 0.0
    for x in sorted(scores, reverse=True):
        acc += x
        c.add(acc)
    return c


def oracle_lambda_hat(records, kind, agg, gamma, a_max=1.0, abstain=None, beta=None, k=None):
    """Exhaustive search: smallest candidate lambda whose record-order float
    sum of admissibilities reaches (n+1)*gamma exactly; +inf otherwise."""
    n = len(records)
    target = (n + 1) * Fraction(repr(float(gamma)))
    if target > n * Fraction(repr(float(a_max))):
        return INF
    cands = {-INF}
    for scores, _ in records:
        cands |= oracle_candidates(kind, scores)
    for lam in sorted(cands):
        acc = 0.0
        for scores, adm in records:
            idx = oracle_select(kind, scores, lam)
            acc += oracle_agg(agg, [adm[i - 1] for i in idx], adm, a_max, beta, k)
        if Fraction(acc) >= target:
            return lam
    return INF


@pytest.fixture
def two_records():
    from confgen import GenerationRecord

    return [
        GenerationRecord.make("a", [0.5], [1], "down"),
        GenerationRecord.make("b", [0.7], [1], "down"),
    ]
