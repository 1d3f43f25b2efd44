"""Pure-Python kernels, selected when the compiled ``_kernels`` is unavailable.

Results must match ``_kernels.pyx`` bit for bit.

Selector codes: 0 running max, 1 running sum, 2 below lambda, 3 above lambda,
4 running max single, 5 smallest subset sum.
Aggregator codes: 0 max, 1 min, 2 recall, 3 count at least.
"""
import numpy as np

BACKEND = "python"


def _agg(agg, mx, mn, sm, cnt, norm, param, a_max):
    if agg == 0:
        return mx if cnt > 0 else 0.0
    if agg == 1:
        return mn if cnt > 0 else a_max
    if agg == 2:
        if norm == 0.0 or sm / norm >= param:
            return a_max
        return 0.0
    return a_max if sm >= param else 0.0


def build_profiles(scores, adms, offsets, perm, normalizers, sel, agg, param, a_max):
    """Instance admissibility profiles for a batch of ragged records.

    ``perm`` lists, record by record, the global element indices in entry
    order: generation order for the running selectors, descending score for
    smallest-subset-sum, ascending score for the threshold selectors.

    Returns ``(breakpoints, values, counts, bp_offsets)``; record ``r`` owns
    ``breakpoints[bp_offsets[r]:bp_offsets[r+1]]`` and the matching
    ``values``/``counts`` slice shifted by ``r``. ``counts`` is the number of
    entered elements in each segment (the stopping time for running selectors).
    """
    scores = np.asarray(scores, dtype=np.float64).tolist()
    adms = np.asarray(adms, dtype=np.float64).tolist()
    offsets = np.asarray(offsets).tolist()
    perm = np.asarray(perm).tolist()
    normalizers = np.asarray(normalizers, dtype=np.float64).tolist()
    n = len(offsets) - 1
    total = len(scores)
    out_bps = [0.0] * total
    out_vals = [0.0] * (total + n)
    out_cnt = [0] * (total + n)
    bp_off = [0] * (n + 1)
    nb = 0
    nv = 0
    for r in range(n):
        lo = offsets[r]
        T = offsets[r + 1] - lo
        norm = normalizers[r]
        seg_start = nv
        # entry grouping
        if sel == 0 or sel == 1 or sel == 4 or sel == 5:
            out_cnt[nv] = 1
            nv += 1
            acc = scores[perm[lo]]
            m = acc
            for t in range(1, T):
                if nv - seg_start == 1 or m > out_bps[nb - 1]:
                    out_bps[nb] = m
                    nb += 1
                    out_cnt[nv] = t + 1
                    nv += 1
                else:
                    out_cnt[nv - 1] = t + 1
                s = scores[perm[lo + t]]
                if sel == 1 or sel == 5:
                    acc = acc + s
                elif s > acc:
                    acc = s
                if acc > m:
                    m = acc
        else:
            out_cnt[nv] = 0 if sel == 2 else T
            nv += 1
            for t in range(T):
                s = scores[perm[lo + t]]
                if nv - seg_start == 1 or s > out_bps[nb - 1]:
                    out_bps[nb] = s
                    nb += 1
                    out_cnt[nv] = t + 1 if sel == 2 else T - t - 1
                    nv += 1
                else:
                    out_cnt[nv - 1] = t + 1 if sel == 2 else T - t - 1
        # aggregation
        if sel == 4:
            for j in range(seg_start, nv):
                a = adms[perm[lo + out_cnt[j] - 1]]
                out_vals[j] = _agg(agg, a, a, a, 1, norm, param, a_max)
        elif sel == 3:
            # suffix sets, walk segments from the last (smallest set) backwards
            mx = 0.0
            mn = 0.0
            sm = 0.0
            cnt = 0
            for j in range(nv - 1, seg_start - 1, -1):
                while cnt < out_cnt[j]:
                    a = adms[perm[lo + T - 1 - cnt]]
                    if cnt == 0 or a > mx:
                        mx = a
                    if cnt == 0 or a < mn:
                        mn = a
                    sm = sm + a
                    cnt += 1
                out_vals[j] = _agg(agg, mx, mn, sm, cnt, norm, param, a_max)
        else:
            mx = 0.0
            mn = 0.0
            sm = 0.0
            cnt = 0
            for j in range(seg_start, nv):
                while cnt < out_cnt[j]:
                    a = adms[perm[lo + cnt]]
                    if cnt == 0 or a > mx:
                        mx = a
                    if cnt == 0 or a < mn:
                        mn = a
                    sm = sm + a
                    cnt += 1
                out_vals[j] = _agg(agg, mx, mn, sm, cnt, norm, param, a_max)
        bp_off[r + 1] = nb
    return (
        np.array(out_bps[:nb], dtype=np.float64),
        np.array(out_vals[:nv], dtype=np.float64),
        np.array(out_cnt[:nv], dtype=np.int64),
        np.array(bp_off, dtype=np.int64),
    )


def sum_profiles(bps, vals, bp_offsets, merged):
    """Per-segment sums over records on the merged breakpoint grid.

    Segment 0 is ``(-inf, merged[0])``, segment ``j`` is
    ``[merged[j-1], merged[j])``. Records are added in order, so every
    segment sum is the same left-to-right float sum the compiled kernel makes.
    """
    n = len(bp_offsets) - 1
    sums = np.zeros(len(merged) + 1, dtype=np.float64)
    for r in range(n):
        lo = bp_offsets[r]
        hi = bp_offsets[r + 1]
        v = vals[lo + r : hi + r + 1]
        sums[0] += v[0]
        sums[1:] += v[np.searchsorted(bps[lo:hi], merged, side="right")]
    return sums


def eval_profiles(bps, vals, counts, bp_offsets, lam):
    """Value and entered-count of every record's profile at a finite or -inf ``lam``."""
    n = len(bp_offsets) - 1
    below = np.zeros(len(bps) + 1, dtype=np.int64)
    np.cumsum(bps <= lam, out=below[1:])
    idx = below[bp_offsets[1:]] - below[bp_offsets[:-1]] + bp_offsets[:-1] + np.arange(n)
    return vals[idx].copy(), counts[idx].copy()
