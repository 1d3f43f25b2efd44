# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Semantics identical to ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef inline double _agg(int agg, double mx, double mn, double sm, Py_ssize_t cnt,
                        double norm, double param, double a_max) nogil:
    if agg == 0:
        return mx if cnt > 0 else 0.0
    if agg == 1:
        return mn if cnt > 0 else a_max
    if agg == 2:
        if norm == 0.0 or sm / norm >= param:
            return a_max
        return 0.0
    return a_max if sm >= param else 0.0


def build_profiles(const double[::1] scores, const double[::1] adms,
                   const cnp.int64_t[::1] offsets, const cnp.int64_t[::1] perm,
                   const double[::1] normalizers, int sel, int agg,
                   double param, double a_max):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t total = scores.shape[0]
    out_bps_a = np.empty(total, dtype=np.float64)
    out_vals_a = np.empty(total + n, dtype=np.float64)
    out_cnt_a = np.empty(total + n, dtype=np.int64)
    bp_off_a = np.zeros(n + 1, dtype=np.int64)
    cdef double[::1] out_bps = out_bps_a
    cdef double[::1] out_vals = out_vals_a
    cdef cnp.int64_t[::1] out_cnt = out_cnt_a
    cdef cnp.int64_t[::1] bp_off = bp_off_a
    cdef Py_ssize_t nb = 0, nv = 0, r, lo, T, t, j, seg_start, cnt
    cdef double norm, acc, m, s, a, mx, mn, sm
    with nogil:
        for r in range(n):
            lo = offsets[r]
            T = offsets[r + 1] - lo
            norm = normalizers[r]
            seg_start = nv
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
            if sel == 4:
                for j in range(seg_start, nv):
                    a = adms[perm[lo + out_cnt[j] - 1]]
                    out_vals[j] = _agg(agg, a, a, a, 1, norm, param, a_max)
            elif sel == 3:
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
    return out_bps_a[:nb].copy(), out_vals_a[:nv].copy(), out_cnt_a[:nv].copy(), bp_off_a


def sum_profiles(const double[::1] bps, const double[::1] vals,
                 const cnp.int64_t[::1] bp_offsets, const double[::1] merged):
    cdef Py_ssize_t n = bp_offsets.shape[0] - 1
    cdef Py_ssize_t K = merged.shape[0]
    sums_a = np.zeros(K + 1, dtype=np.float64)
    cdef double[::1] sums = sums_a
    cdef Py_ssize_t r, lo, k, voff, p, j
    cdef double left
    with nogil:
        for r in range(n):
            lo = bp_offsets[r]
            k = bp_offsets[r + 1] - lo
            voff = lo + r
            p = 0
            sums[0] = sums[0] + vals[voff]
            for j in range(1, K + 1):
                left = merged[j - 1]
                while p < k and bps[lo + p] <= left:
                    p += 1
                sums[j] = sums[j] + vals[voff + p]
    return sums_a


def eval_profiles(const double[::1] bps, const double[::1] vals,
                  const cnp.int64_t[::1] counts, const cnp.int64_t[::1] bp_offsets,
                  double lam):
    cdef Py_ssize_t n = bp_offsets.shape[0] - 1
    out_v_a = np.empty(n, dtype=np.float64)
    out_c_a = np.empty(n, dtype=np.int64)
    cdef double[::1] out_v = out_v_a
    cdef cnp.int64_t[::1] out_c = out_c_a
    cdef Py_ssize_t r, lo, hi, a, b, mid, idx
    with nogil:
        for r in range(n):
            lo = bp_offsets[r]
            hi = bp_offsets[r + 1]
            a = lo
            b = hi
            while a < b:
                mid = (a + b) // 2
                if bps[mid] <= lam:
                    a = mid + 1
                else:
                    b = mid
            idx = a + r
            out_v[r] = vals[idx]
            out_c[r] = counts[idx]
    return out_v_a, out_c_a
