"""Compiled inner loops for integer points on spheres of radius q.

All arithmetic on p and q is int64; callers guarantee q <= 3e9 so that q^2
fits. Floating point is only used to locate candidates and to report the
squared distance ||q alpha - p||^2.
"""

import math

import numpy as np
from numba import njit

EPS = 2.220446049250313e-16


@njit(cache=True, nogil=True)
def _isqrt(r):
    s = np.int64(math.sqrt(float(r)))
    while s * s > r:
        s -= 1
    while (s + 1) * (s + 1) <= r:
        s += 1
    return s


@njit(cache=True, nogil=True)
def near_scan_2(alpha, keep2, qlo, qhi, solve, out_q, out_p, out_d2):
    """n = 1 specialisation of ``near_scan``."""
    free = 1 - solve
    af = alpha[free]
    as_ = alpha[solve]
    rk0 = math.sqrt(keep2)
    cap = out_q.shape[0]
    cnt = 0
    for q in range(qlo, qhi + 1):
        qf = float(q)
        rk = rk0 + 4.0 * EPS * qf + 1e-12
        tf = qf * af
        ts = qf * as_
        lo = np.int64(math.floor(tf - rk)) + 1
        hi = np.int64(math.ceil(tf + rk)) - 1
        qq = q * q
        for pf in range(lo, hi + 1):
            r = qq - pf * pf
            if r < 0:
                continue
            sf = math.sqrt(float(r))
            if abs(sf - abs(ts)) >= rk + 1.0:
                continue
            s = np.int64(sf + 0.5)
            if s * s != r:
                s = _isqrt(r)
                if s * s != r:
                    continue
            for sgn in range(2):
                ps = s if sgn == 0 else -s
                if sgn == 1 and s == 0:
                    break
                df = tf - pf
                ds = ts - ps
                d2 = df * df + ds * ds
                if d2 < keep2:
                    if cnt < cap:
                        out_q[cnt] = q
                        out_p[cnt, free] = pf
                        out_p[cnt, solve] = ps
                        out_d2[cnt] = d2
                    cnt += 1
    return cnt


@njit(cache=True, nogil=True)
def near_scan(alpha, keep2, qlo, qhi, solve, out_q, out_p, out_d2):
    """Integer p with ||p|| = q and ||q alpha - p||^2 < keep2, for q in [qlo, qhi].

    The coordinates other than ``solve`` run over the open box of half-width
    sqrt(keep2) around q alpha; the ``solve`` coordinate is recovered from the
    norm equation. Returns the number of hits (may exceed the buffer size, in
    which case the caller must retry with a bigger buffer).
    """
    m = alpha.shape[0]
    b = m - 1
    others = np.empty(b, np.int64)
    k = 0
    for j in range(m):
        if j != solve:
            others[k] = j
            k += 1
    lo = np.empty(b, np.int64)
    hi = np.empty(b, np.int64)
    cur = np.empty(b, np.int64)
    t = np.empty(m)
    rk0 = math.sqrt(keep2)
    cap = out_q.shape[0]
    cnt = 0
    for q in range(qlo, qhi + 1):
        qf = float(q)
        rk = rk0 + 4.0 * EPS * qf + 1e-12
        for j in range(m):
            t[j] = qf * alpha[j]
        empty = False
        for i in range(b):
            tj = t[others[i]]
            lo[i] = np.int64(math.floor(tj - rk)) + 1
            hi[i] = np.int64(math.ceil(tj + rk)) - 1
            if hi[i] < lo[i]:
                empty = True
            cur[i] = lo[i]
        if empty:
            continue
        qq = q * q
        ts = t[solve]
        while True:
            r = qq
            ok = True
            for i in range(b):
                v = cur[i]
                r -= v * v
                if r < 0:
                    ok = False
                    break
            if ok:
                sf = math.sqrt(float(r))
                if abs(sf - abs(ts)) < rk + 1.0:
                    s = np.int64(sf + 0.5)
                    if s * s != r:
                        s = _isqrt(r)
                    if s * s == r:
                        for sgn in range(2):
                            ps = s if sgn == 0 else -s
                            if sgn == 1 and s == 0:
                                break
                            ds = ts - ps
                            d2 = ds * ds
                            for i in range(b):
                                dd = t[others[i]] - cur[i]
                                d2 += dd * dd
                            if d2 < keep2:
                                if cnt < cap:
                                    out_q[cnt] = q
                                    for i in range(b):
                                        out_p[cnt, others[i]] = cur[i]
                                    out_p[cnt, solve] = ps
                                    out_d2[cnt] = d2
                                cnt += 1
            i = b - 1
            while i >= 0:
                cur[i] += 1
                if cur[i] <= hi[i]:
                    break
                cur[i] = lo[i]
                i -= 1
            if i < 0:
                break
    return cnt


@njit(cache=True, nogil=True)
def sphere_points(qlo, qhi, m, out_q, out_p, fill):
    """All p in Z^m with ||p||^2 = q^2 for q in [qlo, qhi], ordered by (q, p).

    Depth-first descent over the first m-1 coordinates with the remaining
    sum of squares as pruning bound; the last coordinate is solved exactly.
    With ``fill`` false only the count is returned.
    """
    p = np.zeros(m, np.int64)
    rem = np.zeros(m, np.int64)
    bound = np.zeros(m, np.int64)
    cnt = 0
    for q in range(qlo, qhi + 1):
        rem[0] = q * q
        bound[0] = q
        p[0] = -q
        level = 0
        while level >= 0:
            if level == m - 1:
                r = rem[level]
                s = _isqrt(r)
                if s * s == r:
                    for sgn in range(2):
                        if sgn == 1 and s == 0:
                            break
                        if fill:
                            out_q[cnt] = q
                            for j in range(m - 1):
                                out_p[cnt, j] = p[j]
                            out_p[cnt, m - 1] = -s if sgn == 0 else s
                        cnt += 1
                level -= 1
                if level >= 0:
                    p[level] += 1
                continue
            if p[level] > bound[level]:
                level -= 1
                if level >= 0:
                    p[level] += 1
                continue
            r = rem[level] - p[level] * p[level]
            level += 1
            rem[level] = r
            if level < m - 1:
                s = _isqrt(r)
                bound[level] = s
                p[level] = -s
    return cnt
