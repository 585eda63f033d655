# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: Blahut-Arimoto iterations (plain and robust) and
Poisson functional representation trials.

Must stay bit-compatible with ``_kernels_py``; the test suite compares the two.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL
cdef uint64_t TRIAL_SALT = 0xD1B54A32D192ED03ULL
cdef uint64_t STREAM_SALT = 0x8CB92BA72F3D8DD7ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0

SUPPORT_FLOOR = 1e-15
X_STREAM = 0xFFFFFFFF


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline uint64_t _stream_state(uint64_t seed, uint64_t trial, uint64_t stream) nogil:
    cdef uint64_t h = _mix(seed + GOLDEN)
    h = _mix(h ^ (trial + TRIAL_SALT))
    return _mix(h ^ (stream + STREAM_SALT))


cdef inline uint64_t _next(uint64_t* state) nogil:
    state[0] += GOLDEN
    return _mix(state[0])


cdef inline double _unit_open0(uint64_t* state) nogil:
    # (0, 1]
    return ((_next(state) >> 11) + 1) * TWO_M53


cdef inline double _unit(uint64_t* state) nogil:
    # [0, 1)
    return (_next(state) >> 11) * TWO_M53


cdef inline Py_ssize_t _search(const double[::1] cdf, double u) nogil:
    # smallest index with cdf[i] > u
    cdef Py_ssize_t lo = 0, hi = cdf.shape[0] - 1, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


def stream_uniforms(uint64_t seed, uint64_t trial, uint64_t stream, Py_ssize_t n):
    """First ``n`` uniforms on [0, 1) of one stream (used for cross-checks)."""
    cdef uint64_t st = _stream_state(seed, trial, stream)
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(n):
        o[i] = _unit(&st)
    return out


def ba_iterate(const double[::1] mu, const double[:, ::1] E, double[::1] q,
               double tol, Py_ssize_t max_iter):
    """Blahut-Arimoto marginal iteration ``q <- q * c(q)`` in place.

    ``E[x, y] = exp(-s delta(x, y))``. Entries below ``SUPPORT_FLOOR`` are
    zeroed and ``q`` renormalized every sweep. Returns ``(iterations, converged)``.
    """
    cdef Py_ssize_t nx = E.shape[0], ny = E.shape[1]
    cdef Py_ssize_t x, y, it = 0
    cdef double[::1] g = np.empty(nx, dtype=np.float64)
    cdef double[::1] qn = np.empty(ny, dtype=np.float64)
    cdef double acc, tot, diff, w
    cdef bint converged = False
    with nogil:
        while it < max_iter:
            it += 1
            for x in range(nx):
                acc = 0.0
                for y in range(ny):
                    acc += E[x, y] * q[y]
                g[x] = acc
            tot = 0.0
            for y in range(ny):
                if q[y] == 0.0:
                    qn[y] = 0.0
                    continue
                acc = 0.0
                for x in range(nx):
                    if mu[x] > 0.0:
                        acc += mu[x] * E[x, y] / g[x]
                w = q[y] * acc
                if w < 1e-15:
                    w = 0.0
                qn[y] = w
                tot += w
            diff = 0.0
            for y in range(ny):
                w = qn[y] / tot
                if w - q[y] > diff:
                    diff = w - q[y]
                elif q[y] - w > diff:
                    diff = q[y] - w
                q[y] = w
            if diff < tol:
                converged = True
                break
    return it, converged


def robust_iterate(const double[::1] mu0, const double[:, ::1] E, double[::1] q,
                   double lam, double tol, Py_ssize_t max_iter):
    """Robust marginal iteration ``q <- q * c(q)`` in place.

    Same sweep as ``ba_iterate`` except that ``c`` is taken under the tilted
    source ``mu* ~ mu0 g^(-1/lam)``. Returns ``(iterations, converged)``.
    """
    cdef Py_ssize_t nx = E.shape[0], ny = E.shape[1]
    cdef Py_ssize_t x, y, it = 0
    cdef double[::1] g = np.empty(nx, dtype=np.float64)
    cdef double[::1] m = np.empty(nx, dtype=np.float64)
    cdef double[::1] qn = np.empty(ny, dtype=np.float64)
    cdef double acc, tot, diff, w, top, inv = 1.0 / lam
    cdef bint converged = False
    with nogil:
        while it < max_iter:
            it += 1
            top = -INFINITY
            for x in range(nx):
                acc = 0.0
                for y in range(ny):
                    acc += E[x, y] * q[y]
                g[x] = acc
                if mu0[x] > 0.0:
                    m[x] = log(mu0[x]) - inv * log(acc)
                    if m[x] > top:
                        top = m[x]
            tot = 0.0
            for x in range(nx):
                if mu0[x] > 0.0:
                    m[x] = exp(m[x] - top)
                    tot += m[x]
                else:
                    m[x] = 0.0
            for x in range(nx):
                m[x] = m[x] / tot
            tot = 0.0
            for y in range(ny):
                if q[y] == 0.0:
                    qn[y] = 0.0
                    continue
                acc = 0.0
                for x in range(nx):
                    if m[x] > 0.0:
                        acc += m[x] * E[x, y] / g[x]
                w = q[y] * acc
                if w < 1e-15:
                    w = 0.0
                qn[y] = w
                tot += w
            diff = 0.0
            for y in range(ny):
                w = qn[y] / tot
                if w - q[y] > diff:
                    diff = w - q[y]
                elif q[y] - w > diff:
                    diff = q[y] - w
                q[y] = w
            if diff < tol:
                converged = True
                break
    return it, converged


def pfr_trials(const double[:, ::1] Q, const double[:, ::1] qs,
               const double[:, ::1] qcdf, const double[:, ::1] rmin,
               const double[::1] xcdf, const int64_t[::1] xs_fixed,
               const int64_t[::1] pick,
               uint64_t seed, int64_t trial_start, int64_t n_trials):
    """Run Poisson functional representation trials.

    ``qs[a]`` is the marginal of source class ``a`` and ``qcdf[a]`` its CDF
    (last entry exactly 1). ``rmin[a, x]`` lower-bounds ``qs[a, y] / Q[x, y]``.
    When ``xs_fixed`` is nonempty it supplies ``x`` per trial; otherwise ``x``
    is drawn from ``xcdf`` on its own stream. When ``pick`` is nonempty only
    class ``pick[x]`` is run; otherwise every class runs and the smallest
    index ``K_a`` wins. Returns arrays ``(x, k, a, y, nu, points)``.
    """
    cdef Py_ssize_t ns = qs.shape[0]
    cdef int64_t t, i, kb, kbest, abest
    cdef Py_ssize_t a, a_lo, a_hi, x, y, yb, ybest
    cdef uint64_t st
    cdef double T, nu, nub, ratio, tt, qx
    cdef bint fixed = xs_fixed.shape[0] > 0
    cdef bint picked = pick.shape[0] > 0
    out_x = np.empty(n_trials, dtype=np.int64)
    out_k = np.empty(n_trials, dtype=np.int64)
    out_a = np.empty(n_trials, dtype=np.int64)
    out_y = np.empty(n_trials, dtype=np.int64)
    out_nu = np.empty(n_trials, dtype=np.float64)
    out_pts = np.empty(n_trials, dtype=np.int64)
    cdef int64_t[::1] ox = out_x, ok = out_k, oa = out_a, oy = out_y, op = out_pts
    cdef double[::1] onu = out_nu
    cdef int64_t pts
    with nogil:
        for t in range(n_trials):
            if fixed:
                x = xs_fixed[t]
            else:
                st = _stream_state(seed, <uint64_t>(trial_start + t), <uint64_t>0xFFFFFFFF)
                x = _search(xcdf, _unit(&st))
            kbest = 0
            abest = -1
            ybest = -1
            nub = INFINITY
            pts = 0
            if picked:
                a_lo = pick[x]
                a_hi = a_lo + 1
            else:
                a_lo = 0
                a_hi = ns
            for a in range(a_lo, a_hi):
                st = _stream_state(seed, <uint64_t>(trial_start + t), <uint64_t>a)
                T = 0.0
                nu = INFINITY
                kb = 0
                yb = -1
                i = 0
                while True:
                    i += 1
                    T += -log(_unit_open0(&st))
                    if T * rmin[a, x] > nu:
                        break
                    y = _search(qcdf[a], _unit(&st))
                    pts += 1
                    qx = Q[x, y]
                    if qx > 0.0:
                        tt = T * (qs[a, y] / qx)
                        if tt < nu:
                            nu = tt
                            kb = i
                            yb = y
                if abest < 0 or kb < kbest:
                    kbest = kb
                    abest = a
                    ybest = yb
                    nub = nu
            ox[t] = x
            ok[t] = kbest
            oa[t] = abest
            oy[t] = ybest
            onu[t] = nub
            op[t] = pts
    return out_x, out_k, out_a, out_y, out_nu, out_pts
