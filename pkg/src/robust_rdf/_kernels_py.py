"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Same arithmetic, same random streams, same outputs; only slower. Selected
automatically when the extension is not built.
"""

from __future__ import annotations

import math

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
TRIAL_SALT = 0xD1B54A32D192ED03
STREAM_SALT = 0x8CB92BA72F3D8DD7
TWO_M53 = 1.0 / 9007199254740992.0

SUPPORT_FLOOR = 1e-15
X_STREAM = 0xFFFFFFFF


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & MASK
    z = ((z ^ (z >> 27)) * MIX2) & MASK
    return z ^ (z >> 31)


def _stream_state(seed: int, trial: int, stream: int) -> int:
    h = _mix((seed + GOLDEN) & MASK)
    h = _mix(h ^ ((trial + TRIAL_SALT) & MASK))
    return _mix(h ^ ((stream + STREAM_SALT) & MASK))


class _Stream:
    __slots__ = ("state",)

    def __init__(self, seed: int, trial: int, stream: int):
        self.state = _stream_state(seed & MASK, trial & MASK, stream & MASK)

    def next(self) -> int:
        self.state = (self.state + GOLDEN) & MASK
        return _mix(self.state)

    def unit(self) -> float:
        return (self.next() >> 11) * TWO_M53

    def unit_open0(self) -> float:
        return ((self.next() >> 11) + 1) * TWO_M53


def _search(cdf, u: float) -> int:
    lo, hi = 0, len(cdf) - 1
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


def stream_uniforms(seed: int, trial: int, stream: int, n: int) -> np.ndarray:
    st = _Stream(seed, trial, stream)
    return np.array([st.unit() for _ in range(n)], dtype=np.float64)


def ba_iterate(mu, E, q, tol, max_iter):
    nx, ny = E.shape
    mu = [float(v) for v in mu]
    E = E.tolist()
    cur = [float(v) for v in q]
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        g = [sum(E[x][y] * cur[y] for y in range(ny)) for x in range(nx)]
        qn = [0.0] * ny
        tot = 0.0
        for y in range(ny):
            if cur[y] == 0.0:
                continue
            acc = 0.0
            for x in range(nx):
                if mu[x] > 0.0:
                    acc += mu[x] * E[x][y] / g[x]
            w = cur[y] * acc
            if w < 1e-15:
                w = 0.0
            qn[y] = w
            tot += w
        diff = 0.0
        for y in range(ny):
            w = qn[y] / tot
            diff = max(diff, abs(w - cur[y]))
            cur[y] = w
        if diff < tol:
            converged = True
            break
    q[:] = cur
    return it, converged


def robust_iterate(mu0, E, q, lam, tol, max_iter):
    nx, ny = E.shape
    mu0 = [float(v) for v in mu0]
    E = E.tolist()
    cur = [float(v) for v in q]
    inv = 1.0 / lam
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        g = [sum(E[x][y] * cur[y] for y in range(ny)) for x in range(nx)]
        lw = [math.log(mu0[x]) - inv * math.log(g[x]) if mu0[x] > 0.0 else -math.inf
              for x in range(nx)]
        top = max(lw)
        m = [math.exp(v - top) if v > -math.inf else 0.0 for v in lw]
        tot = sum(m)
        m = [v / tot for v in m]
        qn = [0.0] * ny
        tot = 0.0
        for y in range(ny):
            if cur[y] == 0.0:
                continue
            acc = 0.0
            for x in range(nx):
                if m[x] > 0.0:
                    acc += m[x] * E[x][y] / g[x]
            w = cur[y] * acc
            if w < 1e-15:
                w = 0.0
            qn[y] = w
            tot += w
        diff = 0.0
        for y in range(ny):
            w = qn[y] / tot
            diff = max(diff, abs(w - cur[y]))
            cur[y] = w
        if diff < tol:
            converged = True
            break
    q[:] = cur
    return it, converged


def pfr_trials(Q, qs, qcdf, rmin, xcdf, xs_fixed, pick, seed, trial_start, n_trials):
    Ql = Q.tolist()
    qsl = qs.tolist()
    cdfs = [list(c) for c in qcdf]
    rminl = rmin.tolist()
    xc = list(xcdf)
    fixed = len(xs_fixed) > 0
    ns = len(qsl)
    out = {k: [] for k in ("x", "k", "a", "y", "nu", "pts")}
    for t in range(n_trials):
        trial = trial_start + t
        if fixed:
            x = int(xs_fixed[t])
        else:
            x = _search(xc, _Stream(seed, trial, X_STREAM).unit())
        kbest, abest, ybest, nub, pts = 0, -1, -1, math.inf, 0
        classes = range(int(pick[x]), int(pick[x]) + 1) if len(pick) > 0 else range(ns)
        for a in classes:
            st = _Stream(seed, trial, a)
            T, nu, kb, yb, i = 0.0, math.inf, 0, -1, 0
            row, qa, cdf, rm = Ql[x], qsl[a], cdfs[a], rminl[a][x]
            while True:
                i += 1
                T += -math.log(st.unit_open0())
                if T * rm > nu:
                    break
                y = _search(cdf, st.unit())
                pts += 1
                qx = row[y]
                if qx > 0.0:
                    tt = T * (qa[y] / qx)
                    if tt < nu:
                        nu, kb, yb = tt, i, y
            if abest < 0 or kb < kbest:
                kbest, abest, ybest, nub = kb, a, yb, nu
        for key, v in zip(("x", "k", "a", "y", "nu", "pts"), (x, kbest, abest, ybest, nub, pts)):
            out[key].append(v)
    return (
        np.array(out["x"], dtype=np.int64),
        np.array(out["k"], dtype=np.int64),
        np.array(out["a"], dtype=np.int64),
        np.array(out["y"], dtype=np.int64),
        np.array(out["nu"], dtype=np.float64),
        np.array(out["pts"], dtype=np.int64),
    )
