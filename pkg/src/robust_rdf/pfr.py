"""Monte-Carlo simulation of Poisson functional representation coding schemes.

Three constructions are covered:

* finite source set: one Poisson process per candidate source, marks drawn
  from that source's output marginal; the encoder sends ``(K, A)``;
* KL ball: a single process with marks from the nominal output marginal; the
  encoder sends ``K``;
* blocks of ``N`` letters: the finite-set scheme on super-letters with the
  product channel.

The infinite processes are truncated exactly: a class stops once its arrival
time times the smallest possible ratio ``q(y) / Q(y|x)`` exceeds the best
transformed time found so far.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .prob import (
    LN2,
    as_channel,
    as_distortion,
    as_pmf,
    kl_divergence,
    mutual_information,
    output_marginal,
    sup_mutual_information,
)

LOG2E_OVER_E = math.log2(math.e) / math.e
# constant of the E[log K] chain: finite-set proof vs KL-ball proof
C_FINITE = LOG2E_OVER_E + 1.0
C_KL = LOG2E_OVER_E
MAX_BLOCK = 12
MAX_SUPER_ALPHABET = 4096
TV_MIN_COUNT = 1000
RULES = ("kl", "index")


class SupportError(ValueError):
    """A candidate output marginal does not cover ``Q(.|x)``."""


@dataclass(frozen=True)
class PfrRecord:
    k: int
    a: int
    y: int
    nu: float


@dataclass(frozen=True)
class RateReport:
    empirical_H_K: float
    empirical_H_A: float
    empirical_H_KA: float
    bound: float
    trials: int
    I_max: float
    mean_log2_K: float = float("nan")
    output_tv: float = float("nan")
    distortion_mean: float | None = None
    distortion_sem: float | None = None
    distortion_expected: float | None = None
    block_length: int = 1
    source_index: int = 0
    Gamma: float | None = None

    @property
    def slack(self) -> float:
        return self.bound - self.empirical_H_KA

    @property
    def passed(self) -> bool:
        return bool(self.empirical_H_KA <= self.bound)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["slack"] = self.slack
        rec["passed"] = self.passed
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in rec.items()}


def plugin_entropy(labels) -> float:
    """Plug-in entropy (bits) of the empirical law of ``labels`` (rows for 2-D input)."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    if labels.ndim == 1:
        _, counts = np.unique(labels, return_counts=True)
    else:
        _, counts = np.unique(labels, axis=0, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def _marginals(sources, Q):
    return np.array([output_marginal(mu, Q) for mu in sources])


def _plan(qs, Q, xs_needed, rule):
    """Truncation table ``rmin[a, x]`` and, for the ``"kl"`` rule, the class per ``x``.

    ``rmin[a, x] = min_{y: Q(y|x) > 0} qs[a, y] / Q(y|x)``. Every class that can
    run at ``x`` must cover ``Q(.|x)``; otherwise ``SupportError``.
    """
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}, got {rule!r}")
    na, nx = len(qs), Q.shape[0]
    rmin = np.zeros((na, nx))
    pick = np.zeros(nx, dtype=np.int64) if rule == "kl" else np.zeros(0, dtype=np.int64)
    for x in xs_needed:
        on = Q[x] > 0
        covers = np.all(qs[:, on] > 0, axis=1)
        if rule == "kl":
            if not covers.any():
                raise SupportError(f"no class marginal covers Q(.|x={x})")
            kls = [kl_divergence(Q[x], qs[a]) for a in range(na)]
            pick[x] = int(np.argmin(kls))
            classes = [pick[x]]
        else:
            classes = range(na)
        for a in classes:
            if not covers[a]:
                gap = np.flatnonzero(on & (qs[a] <= 0)).tolist()
                raise SupportError(f"marginal of class {a} misses y={gap} where Q(y|x={x}) > 0")
            rmin[a, x] = float(np.min(qs[a, on] / Q[x, on]))
    return rmin, pick


def _cdfs(ps):
    cdf = np.cumsum(ps, axis=-1)
    cdf[..., -1] = 1.0
    return np.ascontiguousarray(cdf)


def _run(Q, qs, xs_needed, xcdf, xs_fixed, seed, trials, workers, rule, trial_start=0):
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    qs = np.ascontiguousarray(qs, dtype=np.float64)
    rmin, pick = _plan(qs, Q, xs_needed, rule)
    qcdf = _cdfs(qs)
    xcdf = np.ascontiguousarray(xcdf, dtype=np.float64)
    fixed = np.ascontiguousarray(xs_fixed, dtype=np.int64)
    seed = int(seed) & ((1 << 64) - 1)
    if not workers or workers <= 1 or trials < 2 * workers:
        return kernels.pfr_trials(Q, qs, qcdf, rmin, xcdf, fixed, pick, seed, int(trial_start), int(trials))
    # chunks are keyed by absolute trial index, so the split does not matter
    bounds = np.linspace(0, trials, workers + 1).astype(int)

    def chunk(i):
        lo, hi = int(bounds[i]), int(bounds[i + 1])
        fx = fixed[lo:hi] if len(fixed) else fixed
        return kernels.pfr_trials(Q, qs, qcdf, rmin, xcdf, fx, pick, seed, lo, hi - lo)

    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(chunk, range(workers)))
    return tuple(np.concatenate([p[j] for p in parts]) for j in range(6))


def simulate_one_shot_finite(S, Q, x: int, rng_seed: int, trial: int = 0,
                             rule: str = "kl") -> PfrRecord:
    """One draw of the finite-set scheme for a given source symbol ``x``.

    ``rule`` picks the transmitted class: ``"kl"`` uses the class whose
    marginal is closest to ``Q(.|x)`` in KL divergence, ``"index"`` the class
    with the smallest selected index ``K_a``.
    """
    sources = [as_pmf(mu) for mu in S]
    if not sources:
        raise ValueError("S must contain at least one source")
    Q = as_channel(Q)
    if not 0 <= x < Q.shape[0]:
        raise ValueError(f"x={x} outside the source alphabet")
    qs = _marginals(sources, Q)
    out = _run(Q, qs, [x], np.ones(1), np.array([x]), rng_seed, 1, None, rule, trial_start=trial)
    return PfrRecord(k=int(out[1][0]), a=int(out[2][0]), y=int(out[3][0]), nu=float(out[4][0]))


def simulate_fixed_x(S, Q, x: int, trials: int, rng_seed: int, rule: str = "kl",
                     workers: int | None = None):
    """Many independent draws at a fixed ``x``; returns arrays ``(k, a, y, nu)``.

    Trial ``t`` here is the same draw as ``simulate_one_shot_finite(..., trial=t)``.
    """
    sources = [as_pmf(mu) for mu in S]
    Q = as_channel(Q)
    if not 0 <= x < Q.shape[0]:
        raise ValueError(f"x={x} outside the source alphabet")
    qs = _marginals(sources, Q)
    out = _run(Q, qs, [x], np.ones(1), np.full(int(trials), x), rng_seed, int(trials), workers, rule)
    return out[1], out[2], out[3], out[4]


def simulate_one_shot_kl(mu0, Q, x: int, rng_seed: int, trial: int = 0) -> PfrRecord:
    """One draw of the KL-ball scheme: a single process with marks from the nominal marginal."""
    return simulate_one_shot_finite([mu0], Q, x, rng_seed, trial)


def _summarize(x, k, a, y, Q, sources, src, delta):
    H_K = plugin_entropy(k)
    H_A = plugin_entropy(a)
    H_KA = plugin_entropy(np.column_stack([k, a]))
    tv = 0.0
    for xv in np.unique(x):
        sel = y[x == xv]
        if len(sel) < TV_MIN_COUNT:
            continue
        emp = np.bincount(sel, minlength=Q.shape[1]) / len(sel)
        tv = max(tv, 0.5 * float(np.abs(emp - Q[xv]).sum()))
    extra = {}
    if delta is not None:
        d = delta[x, y]
        extra = {
            "distortion_mean": float(d.mean()),
            "distortion_sem": float(d.std(ddof=1) / math.sqrt(len(d))) if len(d) > 1 else 0.0,
            "distortion_expected": float(np.sum(sources[src][:, None] * Q * delta)),
        }
    return H_K, H_A, H_KA, float(np.mean(np.log2(k))), tv, extra


def estimate_rates(S, Q, source_index: int, trials: int, rng_seed: int, delta=None,
                   workers: int | None = None, min_trials: int = 10_000,
                   rule: str = "kl") -> RateReport:
    """Empirical ``H(K)``, ``H(A)``, ``H(K, A)`` (bits) of the finite-set scheme.

    ``X`` is drawn from ``S[source_index]`` on a stream separate from the
    Poisson processes. ``bound = I + log2(|S| (I + 1)) + 4`` with ``I`` the
    largest mutual information over ``S`` in bits. ``rule`` is as in
    ``simulate_one_shot_finite``.
    """
    sources = [as_pmf(mu) for mu in S]
    if not sources:
        raise ValueError("S must contain at least one source")
    if trials < min_trials:
        raise ValueError(f"trials must be at least {min_trials} for the plug-in estimates")
    if not 0 <= source_index < len(sources):
        raise IndexError(f"source_index {source_index} out of range for {len(sources)} sources")
    Q = as_channel(Q)
    if delta is not None:
        delta = as_distortion(delta)
    mu = sources[source_index]
    qs = _marginals(sources, Q)
    xs_needed = np.flatnonzero(mu > 0)
    x, k, a, y, _, _ = _run(Q, qs, xs_needed, _cdfs(mu), [], rng_seed, trials, workers, rule)
    I_max = sup_mutual_information(sources, Q)[0] / LN2
    bound = I_max + math.log2(len(sources) * (I_max + 1.0)) + 4.0
    H_K, H_A, H_KA, mlk, tv, extra = _summarize(x, k, a, y, Q, sources, source_index, delta)
    return RateReport(
        empirical_H_K=H_K, empirical_H_A=H_A, empirical_H_KA=H_KA, bound=bound, trials=int(trials),
        I_max=I_max, mean_log2_K=mlk, output_tv=tv, source_index=source_index, **extra,
    )


def sup_mi_kl_ball(mu0, Q, Gamma: float) -> float:
    """``sup {I(mu, Q) : KL(mu || mu0) <= Gamma}`` in nats.

    Mutual information is concave in the source, so SLSQP from a few starts
    (the nominal and the vertices pulled into the ball) finds the maximum.
    """
    mu0, Q = as_pmf(mu0), as_channel(Q)
    if Gamma < 0:
        raise ValueError("Gamma must be nonnegative")
    on = mu0 > 0
    if Gamma == 0 or on.sum() == 1:
        return mutual_information(mu0, Q)
    base = mu0[on]
    Qon = Q[on]
    n = len(base)

    def embed(p):
        p = np.clip(p, 0.0, None)
        return p / p.sum()

    def neg_mi(p):
        return -mutual_information(embed(p), Qon)

    def slack(p):
        return Gamma - kl_divergence(embed(p), base)

    best = mutual_information(base, Qon)
    starts = [base]
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        # pull the vertex toward the nominal until it enters the ball
        t = 1.0
        while kl_divergence((1 - t) * base + t * e, base) > Gamma and t > 1e-12:
            t *= 0.5
        starts.append((1 - t) * base + t * e)
    for p0 in starts:
        res = minimize(
            neg_mi, p0, method="SLSQP", bounds=[(0.0, 1.0)] * n,
            constraints=[{"type": "eq", "fun": lambda p: p.sum() - 1.0},
                         {"type": "ineq", "fun": slack}],
            options={"ftol": 1e-13, "maxiter": 500},
        )
        p = embed(res.x)
        if kl_divergence(p, base) <= Gamma + 1e-9:
            best = max(best, mutual_information(p, Qon))
    return best


def estimate_rates_kl(mu0, Q, mu, Gamma: float, trials: int, rng_seed: int, delta=None,
                      workers: int | None = None, min_trials: int = 10_000) -> RateReport:
    """KL-ball scheme with ``X ~ mu`` for a caller-chosen ``mu`` in the ball.

    The code never looks at ``mu``; only the bound
    ``I + Gamma + log2(I + Gamma + 1) + 4`` depends on the radius (all in bits).
    """
    mu0, Q, mu = as_pmf(mu0), as_channel(Q), as_pmf(mu)
    if trials < min_trials:
        raise ValueError(f"trials must be at least {min_trials} for the plug-in estimates")
    kl = kl_divergence(mu, mu0)
    if kl > Gamma + 1e-12:
        raise ValueError(f"mu lies outside the ball: KL = {kl:.6g} > Gamma = {Gamma:.6g}")
    if delta is not None:
        delta = as_distortion(delta)
    qs = _marginals([mu0], Q)
    x, k, a, y, _, _ = _run(Q, qs, np.flatnonzero(mu > 0), _cdfs(mu), [], rng_seed, trials, workers, "kl")
    I_max = sup_mi_kl_ball(mu0, Q, Gamma) / LN2
    G = Gamma / LN2
    bound = I_max + G + math.log2(I_max + G + 1.0) + 4.0
    H_K, H_A, H_KA, mlk, tv, extra = _summarize(x, k, a, y, Q, [mu], 0, delta)
    return RateReport(
        empirical_H_K=H_K, empirical_H_A=H_A, empirical_H_KA=H_KA, bound=bound, trials=int(trials),
        I_max=I_max, mean_log2_K=mlk, output_tv=tv, Gamma=G, **extra,
    )


def product_pmf(mu, N: int) -> np.ndarray:
    """Law of ``N`` i.i.d. letters; super-letter index is the base-|X| number, first letter most significant."""
    out = np.ones(1)
    for _ in range(N):
        out = np.kron(out, mu)
    return out


def product_channel(Q, N: int) -> np.ndarray:
    out = np.ones((1, 1))
    for _ in range(N):
        out = np.kron(out, Q)
    return out


def product_distortion(delta, N: int) -> np.ndarray:
    """Additive per-letter distortion ``sum_i delta(x_i, y_i) / N`` on super-letters."""
    nx, ny = delta.shape
    out = np.zeros((1, 1))
    for _ in range(N):
        out = np.repeat(np.repeat(out, nx, axis=0), ny, axis=1) + np.tile(delta, out.shape)
    return out / N


def simulate_block(S, Q, N: int, trials: int, rng_seed: int, source_index: int = 0, delta=None,
                   workers: int | None = None, rule: str = "kl") -> RateReport:
    """Finite-set scheme on blocks of ``N`` letters, reported per letter.

    Sources become their ``N``-fold products and the channel ``Q^(x)N``; the
    bound uses ``I_N = N * I`` and both entropies and bound are divided by ``N``.
    """
    sources = [as_pmf(mu) for mu in S]
    Q = as_channel(Q)
    if N < 1:
        raise ValueError("N must be positive")
    if N > MAX_BLOCK or max(Q.shape) ** N > MAX_SUPER_ALPHABET:
        raise ValueError(
            f"block length {N} gives super-alphabets of size {max(Q.shape)}^{N}; "
            f"limit is N <= {MAX_BLOCK} and {MAX_SUPER_ALPHABET} super-letters"
        )
    if N == 1:
        return estimate_rates(sources, Q, source_index, trials, rng_seed, delta=delta, workers=workers,
                              rule=rule)
    SN = [product_pmf(mu, N) for mu in sources]
    QN = product_channel(Q, N)
    dN = product_distortion(as_distortion(delta), N) if delta is not None else None
    rep = estimate_rates(SN, QN, source_index, trials, rng_seed, delta=dN, workers=workers, rule=rule)
    I_letter = sup_mutual_information(sources, Q)[0] / LN2
    I_N = N * I_letter
    bound = I_N + math.log2(len(sources) * (I_N + 1.0)) + 4.0
    return RateReport(
        empirical_H_K=rep.empirical_H_K / N, empirical_H_A=rep.empirical_H_A / N,
        empirical_H_KA=rep.empirical_H_KA / N, bound=bound / N, trials=rep.trials,
        I_max=I_letter, mean_log2_K=rep.mean_log2_K / N, output_tv=rep.output_tv,
        distortion_mean=rep.distortion_mean, distortion_sem=rep.distortion_sem,
        distortion_expected=rep.distortion_expected, block_length=N, source_index=source_index,
    )


def block_overhead_allowance(I_letter: float, n_sources: int, N: int) -> float:
    """Per-letter allowance ``(log2(|S| (N I + 2)) + 5) / N`` above ``I``."""
    return (math.log2(n_sources * (N * I_letter + 2.0)) + 5.0) / N


__all__ = [
    "C_FINITE",
    "C_KL",
    "PfrRecord",
    "RateReport",
    "SupportError",
    "block_overhead_allowance",
    "estimate_rates",
    "estimate_rates_kl",
    "plugin_entropy",
    "product_channel",
    "product_distortion",
    "product_pmf",
    "simulate_block",
    "simulate_fixed_x",
    "simulate_one_shot_finite",
    "simulate_one_shot_kl",
    "sup_mi_kl_ball",
]
