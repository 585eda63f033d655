"""Independent ground truth for the robust solver.

* ``bernoulli_rrdf``: closed form for binary sources under Hamming distortion.
* ``bruteforce_maxmin``: max over a simplex grid of classical R(D) values.
* ``worst_case_expected_distortion``: free-energy dual of the worst-case
  expected distortion over a KL ball.
* ``saddle_check``: sampled sources in the ball against a solved kernel.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp

from .prob import (
    as_channel,
    as_distortion,
    as_pmf,
    binary_entropy,
    kl_divergence,
    mutual_information,
)
from .rdf import rdf_at_distortion

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# KL radii this small cannot be resolved by sampling; the ball is just mu0
POINT_BALL = 1e-12


@dataclass(frozen=True)
class BernoulliRrdfPoint:
    beta0: float
    D: float
    Gamma: float
    beta_star: float
    lam: float
    rate: float  # bits

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["lambda"] = rec.pop("lam")
        return {k: (v if math.isfinite(v) else None) for k, v in rec.items()}


def _bern_kl_offset(beta0: float, eps: float) -> float:
    """``KL(Bern(beta0 + eps) || Bern(beta0))`` without cancellation for small ``eps``."""
    b = beta0 + eps
    val = b * math.log1p(eps / beta0)
    if b < 1.0:
        val += (1.0 - b) * math.log1p(-eps / (1.0 - beta0))
    return max(val, 0.0)


def _beta_of_lambda(beta0: float, lam: float) -> float:
    if math.isinf(lam):
        return beta0
    return 1.0 / (1.0 + ((1.0 - beta0) / beta0) ** (lam / (1.0 + lam)))


def _lambda_of_beta(beta0: float, beta: float) -> float:
    # invert beta = 1 / (1 + r^(lam / (1 + lam))), r = (1 - beta0) / beta0
    u = math.log((1.0 - beta) / beta) / math.log((1.0 - beta0) / beta0)
    return math.inf if u >= 1.0 else u / (1.0 - u)


def bernoulli_rrdf(beta0: float, D: float, Gamma: float) -> BernoulliRrdfPoint:
    """Robust RDF (bits) of ``Bern(beta0)`` under Hamming distortion over a KL ball.

    The worst case is the largest ``beta <= 1/2`` in the ball, found by
    bisection on ``beta - beta0``; the KL multiplier follows in closed form
    from the tilting relation. Sources with ``beta0 > 1/2`` are handled by
    swapping the symbols.
    """
    if not 0.0 < beta0 < 1.0:
        raise ValueError(f"beta0 must lie in (0, 1), got {beta0}")
    if not 0.0 <= D <= 0.5:
        raise ValueError(f"D must lie in [0, 1/2], got {D}")
    if Gamma < 0:
        raise ValueError(f"Gamma must be nonnegative, got {Gamma}")
    if beta0 > 0.5:
        p = bernoulli_rrdf(1.0 - beta0, D, Gamma)
        return BernoulliRrdfPoint(beta0, D, Gamma, 1.0 - p.beta_star, p.lam, p.rate)

    if Gamma == 0 or beta0 == 0.5:
        b, lam = beta0, (math.inf if Gamma == 0 else 0.0)
    elif _bern_kl_offset(beta0, 0.5 - beta0) <= Gamma:
        b, lam = 0.5, 0.0
    else:
        lo, hi = 0.0, 0.5 - beta0
        for _ in range(2000):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if _bern_kl_offset(beta0, mid) <= Gamma:
                lo = mid
            else:
                hi = mid
        b = beta0 + lo
        lam = _lambda_of_beta(beta0, b)
    rate = max(binary_entropy(b) - binary_entropy(D), 0.0)
    return BernoulliRrdfPoint(beta0, D, Gamma, b, lam, rate)


def simplex_grid(n_symbols: int, grid_res: float) -> np.ndarray:
    """All pmfs on ``n_symbols`` letters whose entries are multiples of ``grid_res``."""
    n = int(round(1.0 / grid_res))
    if n_symbols == 1:
        return np.ones((1, 1))
    pts = []
    for cuts in itertools.combinations(range(n + n_symbols - 1), n_symbols - 1):
        parts = np.diff((-1,) + cuts + (n + n_symbols - 1,)) - 1
        pts.append(parts)
    return np.array(pts, dtype=np.float64) / n


def bruteforce_maxmin(mu0, delta, D: float, Gamma: float, grid_res: float = 1e-3) -> float:
    """Max over grid sources in the KL ball of the classical ``R(D)`` (nats).

    Independent of the Newton solver: it only uses Blahut-Arimoto with an
    ``s``-bisection per grid source.
    """
    mu0, delta = as_pmf(mu0), as_distortion(delta)
    if len(mu0) > 4:
        raise ValueError("brute force is limited to |X| <= 4")
    if grid_res <= 0:
        raise ValueError("grid_res must be positive")
    if len(mu0) == 2:
        b = np.round(np.arange(0, 1 + grid_res / 2, grid_res), 15)
        grid = np.column_stack([1 - b, b])
    else:
        grid = simplex_grid(len(mu0), grid_res)
    on = mu0 > 0
    feasible = grid[np.all(grid[:, ~on] == 0, axis=1)] if not on.all() else grid
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(feasible > 0, feasible * np.log(feasible / mu0), 0.0)
    kl = terms.sum(axis=1)
    feasible = feasible[kl <= Gamma]
    if len(feasible) == 0:
        feasible = mu0[None, :]
    best = 0.0
    for mu in feasible:
        mu = mu / mu.sum()
        rate, _ = rdf_at_distortion(mu, delta, D)
        best = max(best, rate)
    return best


def _free_energy(f, log_mu0, t, Gamma, fbar):
    z = (f - fbar) / t
    if np.max(np.abs(z)) < 0.5:
        # large t: log1p keeps the O(1/t) correction from cancelling away
        return fbar + t * math.log1p(float(np.exp(log_mu0) @ np.expm1(z))) + t * Gamma
    return fbar + t * float(logsumexp(log_mu0 + z)) + t * Gamma


def worst_case_expected_distortion(Q, mu0, Gamma: float, delta) -> float:
    """``sup {E_{mu (x) Q}[delta] : KL(mu || mu0) <= Gamma}``.

    Uses the free-energy dual ``inf_t t ln E_mu0 exp(f/t) + t Gamma`` with
    ``f(x) = sum_y Q(y|x) delta(x, y)``, minimized by golden-section search in
    ``ln t`` over ``[1e-8, 1e8]``.
    """
    Q, mu0, delta = as_channel(Q), as_pmf(mu0), as_distortion(delta)
    if Gamma < 0:
        raise ValueError("Gamma must be nonnegative")
    f = np.sum(Q * delta, axis=1)
    if Gamma == 0:
        return float(mu0 @ f)
    on = mu0 > 0
    f, log_mu0 = f[on], np.log(mu0[on])
    fmax = float(f.max())
    if float(f.min()) == fmax:
        return fmax
    fbar = float(mu0[on] @ f)

    def phi(u):
        return _free_energy(f, log_mu0, math.exp(u), Gamma, fbar)

    a, b = math.log(1e-8), math.log(1e8)
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = phi(c), phi(d)
    while b - a > 1e-10:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = phi(d)
    # every dual value is an upper bound; so is max f. The nominal lies in the
    # ball, so its mean is a lower bound.
    return max(min(fc, fd, phi(math.log(1e-8)), phi(math.log(1e8)), fmax), fbar)


def kernel_in_constraint_set(Q, mu0, Gamma: float, delta, D: float, tol: float = 1e-6) -> bool:
    """True when ``Q`` meets distortion ``D`` for every source in the ball."""
    return worst_case_expected_distortion(Q, mu0, Gamma, delta) <= D + tol


@dataclass(frozen=True)
class SaddleReport:
    n_samples: int
    max_sampled_mi: float
    mi_at_mu_star: float
    rate: float
    gap: float
    worst_case_distortion: float
    distortion_D: float
    distortion_excess: float
    acceptance_rate: float
    concentration: float | None
    starved: bool
    ok: bool

    def to_record(self) -> dict:
        return asdict(self)


def sample_kl_ball(mu0, Gamma: float, n_samples: int, rng: np.random.Generator,
                   batch: int = 4096, max_proposals: int = 2_000_000):
    """Rejection-sample sources with ``KL(mu || mu0) <= Gamma``.

    Starts from Dirichlet(1) proposals and switches to Dirichlet(c * mu0),
    ``c = 50, 500, ...``, while the acceptance rate stays under 1%.
    Radii below ``POINT_BALL`` are treated as the single point ``mu0``.
    Returns ``(samples, acceptance_rate, concentration)``.
    """
    mu0 = as_pmf(mu0)
    on = mu0 > 0
    if Gamma < POINT_BALL or on.sum() == 1:
        return np.tile(mu0, (max(n_samples, 1), 1))[:n_samples], 1.0, None
    base = mu0[on]
    conc = None
    accepted, proposed = [], 0
    n_got = 0
    while n_got < n_samples and proposed < max_proposals:
        alpha = np.ones_like(base) if conc is None else conc * base
        props = rng.dirichlet(alpha, size=batch)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(props > 0, props * np.log(props / base), 0.0)
        keep = props[terms.sum(axis=1) <= Gamma]
        proposed += batch
        rate = len(keep) / batch
        if keep.size:
            accepted.append(keep)
            n_got += len(keep)
        if rate < 0.01 and n_got < n_samples:
            if conc is None:
                conc = 50.0
            elif conc < 1e9:
                conc *= 10.0
    samples = np.concatenate(accepted)[:n_samples] if accepted else np.empty((0, len(base)))
    full = np.zeros((len(samples), len(mu0)))
    full[:, on] = samples
    return full, (n_got / proposed if proposed else 0.0), conc


def saddle_check(sol, n_samples: int = 200, seed: int = 0, Q=None,
                 mi_tol: float = 1e-3, distortion_tol: float = 1e-6) -> SaddleReport:
    """Check a solved point against sources sampled from its KL ball.

    Reports the largest ``I(mu, Q*)`` among the samples relative to the
    solution's rate, and the worst-case expected distortion of ``Q*`` relative
    to ``D``. ``Q`` overrides the solution's kernel (for perturbation tests).
    """
    prob = sol.problem
    if prob is None:
        raise ValueError("solution does not carry its problem")
    Q = sol.Q_star if Q is None else as_channel(Q)
    Gamma = max(sol.radius_Gamma, 0.0)
    rng = np.random.default_rng(seed)
    samples, acc, conc = sample_kl_ball(prob.mu0, Gamma, n_samples, rng)
    mis = [mutual_information(mu, Q) for mu in samples]
    max_mi = max(mis) if mis else float("nan")
    mi_star = mutual_information(sol.mu_star, Q)
    wc = worst_case_expected_distortion(Q, prob.mu0, Gamma, prob.delta)
    gap = max_mi - sol.rate
    excess = wc - sol.distortion_D
    starved = acc < 1e-3
    return SaddleReport(
        n_samples=len(samples), max_sampled_mi=max_mi, mi_at_mu_star=mi_star, rate=sol.rate,
        gap=gap, worst_case_distortion=wc, distortion_D=sol.distortion_D,
        distortion_excess=excess, acceptance_rate=acc, concentration=conc, starved=starved,
        ok=bool(gap <= mi_tol and excess <= distortion_tol and not starved),
    )


__all__ = [
    "BernoulliRrdfPoint",
    "SaddleReport",
    "bernoulli_rrdf",
    "bruteforce_maxmin",
    "kernel_in_constraint_set",
    "sample_kl_ball",
    "saddle_check",
    "simplex_grid",
    "worst_case_expected_distortion",
]
