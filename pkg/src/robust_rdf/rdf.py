"""Fixed-source rate-distortion machinery.

Everything here is parameterized by the distortion multiplier ``s`` rather
than by a distortion level; the ``s -> D`` map comes out of the solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .prob import as_distortion, as_pmf, expected_distortion, mutual_information


class NumericalRangeError(ArithmeticError):
    """A normalizer underflowed or overflowed for the requested multipliers."""


@dataclass(frozen=True)
class DualParams:
    s: float
    lam: float

    def __post_init__(self):
        if not (self.s >= 0 and self.lam >= 0):
            raise ValueError(f"multipliers must be nonnegative, got s={self.s}, lambda={self.lam}")


@dataclass(frozen=True)
class BaResult:
    q: np.ndarray
    Q: np.ndarray
    rate: float
    distortion: float
    iterations: int
    converged: bool


def _check_shapes(q, delta, mu=None):
    if delta.shape[1] != q.shape[0]:
        raise ValueError(f"distortion has {delta.shape[1]} columns, marginal has {q.shape[0]} symbols")
    if mu is not None and delta.shape[0] != mu.shape[0]:
        raise ValueError(f"distortion has {delta.shape[0]} rows, source has {mu.shape[0]} symbols")


def row_normalizers(q, s, delta) -> np.ndarray:
    """``sum_y exp(-s delta(x, y)) q(y)`` for every ``x``; raises on underflow."""
    g = np.exp(-s * delta) @ q
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~(g > 0) | ~np.isfinite(g)).tolist()
        raise NumericalRangeError(f"row normalizer out of range at x={bad} for s={s}")
    return g


def kernel_from_marginal(q, s: float, delta) -> np.ndarray:
    """Optimal test channel for output marginal ``q`` at slope ``s``.

    ``Q(y|x) = exp(-s delta(x, y)) q(y) / sum_y' exp(-s delta(x, y')) q(y')``
    """
    q = as_pmf(q)
    delta = as_distortion(delta)
    _check_shapes(q, delta)
    if s < 0:
        raise ValueError("s must be nonnegative")
    W = np.exp(-s * delta) * q
    g = W.sum(axis=1)
    if np.any(g <= 0):
        raise NumericalRangeError(f"kernel normalizer underflowed for s={s}")
    return W / g[:, None]


def dual_value(q, mu, s: float, D: float, delta) -> float:
    """``-s D - sum_x mu(x) ln sum_y exp(-s delta(x, y)) q(y)`` in nats."""
    q, mu, delta = as_pmf(q), as_pmf(mu), as_distortion(delta)
    _check_shapes(q, delta, mu)
    g = row_normalizers(q, s, delta)
    on = mu > 0
    return float(-s * D - np.sum(mu[on] * np.log(g[on])))


def c_values(q, mu, s: float, delta) -> np.ndarray:
    """Marginal optimality coefficients; ``c <= 1`` with equality on ``supp(q)`` at the optimum."""
    q, mu, delta = as_pmf(q), as_pmf(mu), as_distortion(delta)
    _check_shapes(q, delta, mu)
    E = np.exp(-s * delta)
    g = row_normalizers(q, s, delta)
    return (mu / g) @ E


def ba_solve(mu, delta, s: float, tol: float = 1e-10, max_iter: int = 10_000,
             q_init=None) -> BaResult:
    """Blahut-Arimoto for a fixed source at slope ``s``.

    Alternates the output marginal and the optimal kernel until the marginal
    moves by less than ``tol`` in max-norm.
    """
    mu, delta = as_pmf(mu), as_distortion(delta)
    if delta.shape[0] != mu.shape[0]:
        raise ValueError(f"distortion has {delta.shape[0]} rows, source has {mu.shape[0]} symbols")
    if s < 0 or tol <= 0:
        raise ValueError("need s >= 0 and tol > 0")
    ny = delta.shape[1]
    q = np.full(ny, 1.0 / ny) if q_init is None else np.array(as_pmf(q_init), copy=True)
    E = np.ascontiguousarray(np.exp(-s * delta))
    if np.any(E @ q <= 0):
        raise NumericalRangeError(f"row normalizer underflowed for s={s}")
    iterations, converged = kernels.ba_iterate(mu, E, q, float(tol), int(max_iter))
    q = as_pmf(q)
    Q = kernel_from_marginal(q, s, delta)
    return BaResult(
        q=q,
        Q=Q,
        rate=mutual_information(mu, Q),
        distortion=expected_distortion(mu, Q, delta),
        iterations=int(iterations),
        converged=bool(converged),
    )


def rdf_at_distortion(mu, delta, D: float, tol_D: float = 1e-6, s_max: float = 200.0):
    """Classical ``R(D)`` (nats) by bisection on ``s`` over Blahut-Arimoto solves.

    Returns ``(rate, BaResult)``. Distortions at or above the zero-rate level give
    rate 0.
    """
    mu, delta = as_pmf(mu), as_distortion(delta)
    d_zero = float(np.min(mu @ delta))
    if D >= d_zero:
        return 0.0, None
    d_floor = float(mu @ delta.min(axis=1))
    if D < d_floor:
        raise ValueError(f"distortion {D} below the minimum achievable {d_floor}")
    lo, hi = 0.0, 1.0
    res = ba_solve(mu, delta, hi)
    while res.distortion > D and hi < s_max:
        lo, hi = hi, min(2 * hi, s_max)
        # no warm start: a nearly collapsed marginal regrows too slowly and
        # trips the step-size stopping rule
        res = ba_solve(mu, delta, hi)
    best, s_best = res, hi
    for _ in range(200):
        if abs(best.distortion - D) <= tol_D or hi - lo < 1e-13:
            break
        mid = 0.5 * (lo + hi)
        r = ba_solve(mu, delta, mid)
        if r.distortion > D:
            lo = mid
        else:
            hi = mid
        if abs(r.distortion - D) < abs(best.distortion - D):
            best, s_best = r, mid
    # R(D) has slope -s; remove the residual distortion mismatch to first order
    rate = best.rate + s_best * (best.distortion - D)
    return max(rate, 0.0), best
