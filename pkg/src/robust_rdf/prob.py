"""Finite-alphabet probability primitives.

Distributions are plain float64 numpy arrays. The ``as_*`` helpers validate
them and return read-only copies, so values can be shared freely. All
information quantities are in nats unless the name says otherwise.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

LN2 = math.log(2.0)

SIMPLEX_TOL = 1e-12
RENORMALIZE_TOL = 1e-9


class ProbabilityError(ValueError):
    """Raised for malformed distributions, channels or distortion matrices."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


def _fix_sums(a: np.ndarray, axis: int | None, what: str) -> np.ndarray:
    sums = a.sum(axis=axis, keepdims=axis is not None)
    dev = np.max(np.abs(sums - 1.0))
    if dev > RENORMALIZE_TOL:
        raise ProbabilityError(f"{what} does not sum to 1 (deviation {dev:.3g})")
    if dev > SIMPLEX_TOL:
        a = a / sums
    return a


def as_pmf(p: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validate a probability vector and return a read-only float64 copy.

    Sums off by less than 1e-9 are renormalized; anything worse is rejected.
    """
    a = np.asarray(p, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise ProbabilityError(f"pmf must be a nonempty vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise ProbabilityError("pmf entries must be finite and nonnegative")
    return _frozen(_fix_sums(a, None, "pmf"))


def as_channel(Q: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """Validate a row-stochastic matrix ``Q[x, y] = Q(y|x)``."""
    a = np.asarray(Q, dtype=np.float64)
    if a.ndim != 2 or 0 in a.shape:
        raise ProbabilityError(f"channel must be a nonempty matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise ProbabilityError("channel entries must be finite and nonnegative")
    return _frozen(_fix_sums(a, 1, "channel row"))


def as_distortion(delta: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    a = np.asarray(delta, dtype=np.float64)
    if a.ndim != 2 or 0 in a.shape:
        raise ProbabilityError(f"distortion must be a nonempty matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise ProbabilityError("distortion entries must be finite and nonnegative")
    return _frozen(a)


def hamming(n: int, m: int | None = None) -> np.ndarray:
    """Hamming distortion ``1[x != y]`` on an ``n x m`` grid (square by default)."""
    m = n if m is None else m
    return _frozen(1.0 - np.eye(n, m))


def bernoulli(beta: float) -> np.ndarray:
    """``Bern(beta)`` as the pmf ``(1 - beta, beta)``."""
    if not 0.0 <= beta <= 1.0:
        raise ProbabilityError(f"Bernoulli parameter out of range: {beta}")
    return _frozen([1.0 - beta, beta])


def entropy(p) -> float:
    """Shannon entropy in nats, with ``0 ln 0 = 0``."""
    p = as_pmf(p)
    nz = p[p > 0]
    return float(max(-np.sum(nz * np.log(nz)), 0.0))


def binary_entropy(beta: float) -> float:
    """Binary entropy in bits."""
    if not 0.0 <= beta <= 1.0:
        raise ProbabilityError(f"binary_entropy needs beta in [0, 1], got {beta}")
    if beta == 0.0 or beta == 1.0:
        return 0.0
    return float(-beta * math.log2(beta) - (1.0 - beta) * math.log2(1.0 - beta))


def kl_divergence(p, q) -> float:
    """``D(p || q)`` in nats; ``math.inf`` when ``p`` is not dominated by ``q``."""
    p = as_pmf(p)
    q = as_pmf(q)
    if p.shape != q.shape:
        raise ProbabilityError(f"alphabet mismatch: {p.shape} vs {q.shape}")
    on = p > 0
    if np.any(q[on] == 0):
        return math.inf
    return float(max(np.sum(p[on] * np.log(p[on] / q[on])), 0.0))


def output_marginal(mu, Q) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if Q.shape[0] != mu.shape[0]:
        raise ProbabilityError(f"channel has {Q.shape[0]} rows, source has {mu.shape[0]} symbols")
    return mu @ Q


def mutual_information(mu, Q) -> float:
    """``I(mu, Q)`` in nats for source ``mu`` and channel ``Q[x, y] = Q(y|x)``."""
    mu = as_pmf(mu)
    Q = as_channel(Q)
    q = output_marginal(mu, Q)
    joint = mu[:, None] * Q
    on = joint > 0
    ratio = Q[on] / np.broadcast_to(q, Q.shape)[on]
    return float(max(np.sum(joint[on] * np.log(ratio)), 0.0))


def sup_mutual_information(sources, Q) -> tuple[float, int]:
    """Largest ``I(mu, Q)`` over a finite list of sources and its first index."""
    sources = list(sources)
    if not sources:
        raise ProbabilityError("need at least one source")
    best, arg = -math.inf, 0
    for i, mu in enumerate(sources):
        v = mutual_information(mu, Q)
        if v > best:
            best, arg = v, i
    return best, arg


def expected_distortion(mu, Q, delta) -> float:
    """``E[delta(X, Y)]`` under ``mu (x) Q``."""
    mu = np.asarray(mu, dtype=np.float64)
    return float(mu @ np.sum(np.asarray(Q) * np.asarray(delta), axis=1))


def to_bits(nats: float) -> float:
    return nats / LN2
