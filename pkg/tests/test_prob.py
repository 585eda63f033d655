import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_rdf.prob import (
    ProbabilityError,
    as_channel,
    as_pmf,
    bernoulli,
    binary_entropy,
    entropy,
    expected_distortion,
    hamming,
    kl_divergence,
    mutual_information,
    sup_mutual_information,
    to_bits,
)

from strategies import channels, pmfs


def test_as_pmf_renormalizes_tiny_drift_and_rejects_large():
    p = as_pmf([0.5, 0.5 + 1e-11])
    assert abs(p.sum() - 1) < 1e-15
    with pytest.raises(ProbabilityError):
        as_pmf([0.5, 0.6])
    with pytest.raises(ProbabilityError):
        as_pmf([1.2, -0.2])
    with pytest.raises(ProbabilityError):
        as_pmf([])


def test_validated_arrays_are_read_only_copies():
    src = np.array([0.25, 0.75])
    p = as_pmf(src)
    src[0] = 0.9
    assert p[0] == 0.25
    with pytest.raises(ValueError):
        p[0] = 0.1


def test_as_channel_checks_rows():
    with pytest.raises(ProbabilityError):
        as_channel([[0.5, 0.4], [0.5, 0.5]])
    assert as_channel([[1.0, 0.0]]).shape == (1, 2)


def test_hamming_and_bernoulli():
    assert np.array_equal(hamming(2), [[0, 1], [1, 0]])
    assert hamming(2, 3).shape == (2, 3)
    assert np.array_equal(bernoulli(0.1), [0.9, 0.1])
    with pytest.raises(ProbabilityError):
        bernoulli(1.5)


def test_entropy_known_values():
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2))
    assert entropy([1.0, 0.0]) == 0.0
    # h(0.1) = -0.1 log2 0.1 - 0.9 log2 0.9
    assert binary_entropy(0.1) == pytest.approx(0.4689955935892812, abs=1e-15)
    assert binary_entropy(0.0) == 0.0


def test_kl_infinite_when_not_dominated():
    assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))


def test_mutual_information_bsc():
    # BSC(0.1) with uniform input: 1 - h(0.1) bits
    Q = [[0.9, 0.1], [0.1, 0.9]]
    assert to_bits(mutual_information([0.5, 0.5], Q)) == pytest.approx(1 - 0.4689955935892812, abs=1e-12)


def test_sup_mutual_information_returns_first_argmax():
    Q = np.array([[0.9, 0.1], [0.1, 0.9]])
    val, arg = sup_mutual_information([[0.5, 0.5], [0.9, 0.1], [0.5, 0.5]], Q)
    assert arg == 0
    assert val == pytest.approx(mutual_information([0.5, 0.5], Q))


def test_expected_distortion_hamming_is_error_rate():
    Q = [[0.8, 0.2], [0.3, 0.7]]
    assert expected_distortion([0.5, 0.5], Q, hamming(2)) == pytest.approx(0.25)


@given(pmfs(), pmfs())
def test_kl_nonnegative_and_zero_on_diagonal(p, q):
    if len(p) != len(q):
        return
    assert kl_divergence(p, q) >= 0
    assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-12)


@given(st.integers(2, 5).flatmap(lambda n: st.tuples(pmfs(n=n), channels(n, 3))))
def test_mutual_information_bounds(args):
    mu, Q = args
    mi = mutual_information(mu, Q)
    assert -1e-12 <= mi <= min(entropy(mu), math.log(3)) + 1e-9
    # constant channel carries no information
    assert mutual_information(mu, np.tile(Q[0], (len(mu), 1))) == pytest.approx(0.0, abs=1e-12)
