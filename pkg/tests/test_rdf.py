import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_rdf.prob import LN2, bernoulli, binary_entropy, hamming
from robust_rdf.rdf import (
    DualParams,
    NumericalRangeError,
    ba_solve,
    c_values,
    dual_value,
    kernel_from_marginal,
    rdf_at_distortion,
    row_normalizers,
)

from strategies import pmfs


def test_dual_params_validation():
    with pytest.raises(ValueError):
        DualParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        DualParams(1.0, float("nan"))


def test_ba_bernoulli_closed_form():
    # Bern(0.1), Hamming: slope s = ln((1-D)/D) gives D = 0.05 and R = h(0.1) - h(0.05)
    D = 0.05
    res = ba_solve(bernoulli(0.1), hamming(2), math.log((1 - D) / D), tol=1e-13)
    assert res.converged
    assert res.distortion == pytest.approx(D, abs=1e-9)
    expected = binary_entropy(0.1) - binary_entropy(D)
    assert res.rate / LN2 == pytest.approx(expected, abs=1e-8)
    assert expected == pytest.approx(0.1825986, abs=1e-7)


def test_dual_value_hand_computed():
    s, D = math.log(9), 0.1
    # g_x = (1 + 1/9) / 2 = 5/9 for both x
    expected = -s * D - math.log(5 / 9)
    assert dual_value([0.5, 0.5], bernoulli(0.1), s, D, hamming(2)) == pytest.approx(expected, abs=1e-14)
    assert expected == pytest.approx(0.368064, abs=1e-6)


def test_kernel_from_marginal_is_bsc_for_uniform_marginal():
    Q = kernel_from_marginal([0.5, 0.5], math.log(9), hamming(2))
    np.testing.assert_allclose(Q, [[0.9, 0.1], [0.1, 0.9]], atol=1e-15)


def test_row_normalizer_underflow_raises():
    with pytest.raises(NumericalRangeError):
        row_normalizers(np.array([1.0, 0.0]), 1e4, np.array([[1.0, 0.0], [1.0, 0.0]]))


def test_zero_rate_above_threshold():
    rate, res = rdf_at_distortion(bernoulli(0.1), hamming(2), 0.1)
    assert rate == 0.0 and res is None
    with pytest.raises(ValueError):
        rdf_at_distortion([0.5, 0.5], np.array([[0.1, 1.0], [1.0, 0.1]]), 0.05)


@given(st.floats(0.05, 0.5), st.floats(0.01, 0.95))
def test_rdf_at_distortion_bernoulli(beta, frac):
    D = frac * min(beta, 1 - beta)
    rate, _ = rdf_at_distortion(bernoulli(beta), hamming(2), D, tol_D=1e-9)
    assert rate / LN2 == pytest.approx(binary_entropy(beta) - binary_entropy(D), abs=2e-6)


@given(st.integers(2, 5).flatmap(lambda n: st.tuples(pmfs(n=n), pmfs(n=n))), st.floats(0.1, 5.0))
def test_c_values_identity(args, s):
    # sum_y q(y) c(y) = sum_x mu(x) = 1 for any q
    mu, q = args
    delta = hamming(len(mu))
    c = c_values(q, mu, s, delta)
    assert float(q @ c) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(2, 5).flatmap(lambda n: pmfs(n=n)), st.floats(0.2, 6.0))
def test_ba_fixed_point_certified(mu, s):
    res = ba_solve(mu, hamming(len(mu)), s, tol=1e-12, max_iter=200_000)
    c = c_values(res.q, mu, s, hamming(len(mu)))
    assert np.all(c <= 1 + 1e-6)
    # rate equals the dual at the achieved distortion
    assert res.rate == pytest.approx(dual_value(res.q, mu, s, res.distortion, hamming(len(mu))), abs=1e-6)
