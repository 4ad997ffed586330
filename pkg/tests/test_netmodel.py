import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netid.exceptions import ModelError, SimulationError
from netid.netmodel import (Dataset, NetworkModel, Polynomial, RationalTF, build_check_H,
                            check_lambda, filter_series, impulse_response, simulate,
                            simulate_experiment)

G14 = RationalTF([0, 0.38, 0.24], [1, -1.35, 0.54])


def direct_convolution(h, u):
    y = np.zeros(len(u))
    for t in range(len(u)):
        for k in range(min(t + 1, len(h))):
            y[t] += h[k] * u[t - k]
    return y


def power_series(num, den, n):
    # long division written out independently of the library
    num = list(num) + [0.0] * n
    out = []
    rem = np.array(num[:n], float)
    for k in range(n):
        c = rem[k] / den[0]
        out.append(c)
        for i, d in enumerate(den):
            if k + i < n:
                rem[k + i] -= c * d
    return np.array(out)


# ---- polynomials and filters

def test_polynomial_predicates():
    assert Polynomial([1, 0.5]).is_monic
    assert Polynomial([0, 0.5]).is_strictly_proper
    assert Polynomial([1, 0.5, 0.25]).degree == 2


def test_non_monic_denominator_rejected():
    with pytest.raises(ModelError):
        RationalTF([1.0], [2.0, 1.0])


def test_filter_identity(rng):
    u = rng.standard_normal(20)
    np.testing.assert_array_equal(filter_series(RationalTF([1.0]), u), u)


def test_filter_pure_delay():
    np.testing.assert_allclose(filter_series(RationalTF([0, 1.0]), [1, 2, 3]), [0, 1, 2])


def test_filter_matches_convolution_oracle():
    u = np.zeros(50)
    u[0] = 1.0
    h = power_series(G14.num.coeffs, G14.den.coeffs, 50)
    np.testing.assert_allclose(filter_series(G14, u), direct_convolution(h, u), atol=1e-12)
    rnd = np.random.default_rng(0).standard_normal(50)
    np.testing.assert_allclose(filter_series(G14, rnd), direct_convolution(h, rnd), atol=1e-10)


def test_impulse_response_geometric():
    a = 0.7
    np.testing.assert_allclose(impulse_response(RationalTF([1.0], [1, -a]), 4).coeffs,
                               [1, a, a ** 2, a ** 3])


def test_impulse_response_hand_division():
    H32 = RationalTF([0, -0.56], [1, -0.40])
    np.testing.assert_allclose(impulse_response(H32, 3).coeffs, [0, -0.56, -0.224], atol=1e-15)


coeff = st.floats(-0.9, 0.9, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(coeff, min_size=1, max_size=4), st.lists(coeff, min_size=0, max_size=2),
       st.integers(1, 30))
def test_impulse_response_prefix_of_filtered_impulse(num, den_tail, n):
    tf = RationalTF([0.0] + num, [1.0] + [0.3 * d for d in den_tail])
    u = np.zeros(40)
    u[0] = 1.0
    y = filter_series(tf, u)
    assert impulse_response(tf, n).coeffs[0] == 0.0
    np.testing.assert_allclose(impulse_response(tf, n).coeffs, y[:n], atol=1e-10)
    np.testing.assert_allclose(impulse_response(tf, n).coeffs,
                               power_series(tf.num.coeffs, tf.den.coeffs, n), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 10_000))
def test_filter_linearity(alpha, beta, seed):
    r = np.random.default_rng(seed)
    u, v = r.standard_normal((2, 60))
    lhs = filter_series(G14, alpha * u + beta * v)
    rhs = alpha * filter_series(G14, u) + beta * filter_series(G14, v)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


# ---- network model

def test_model_rejects_self_loop_and_proper_G():
    with pytest.raises(ModelError):
        NetworkModel(2, 0, 2, {(0, 0): RationalTF([0, 1])}, {}, {}, np.eye(2))
    with pytest.raises(ModelError):
        NetworkModel(2, 0, 2, {(0, 1): RationalTF([1, 1])}, {}, {}, np.eye(2))


def test_gamma_is_feedthrough_of_lower_rows(net_all):
    np.testing.assert_array_equal(net_all.gamma, [[0, 0, 1, 0], [0, 1, 0, 0]])


def test_build_check_H_full_rank_unchanged():
    H = {(0, 0): RationalTF([1, 0.5], [1, 0.2]), (1, 1): RationalTF([1.0]),
         (1, 0): RationalTF([0, 0.3])}
    m = NetworkModel(2, 0, 2, {}, H, {}, np.eye(2))
    out = build_check_H(m)
    assert out[0][0] == H[(0, 0)] and out[1][0] == H[(1, 0)] and out[0][1] is None


def test_build_check_H_six_node(net_all):
    Hc = build_check_H(net_all)
    H = net_all.H
    # node 5: (H52, H53 - 1, 0, 0); node 6: (0, H62 - 1, 0, H64)
    assert Hc[4][1] == H[(4, 1)]
    assert Hc[4][2] == H[(4, 2)].minus_constant(1.0)
    assert Hc[4][0] is None and Hc[4][3] is None
    assert Hc[5][1] == H[(5, 1)].minus_constant(1.0)
    assert Hc[5][3] == H[(5, 3)]
    assert Hc[5][0] is None and Hc[5][2] is None
    # last L - p columns are [0; I] and the feedthrough is the identity
    for j in range(6):
        for c in range(6):
            tf = Hc[j][c]
            ft = 0.0 if tf is None else tf.feedthrough
            assert ft == (1.0 if j == c else 0.0)
            if c >= 4:
                assert (tf is not None) == (j == c)


def test_check_lambda_full_rank_is_lambda():
    lam = np.array([[1.0, 0.2], [0.2, 0.5]])
    m = NetworkModel(2, 0, 2, {}, {(0, 0): RationalTF([1.0]), (1, 1): RationalTF([1.0])}, {},
                     lam)
    np.testing.assert_array_equal(check_lambda(m), lam)


def test_check_lambda_six_node(net_all):
    lam = check_lambda(net_all)
    assert np.linalg.matrix_rank(lam, tol=1e-12) == 4
    assert lam[4, 4] == pytest.approx(0.3) and lam[5, 5] == pytest.approx(0.2)
    assert np.linalg.eigvalsh(lam).min() > -1e-14


# ---- simulation

def test_simulate_trivial_network(rng):
    m = NetworkModel(3, 3, 3, {}, {(j, j): RationalTF([1.0]) for j in range(3)},
                     {(j, j): RationalTF([1.0]) for j in range(3)}, np.zeros((3, 3)))
    r = rng.standard_normal((120, 3))
    d = simulate(m, r, seed=0, burn_in=20)
    np.testing.assert_array_equal(d.w, r[20:])


def test_simulate_zero_inputs_gives_zero(net_all):
    zero = NetworkModel(6, 6, 4, net_all.G, net_all.H, net_all.R, np.zeros((4, 4)))
    d = simulate(zero, np.zeros((600, 6)), seed=3)
    assert np.all(d.w == 0)


def test_simulate_deterministic(net_all):
    a = simulate_experiment(net_all, 400, seed=5)
    b = simulate_experiment(net_all, 400, seed=5)
    np.testing.assert_array_equal(a.w, b.w)
    np.testing.assert_array_equal(a.e_true, b.e_true)


def test_loop_closure(net_all):
    d = simulate_experiment(net_all, 800, seed=2, burn_in=0)
    resid = d.w.copy()
    for (j, l), tf in net_all.G.items():
        resid[:, j] -= filter_series(tf, d.w[:, l])
    for (j, k), tf in net_all.R.items():
        resid[:, j] -= filter_series(tf, d.r[:, k])
    for (j, s), tf in net_all.H.items():
        resid[:, j] -= filter_series(tf, d.e_true[:, s])
    assert np.abs(resid).max() < 1e-9


def test_gamma_relation_in_static_noise(net_all):
    # e_b = Gamma e_a holds exactly for the square-form innovation
    d = simulate_experiment(net_all, 2000, seed=4)
    e_check = np.hstack([d.e_true, d.e_true @ net_all.gamma.T])
    lam = e_check.T @ e_check / len(e_check)
    assert np.linalg.svd(lam, compute_uv=False)[4] < 1e-12
    assert lam[4, 4] == pytest.approx(0.3, rel=0.15)


def test_divergence_guard():
    unstable = NetworkModel(2, 0, 2, {(0, 1): RationalTF([0, 1.5]), (1, 0): RationalTF([0, 1.5])},
                            {(0, 0): RationalTF([1.0]), (1, 1): RationalTF([1.0])}, {}, np.eye(2))
    with pytest.raises(SimulationError):
        simulate(unstable, np.zeros((3000, 0)), seed=0)


def test_dataset_validation():
    with pytest.raises(ModelError):
        Dataset(np.zeros((5, 2)), np.zeros((4, 1)))
    with pytest.raises(ModelError):
        Dataset(np.zeros((5, 2)), np.zeros((5, 0)), node_order=(0, 0))
    d = Dataset(np.arange(10.0).reshape(5, 2), np.zeros((5, 0)))
    assert d.permuted([1, 0]).node_order == (1, 0)
    np.testing.assert_array_equal(d.permuted([1, 0]).w[:, 0], d.w[:, 1])
