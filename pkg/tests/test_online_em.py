import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from psfpc.kalman import NoiseModel, initial_state, lag_one_moments, predict, smoother_gain, update
from psfpc.online_em import (
    POOR_SIGMA0,
    VARIANCE_FLOOR,
    EmAccumulators,
    clamp_psd,
    em_update,
    init_theta,
    lambda_k,
)
from psfpc.oscillator import Observation, OscillatorParams, TrueState, observe, q_matrix, sigma_matrix, transition


def test_lambda_k_is_geometric_sum():
    for a in (0.5, 0.9, 0.999):
        for k in (1, 2, 17):
            assert lambda_k(a, k) == pytest.approx(sum(a**i for i in range(k)), rel=1e-12)
    with pytest.raises(ValueError):
        lambda_k(0.9, 0)


def test_alpha_range_checked():
    for a in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            EmAccumulators(alpha=a)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (2, 2), elements=st.floats(-1e3, 1e3)))
def test_clamp_psd_properties(A):
    B = clamp_psd(A)
    np.testing.assert_array_equal(B, B.T)
    assert np.linalg.eigvalsh(B).min() >= -1e-9 * max(1.0, np.abs(A).max())
    S = 0.5 * (A + A.T)
    if np.linalg.eigvalsh(S).min() >= 0:
        np.testing.assert_allclose(B, S)


def test_first_update_equals_single_term():
    rng = np.random.default_rng(0)
    G_k = np.array([[3.0, 0.5], [0.5, 2.0]])
    G_c = np.array([[1.0, 0.2], [0.1, 0.7]])
    G_m = np.array([[2.0, 0.1], [0.1, 1.5]])
    y = Observation(0.3, -0.4)
    m = np.array([0.1, -0.2])
    acc, th = em_update(EmAccumulators(alpha=0.9), (G_k, G_c, G_m), y, m)
    term_Q = G_k - G_c - G_c.T + G_m
    np.testing.assert_allclose(th.Q_hat, clamp_psd(term_Q))
    assert th.sigma_f_sq_hat == pytest.approx(0.09 - 2 * 0.3 * 0.1 + 3.0)
    assert th.sigma_theta_sq_hat == pytest.approx(0.16 - 2 * 0.4 * 0.2 + 2.0)
    assert acc.k == 1


def test_forgetting_recursion_is_weighted_average():
    terms = [np.diag([float(i + 1), 2.0 * (i + 1)]) for i in range(5)]
    acc = EmAccumulators(alpha=0.8)
    for T in terms:
        # G_cross = 0, G_km1 = 0 so term_Q = G_k
        acc, th = em_update(acc, (T, np.zeros((2, 2)), np.zeros((2, 2))), Observation(0.0, 0.0), np.zeros(2))
    w = 0.8 ** np.arange(4, -1, -1)
    want = sum(wi * T for wi, T in zip(w, terms)) / w.sum()
    np.testing.assert_allclose(th.Q_hat, want, rtol=1e-13)


def test_variance_floor_applies():
    z = np.zeros((2, 2))
    _, th = em_update(EmAccumulators(), (z, z, z), Observation(0.0, 0.0), np.zeros(2))
    assert th.sigma_f_sq_hat == VARIANCE_FLOOR and th.sigma_theta_sq_hat == VARIANCE_FLOOR


def test_init_cases():
    p = OscillatorParams()
    a = init_theta("poor_a", p)
    assert a.Q_hat[0, 1] == 0.0 and a.Q_hat[0, 0] == pytest.approx(100.0)
    np.testing.assert_array_equal(a.Sigma_hat, POOR_SIGMA0)
    b = init_theta("good_b", p)
    np.testing.assert_array_equal(b.Q_hat, q_matrix(p))
    np.testing.assert_array_equal(b.Sigma_hat, POOR_SIGMA0)
    g = init_theta("genie", p)
    np.testing.assert_array_equal(g.Sigma_hat, sigma_matrix(p))
    c = init_theta("custom", p, Q=np.eye(2), Sigma=2 * np.eye(2))
    assert c.noise_model().Sigma[1, 1] == 2.0
    with pytest.raises(ValueError):
        init_theta("custom", p)
    with pytest.raises(ValueError):
        init_theta("nope", p)


def test_recovers_true_parameters_single_node():
    p = OscillatorParams()
    Q, S = q_matrix(p), sigma_matrix(p)
    model = NoiseModel(Q, S)
    rng = np.random.default_rng(1)
    x = TrueState(0.0, np.pi)
    kf = initial_state(p, carrier_offset=True)
    acc = EmAccumulators(alpha=0.999)
    for _ in range(5000):
        x = transition(x, p, rng)
        y = observe(x, p, rng)
        pred = predict(kf, model)
        U = smoother_gain(pred)
        new = update(pred, y, model)
        acc, th = em_update(acc, lag_one_moments(kf, new, U), y, new.m)
        kf = new
    assert np.linalg.norm(th.Q_hat - Q) / np.linalg.norm(Q) < 0.1
    assert th.sigma_f_sq_hat == pytest.approx(S[0, 0], rel=0.1)
    assert th.sigma_theta_sq_hat == pytest.approx(S[1, 1], rel=0.1)


def test_lambda_k_reference():
    assert lambda_k(0.5, 3) == pytest.approx(1.75)


def test_init_reference_values():
    p = OscillatorParams()
    a = init_theta("poor_a", p)
    np.testing.assert_allclose(a.Q_hat, np.diag([100.0, np.pi**2 * 1e-8 * 100.0]), rtol=1e-12)
    g = init_theta("genie", p)
    np.testing.assert_allclose(g.Sigma_hat.diagonal(), [1.52e5, 4e-12], rtol=1e-3)
