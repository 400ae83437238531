import numpy as np
import pytest

from coordex.core import make_stream, sigmoid
from coordex.learn import PolicyDelta
from coordex.oracle import (
    RULE_IDS,
    ChainDistribution,
    enumerate_configs,
    exact_boltzmann,
    exact_chain_distribution,
    exact_expected_reward,
    exact_gradient,
    expected_update,
    finite_difference_gradient,
    log_sigmoid,
    max_abs_z,
    negative_statistics,
    random_instance,
    transition_matrix,
    verification_report,
)
from coordex.policy import LayerParams


def test_log_sigmoid_values_and_stability():
    assert abs(log_sigmoid(0.0) + np.log(2.0)) < 1e-15
    with np.errstate(over="raise"):
        assert log_sigmoid(800.0) == 0.0
        assert abs(log_sigmoid(-800.0) + 800.0) < 1e-12


def test_enumerate_configs_bit_order():
    c = enumerate_configs(3)
    assert c.shape == (8, 3)
    for g in range(8):
        for i in range(3):
            assert c[g, i] == (g >> i) & 1
    with pytest.raises(ValueError):
        enumerate_configs(21)


def _two_unit_params(c=1.0, coupling=1.0):
    return LayerParams(
        W=np.zeros((3, 2)),
        b=np.zeros(2),
        W_rec=np.array([[0.0, coupling], [coupling, 0.0]]),
        c=c,
        w_out=np.zeros(2),
        b_out=0.0,
    )


def test_boltzmann_frozen_two_unit():
    # zero pre-activations, unit coupling: weights are 1,1,1,e over
    # {00,10,01,11}, so P(11) = e / (3 + e) = 0.475366886418671...
    m = exact_boltzmann(_two_unit_params(), np.zeros(3, dtype=np.int8))
    want_11 = np.e / (3.0 + np.e)
    assert abs(m.probs[3] - want_11) < 1e-15
    assert abs(m.probs[0] - 1.0 / (3.0 + np.e)) < 1e-15
    want_first = (1.0 + np.e) / (3.0 + np.e)
    np.testing.assert_allclose(m.first, want_first, rtol=0, atol=1e-15)
    assert abs(m.second[0, 1] - want_11) < 1e-15


def test_boltzmann_c_zero_is_product_law():
    params, s, _ = random_instance(0, "alg1")
    params.c = 0.0
    m = exact_boltzmann(params, s)
    p = sigmoid(params.b + s.astype(float) @ params.W)
    hf = m.configs.astype(float)
    want = np.prod(np.where(hf == 1.0, p, 1.0 - p), axis=1)
    np.testing.assert_allclose(m.probs, want, rtol=1e-13, atol=0)
    np.testing.assert_allclose(m.first, p, rtol=1e-13, atol=0)


def test_boltzmann_moment_structure():
    params, s, _ = random_instance(1, "alg1")
    m = exact_boltzmann(params, s)
    assert abs(m.probs.sum() - 1.0) < 1e-12
    assert np.array_equal(m.second, m.second.T)
    # h_i^2 = h_i for binary units
    np.testing.assert_allclose(np.diag(m.second), m.first, rtol=0, atol=1e-14)
    assert negative_statistics is exact_boltzmann


def test_transition_matrix_rows():
    params, s, _ = random_instance(2, "alg2")
    M = transition_matrix(params, s)
    assert M.shape == (8, 8)
    np.testing.assert_allclose(M.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    # brute-force one row from the sweep conditional
    configs = enumerate_configs(3)
    g = 5
    pre = params.c * (configs[g].astype(float) @ params.W_rec) + (
        s.astype(float) @ params.W + params.b
    )
    p = sigmoid(pre)
    for g2 in range(8):
        want = np.prod([p[i] if configs[g2, i] else 1.0 - p[i] for i in range(3)])
        assert abs(M[g, g2] - want) < 1e-13


def test_chain_marginals_and_stationarity():
    params, s, _ = random_instance(3, "alg2")
    d = exact_chain_distribution(params, s, 201)
    assert np.all(np.abs(d.marginals.sum(axis=1) - 1.0) < 1e-10)
    # init is the product law of the feedforward pre-activations
    p = sigmoid(s.astype(float) @ params.W + params.b)
    hf = d.configs.astype(float)
    want = np.prod(np.where(hf == 1.0, p, 1.0 - p), axis=1)
    np.testing.assert_allclose(d.init, want, rtol=1e-12, atol=0)
    # the synchronous kernel mixes: successive marginals coincide by T=200
    tv = 0.5 * np.abs(d.marginals[200] - d.marginals[201]).sum()
    assert tv < 1e-10


def test_chain_validates():
    params, s, _ = random_instance(0, "alg2")
    with pytest.raises(ValueError):
        exact_chain_distribution(params, s, 0)
    big = LayerParams(
        W=np.zeros((3, 11)),
        b=np.zeros(11),
        W_rec=np.zeros((11, 11)),
        c=0.5,
        w_out=np.zeros(11),
        b_out=0.0,
    )
    with pytest.raises(ValueError):
        exact_chain_distribution(big, s, 1)


def test_trajectories_reconstruct_marginals():
    params, s, _ = random_instance(4, "alg2")
    small = LayerParams(
        W=params.W[:, :2].copy(),
        b=params.b[:2].copy(),
        W_rec=params.W_rec[:2, :2].copy(),
        c=params.c,
        w_out=params.w_out[:2].copy(),
        b_out=params.b_out,
    )
    d = exact_chain_distribution(small, s, 2)
    total = 0.0
    final = np.zeros(4)
    for path, p in d.trajectories():
        total += p
        final[path[-1]] += p
    assert abs(total - 1.0) < 1e-12
    np.testing.assert_allclose(final, d.final, rtol=0, atol=1e-12)


def test_trajectories_cap():
    params, s, _ = random_instance(0, "alg2")
    d = exact_chain_distribution(params, s, 8)  # 8^9 paths
    with pytest.raises(ValueError):
        next(iter(d.trajectories()))


def test_expected_reward_hand_check():
    # one hidden unit, k=1 task, target bit 1: E[R] = sum_h P(h) (2 p_out(h) - 1)
    params = LayerParams(
        W=np.array([[0.3], [-0.2], [0.5]]),
        b=np.array([0.1]),
        W_rec=np.zeros((1, 1)),
        c=0.0,
        w_out=np.array([1.2]),
        b_out=-0.3,
    )
    s = np.array([1, 0, 1], dtype=np.int8)
    a = 0.3 + 0.5 + 0.1
    p1 = sigmoid(a)
    want = (1.0 - p1) * (2.0 * sigmoid(-0.3) - 1.0) + p1 * (2.0 * sigmoid(1.2 - 0.3) - 1.0)
    got = exact_expected_reward(params, s, 1, "independent")
    assert abs(got - want) < 1e-14


def test_modes_agree_at_c_zero():
    params, s, _ = random_instance(5, "alg1")
    params.c = 0.0
    r_ind = exact_expected_reward(params, s, 1, "independent")
    r_bol = exact_expected_reward(params, s, 1, "boltzmann")
    r_chn = exact_expected_reward(params, s, 5, "chain")
    assert abs(r_ind - r_bol) < 1e-12
    assert abs(r_ind - r_chn) < 1e-12


def test_unknown_mode_raises():
    params, s, T = random_instance(0, "alg1")
    with pytest.raises(ValueError):
        exact_gradient(params, s, T, "gibbs")
    with pytest.raises(ValueError):
        exact_expected_reward(params, s, T, "gibbs")
    with pytest.raises(ValueError):
        expected_update("nope", params, s, 10, make_stream(0, "mc"))


def _fd_close(analytic: PolicyDelta, fd: PolicyDelta, tol=2e-6):
    for name in ("W", "b", "W_rec", "w_out"):
        a = getattr(analytic, name)
        f = getattr(fd, name)
        if a is None:
            assert f is None
            continue
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-3)
        assert np.max(np.abs(a - f) / denom) < tol
    assert abs(analytic.b_out - fd.b_out) < tol * max(abs(analytic.b_out), 1e-3)


@pytest.mark.parametrize(
    "rule_id,mode", [("indep-two-sided", "independent"), ("alg1", "boltzmann"), ("alg2", "chain")]
)
def test_gradient_matches_finite_differences(rule_id, mode):
    params, s, T = random_instance(6, rule_id)
    _fd_close(exact_gradient(params, s, T, mode), finite_difference_gradient(params, s, T, mode))


def test_expected_update_unbiased_smoke():
    params, s, T = random_instance(0, "alg1")
    exact = exact_gradient(params, s, T, "boltzmann")
    mean, se = expected_update("alg1", params, s, 20_000, make_stream(123, "mc"), T=T)
    assert max_abs_z(mean, se, exact) < 4.5


def test_expected_update_se_scaling():
    params, s, T = random_instance(0, "indep-two-sided")
    _, se_small = expected_update("indep-two-sided", params, s, 2_000, make_stream(0, "mc"), T=T)
    _, se_big = expected_update("indep-two-sided", params, s, 20_000, make_stream(1, "mc"), T=T)
    ratio = np.mean(np.abs(se_small.b)) / np.mean(np.abs(se_big.b))
    assert 2.8 < ratio < 3.6  # ~sqrt(10)


def test_max_abs_z_branches():
    zeros = PolicyDelta.zeros(1, 1, with_rec=False)
    mean = PolicyDelta.zeros(1, 1, with_rec=False)
    se = PolicyDelta.zeros(1, 1, with_rec=False)
    mean.W[0, 0] = 0.5
    se.W[0, 0] = 0.1
    exact = PolicyDelta.zeros(1, 1, with_rec=False)
    exact.W[0, 0] = 0.2
    assert abs(max_abs_z(mean, se, exact) - 3.0) < 1e-12
    # zero SE with agreeing means contributes nothing
    assert max_abs_z(zeros, se, PolicyDelta.zeros(1, 1, with_rec=False)) == 0.0
    # zero SE with a real discrepancy is a hard failure
    bad = PolicyDelta.zeros(1, 1, with_rec=False)
    bad.b_out = 1.0
    assert max_abs_z(zeros, se, bad) == np.inf


def test_random_instance_families():
    p1, s1, T1 = random_instance(5, "alg1")
    q1, s2, T2 = random_instance(5, "alg1")
    assert np.array_equal(p1.W, q1.W) and np.array_equal(s1, s2) and T1 == T2
    assert np.array_equal(p1.W_rec, p1.W_rec.T)
    assert np.all(np.diag(p1.W_rec) == 0.0)
    pi, _, _ = random_instance(5, "indep-two-sided")
    assert pi.c == 0.0 and np.all(pi.W_rec == 0.0)
    pa, _, _ = random_instance(0, "alg2")
    assert np.any(np.diag(pa.W_rec) != 0.0)
    assert 1 <= T1 <= 3


def test_verification_report_shape():
    rows = verification_report(n_samples=3_000, n_instances=1, seed=0)
    rules = [r["rule"] for r in rows]
    assert rules == [r for r in RULE_IDS if r != "ste"]
    for r in rows:
        assert r["n_samples"] == 3_000
        assert np.isfinite(r["max_abs_z"])
        assert r["pass"] == (r["max_abs_z"] < 4.0)
