"""Backend kernels against a per-episode replay through the rule modules.

The replay consumes the same streams the kernels do, one episode at a time,
and applies the single-episode rules; sums must agree to float tolerance
(summation order differs) and rewards exactly.
"""

import numpy as np
import pytest

import coordex._kernels_py as kernels_py
from coordex.core import make_stream
from coordex.learn import (
    CenteringMode,
    EpisodeRecord,
    PolicyDelta,
    alg1_update,
    alg2_update,
    indep_update,
    ste_update,
    traces_from_trace,
)
from coordex.mux import MuxTask, mux_output_batch, sample_states
from coordex.policy import (
    LayerParams,
    gibbs_sample,
    independent_trace,
    init_params,
    output_sample,
    sample_independent,
)

BACKENDS = [kernels_py]
try:
    import coordex._kernels as kernels_cy

    BACKENDS.append(kernels_cy)
except ImportError:
    kernels_cy = None

backend = pytest.mark.parametrize("kernels", BACKENDS, ids=lambda m: m.BACKEND_NAME)

B, T = 7, 3


def _setup(seed, c=0.7, rec="sym", n=4):
    task = MuxTask(2)
    params = init_params(task.state_dim, n, c, make_stream(seed, "param_init"))
    rng = make_stream(seed, "critic_init")
    A = rng.normal(size=(n, n)) * 0.4
    if rec == "sym":
        A = 0.5 * (A + A.T)
        np.fill_diagonal(A, 0.0)
    elif rec == "zero":
        A = np.zeros((n, n))
    params.W_rec = A
    states = sample_states(task, B, make_stream(seed, "env"))
    targets = mux_output_batch(task, states)
    baselines = rng.random(B) - 0.5
    return params, states, targets, baselines


def _streams(seed):
    return (
        make_stream(seed, "warmup"),
        make_stream(seed, "final"),
        make_stream(seed, "action"),
    )


def _replay(rule, params, states, targets, baselines, seed, **kw):
    warm, final, action = _streams(seed)
    n = params.n_hidden
    with_rec = rule in ("alg1", "alg2")
    total = PolicyDelta.zeros(states.shape[1], n, with_rec)
    rewards = np.empty(B, dtype=np.int8)
    for e in range(B):
        if rule in ("alg1", "alg2"):
            trace = gibbs_sample(params, states[e], T, warm, final)
        else:
            h, p = sample_independent(params, states[e], final)
            trace = independent_trace(h, p)
        a, _ = output_sample(params, trace.H[-1], action)
        r = 1 if a == targets[e] else -1
        rewards[e] = r
        record = EpisodeRecord(
            state=states[e], trace=trace, action=a, reward=r, baseline=baselines[e]
        )
        if rule == "alg1":
            d = alg1_update(params, record)
        elif rule == "alg2":
            d = alg2_update(
                params, record, traces_from_trace(trace, kw["lam"]), kw["update_diag"]
            )
        elif rule == "ste":
            d = ste_update(params, record, kw["sigma_prime"])
        else:
            d = indep_update(params, record, kw["mode"])
        total.add_(d)
    return total, rewards, (warm, final, action)


def _assert_delta_close(got, want: PolicyDelta):
    dW, db, dW_rec, dw_out, db_out, _ = got
    np.testing.assert_allclose(dW, want.W, rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(db, want.b, rtol=1e-11, atol=1e-12)
    if want.W_rec is None:
        assert dW_rec is None
    else:
        np.testing.assert_allclose(dW_rec, want.W_rec, rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(dw_out, want.w_out, rtol=1e-11, atol=1e-12)
    assert abs(db_out - want.b_out) < 1e-11


@backend
@pytest.mark.parametrize(
    "mode",
    [CenteringMode.TWO_SIDED, CenteringMode.ONE_SIDED_ACTION, CenteringMode.ONE_SIDED_REWARD],
)
def test_indep_matches_replay(kernels, mode):
    params, states, targets, baselines = _setup(11, c=0.0, rec="zero")
    _, final, action = _streams(11)
    got = kernels.batch_indep(
        params.W, params.b, params.w_out, params.b_out,
        states, targets, baselines, getattr(kernels, "MODE_" + mode.name), final, action,
    )
    want, rewards, (w2, f2, a2) = _replay(
        "indep", params, states, targets, baselines, 11, mode=mode
    )
    _assert_delta_close(got, want)
    np.testing.assert_array_equal(got[5], rewards)
    assert final.random() == f2.random() and action.random() == a2.random()


@backend
@pytest.mark.parametrize("sigma_prime", [True, False])
def test_ste_matches_replay(kernels, sigma_prime):
    params, states, targets, baselines = _setup(12, c=0.0, rec="zero")
    _, final, action = _streams(12)
    got = kernels.batch_ste(
        params.W, params.b, params.w_out, params.b_out,
        states, targets, baselines, sigma_prime, final, action,
    )
    want, rewards, _ = _replay(
        "ste", params, states, targets, baselines, 12, sigma_prime=sigma_prime
    )
    _assert_delta_close(got, want)
    np.testing.assert_array_equal(got[5], rewards)


@backend
def test_alg1_matches_replay(kernels):
    params, states, targets, baselines = _setup(13, c=0.7, rec="sym")
    warm, final, action = _streams(13)
    got = kernels.batch_alg1(
        params.W, params.b, params.W_rec, params.c, T,
        params.w_out, params.b_out, states, targets, baselines, warm, final, action,
    )
    want, rewards, (w2, f2, a2) = _replay("alg1", params, states, targets, baselines, 13)
    _assert_delta_close(got, want)
    np.testing.assert_array_equal(got[5], rewards)
    assert warm.random() == w2.random()
    assert final.random() == f2.random()
    assert action.random() == a2.random()


@backend
@pytest.mark.parametrize("lam,update_diag", [(0.5, True), (0.9, False), (0.0, True)])
def test_alg2_matches_replay(kernels, lam, update_diag):
    params, states, targets, baselines = _setup(14, c=0.3, rec="full")
    warm, final, action = _streams(14)
    got = kernels.batch_alg2(
        params.W, params.b, params.W_rec, params.c, T, lam, update_diag,
        params.w_out, params.b_out, states, targets, baselines, warm, final, action,
    )
    want, rewards, _ = _replay(
        "alg2", params, states, targets, baselines, 14, lam=lam, update_diag=update_diag
    )
    _assert_delta_close(got, want)
    np.testing.assert_array_equal(got[5], rewards)
    if not update_diag:
        assert np.all(np.diag(got[2]) == 0.0)


@backend
def test_alg1_recurrent_delta_symmetric(kernels):
    params, states, targets, baselines = _setup(15, c=1.3, rec="sym")
    warm, final, action = _streams(15)
    got = kernels.batch_alg1(
        params.W, params.b, params.W_rec, params.c, T,
        params.w_out, params.b_out, states, targets, baselines, warm, final, action,
    )
    dW_rec = got[2]
    assert np.array_equal(dW_rec, dW_rec.T)
    assert np.all(np.diag(dW_rec) == 0.0)


@backend
def test_alg1_c_zero_reduces_to_one_sided_reward(kernels):
    params, states, targets, baselines = _setup(16, c=0.0, rec="zero")
    warm, final, action = _streams(16)
    g1 = kernels.batch_alg1(
        params.W, params.b, params.W_rec, 0.0, T,
        params.w_out, params.b_out, states, targets, baselines, warm, final, action,
    )
    _, final2, action2 = _streams(16)
    gi = kernels.batch_indep(
        params.W, params.b, params.w_out, params.b_out,
        states, targets, baselines, kernels.MODE_ONE_SIDED_REWARD, final2, action2,
    )
    np.testing.assert_array_equal(g1[0], gi[0])
    np.testing.assert_array_equal(g1[1], gi[1])
    np.testing.assert_array_equal(g1[3], gi[3])
    assert g1[4] == gi[4]
    np.testing.assert_array_equal(g1[5], gi[5])
    np.testing.assert_array_equal(g1[2], np.zeros_like(params.W_rec))


@backend
def test_alg2_c_zero_lam_zero_reduces_to_two_sided(kernels):
    params, states, targets, baselines = _setup(17, c=0.0, rec="zero")
    warm, final, action = _streams(17)
    g2 = kernels.batch_alg2(
        params.W, params.b, params.W_rec, 0.0, T, 0.0, True,
        params.w_out, params.b_out, states, targets, baselines, warm, final, action,
    )
    _, final2, action2 = _streams(17)
    gi = kernels.batch_indep(
        params.W, params.b, params.w_out, params.b_out,
        states, targets, baselines, kernels.MODE_TWO_SIDED, final2, action2,
    )
    np.testing.assert_array_equal(g2[0], gi[0])
    np.testing.assert_array_equal(g2[1], gi[1])
    np.testing.assert_array_equal(g2[3], gi[3])
    assert g2[4] == gi[4]
    np.testing.assert_array_equal(g2[5], gi[5])


@backend
def test_stream_accounting(kernels):
    params, states, targets, baselines = _setup(18, c=0.7, rec="sym")
    warm, final, action = _streams(18)
    kernels.batch_alg1(
        params.W, params.b, params.W_rec, params.c, T,
        params.w_out, params.b_out, states, targets, baselines, warm, final, action,
    )
    n = params.n_hidden
    ref_w, ref_f, ref_a = _streams(18)
    ref_w.random(B * T * n)
    ref_f.random(B * n)
    ref_a.random(B)
    assert warm.random() == ref_w.random()
    assert final.random() == ref_f.random()
    assert action.random() == ref_a.random()


@pytest.mark.skipif(kernels_cy is None, reason="compiled backend not built")
@pytest.mark.parametrize("rule", ["indep", "ste", "alg1", "alg2"])
def test_backends_agree(rule):
    params, states, targets, baselines = _setup(19, c=0.6, rec="sym" if rule == "alg1" else "full")
    if rule in ("indep", "ste"):
        params.c = 0.0
        params.W_rec = np.zeros_like(params.W_rec)
    results = []
    enders = []
    for kernels in (kernels_py, kernels_cy):
        warm, final, action = _streams(19)
        if rule == "indep":
            got = kernels.batch_indep(
                params.W, params.b, params.w_out, params.b_out,
                states, targets, baselines, kernels.MODE_TWO_SIDED, final, action,
            )
        elif rule == "ste":
            got = kernels.batch_ste(
                params.W, params.b, params.w_out, params.b_out,
                states, targets, baselines, True, final, action,
            )
        elif rule == "alg1":
            got = kernels.batch_alg1(
                params.W, params.b, params.W_rec, params.c, T,
                params.w_out, params.b_out, states, targets, baselines, warm, final, action,
            )
        else:
            got = kernels.batch_alg2(
                params.W, params.b, params.W_rec, params.c, T, 0.5, True,
                params.w_out, params.b_out, states, targets, baselines, warm, final, action,
            )
        results.append(got)
        enders.append((warm.random(), final.random(), action.random()))
    a, b = results
    for i in (0, 1, 3):
        np.testing.assert_allclose(a[i], b[i], rtol=1e-11, atol=1e-12)
    if a[2] is None:
        assert b[2] is None
    else:
        np.testing.assert_allclose(a[2], b[2], rtol=1e-11, atol=1e-12)
    assert abs(a[4] - b[4]) < 1e-11
    np.testing.assert_array_equal(a[5], b[5])
    assert enders[0] == enders[1]
