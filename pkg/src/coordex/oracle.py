"""Ground truth by exhaustive enumeration.

Everything here is an independent route to quantities the learning code
estimates by sampling: exact hidden-layer distributions (Boltzmann and
synchronous-chain), exact expected reward, analytic score-function
gradients, central finite differences of the expected reward, and
Monte-Carlo means of the actual rule implementations. The test suite and
the `oracle` CLI subcommand hold these routes against each other; none of
them shares code with the episode kernels beyond the parameter container.

Gradient conventions, chosen to match what the rules estimate:

* independent mode has no recurrent parameters (W_rec gradient is None).
* Boltzmann mode treats W_rec as one parameter per unordered pair (the
  matrix stays symmetric, diagonal fixed at zero); the reported per-entry
  gradient is the derivative along that tie, which is what the Hebbian
  rules' mirrored updates follow.
* chain mode scores the T synchronous sweeps but not the initial
  independent sample, which is what the eligibility-trace rule accumulates;
  the omitted initial-sample score only affects W and b. Finite differences
  therefore perturb the sweep parameters while pinning the initial law.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .core import make_stream, sigmoid
from .learn import (
    CenteringMode,
    EpisodeRecord,
    PolicyDelta,
    alg1_update,
    alg1_update_negstats,
    alg2_update,
    indep_update,
    ste_update,
    traces_from_trace,
)
from .mux import infer_task, mux_output, reward
from .policy import LayerParams, SampleTrace, independent_trace, logits

MAX_BOLTZMANN_UNITS = 20
MAX_CHAIN_UNITS = 10

RULE_IDS = (
    "indep-two-sided",
    "indep-one-sided-action",
    "indep-one-sided-reward",
    "alg1",
    "alg1-negstats",
    "alg2",
    "ste",
)


def log_sigmoid(x):
    """log sigma(x), stable for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    return np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))


def enumerate_configs(n: int) -> np.ndarray:
    """All binary vectors of length n; row g has bit i = (g >> i) & 1."""
    if n > MAX_BOLTZMANN_UNITS:
        raise ValueError(f"enumeration over 2^{n} configurations refused (limit {MAX_BOLTZMANN_UNITS})")
    g = np.arange(2**n)
    return ((g[:, None] >> np.arange(n)) & 1).astype(np.int8)


@dataclass
class ExactMoments:
    """Exact conditional law of the hidden layer and its first two moments."""

    probs: np.ndarray
    configs: np.ndarray
    first: np.ndarray
    second: np.ndarray


def exact_boltzmann(params: LayerParams, s: np.ndarray) -> ExactMoments:
    """Enumerate the Boltzmann law the synchronous/asynchronous conditionals
    share.

    Log-weight counts each unordered pair once: a.h + c * sum_{j<i}
    h_j W_rec[j,i] h_i, i.e. (c/2) h.W_rec.h for symmetric W_rec. This is
    the law whose single-unit conditional is sigma(c (h W_rec)_i + a_i),
    matching the sweep conditional used everywhere else.
    """
    configs = enumerate_configs(params.n_hidden)
    hf = configs.astype(np.float64)
    a = logits(params, s)
    log_w = hf @ a + 0.5 * params.c * np.einsum("gj,ji,gi->g", hf, params.W_rec, hf)
    log_w -= log_w.max()
    w = np.exp(log_w)
    probs = w / w.sum()
    first = probs @ hf
    second = hf.T @ (probs[:, None] * hf)
    # exact symmetry (matmul only guarantees it up to summation order)
    upper = np.triu(second, 1)
    second = upper + upper.T + np.diag(np.diag(second))
    return ExactMoments(probs=probs, configs=configs, first=first, second=second)


# The negative-statistics supplier for the exactly-centered Hebbian rule is
# the same enumeration.
negative_statistics = exact_boltzmann


def _product_law(a: np.ndarray, configs: np.ndarray) -> np.ndarray:
    """Law of independent units with pre-activations a, over configs' rows."""
    hf = configs.astype(np.float64)
    return np.exp(hf @ log_sigmoid(a) + (1.0 - hf) @ log_sigmoid(-a))


def transition_matrix(params: LayerParams, s: np.ndarray) -> np.ndarray:
    """One synchronous sweep as a (2^N, 2^N) stochastic matrix."""
    configs = enumerate_configs(params.n_hidden)
    hf = configs.astype(np.float64)
    pre = params.c * (hf @ params.W_rec) + logits(params, s)
    log_p = log_sigmoid(pre)
    log_q = log_sigmoid(-pre)
    return np.exp(log_p @ hf.T + log_q @ (1.0 - hf).T)


@dataclass
class ChainDistribution:
    """Exact law of T synchronous sweeps from an independent start."""

    configs: np.ndarray
    init: np.ndarray
    transition: np.ndarray
    marginals: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.marginals[-1]

    def trajectories(self):
        """Yield ((g_0, ..., g_T), probability) over every trajectory.

        Exponential in T; refused beyond 2^20 trajectories.
        """
        n_configs = self.init.shape[0]
        T = self.marginals.shape[0] - 1
        if n_configs ** (T + 1) > 2**20:
            raise ValueError("trajectory enumeration too large")
        for path in product(range(n_configs), repeat=T + 1):
            p = self.init[path[0]]
            for t in range(1, T + 1):
                p *= self.transition[path[t - 1], path[t]]
            yield path, p


def exact_chain_distribution(
    params: LayerParams,
    s: np.ndarray,
    T: int,
    init_params: LayerParams | None = None,
) -> ChainDistribution:
    """Exact marginals of H_0..H_T under synchronous sweeps.

    The initial sample is independent with init_params' feedforward
    pre-activations (defaulting to params); sweeps use params.
    """
    if params.n_hidden > MAX_CHAIN_UNITS:
        raise ValueError(f"chain enumeration refused for N={params.n_hidden} (limit {MAX_CHAIN_UNITS})")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    configs = enumerate_configs(params.n_hidden)
    init = _product_law(logits(init_params if init_params is not None else params, s), configs)
    M = transition_matrix(params, s)
    marginals = np.empty((T + 1, init.shape[0]))
    marginals[0] = init
    for t in range(1, T + 1):
        marginals[t] = marginals[t - 1] @ M
    return ChainDistribution(configs=configs, init=init, transition=M, marginals=marginals)


def _hidden_law(params: LayerParams, s: np.ndarray, T: int, mode: str):
    """(configs, probability vector) of the final hidden configuration."""
    if mode == "independent":
        configs = enumerate_configs(params.n_hidden)
        return configs, _product_law(logits(params, s), configs)
    if mode == "boltzmann":
        m = exact_boltzmann(params, s)
        return m.configs, m.probs
    if mode == "chain":
        d = exact_chain_distribution(params, s, T)
        return d.configs, d.final
    raise ValueError(f"unknown mode {mode!r}")


def _outcome_values(params: LayerParams, s: np.ndarray, configs: np.ndarray):
    """Per-configuration E[R | h] and output-unit score expectation."""
    task = infer_task(len(s))
    target = mux_output(task, s)
    r1, r0 = reward(1, target), reward(0, target)
    p_out = sigmoid(configs.astype(np.float64) @ params.w_out + params.b_out)
    values = p_out * r1 + (1.0 - p_out) * r0
    e_out = p_out * (1.0 - p_out) * (r1 - r0)
    return values, e_out


def exact_expected_reward(
    params: LayerParams,
    s: np.ndarray,
    T: int,
    mode: str,
    init_params: LayerParams | None = None,
) -> float:
    """E[R | S=s] under the mode's hidden law, summed over all outcomes."""
    if mode == "chain":
        d = exact_chain_distribution(params, s, T, init_params=init_params)
        configs, probs = d.configs, d.final
    else:
        configs, probs = _hidden_law(params, s, T, mode)
    values, _ = _outcome_values(params, s, configs)
    return float(probs @ values)


def exact_gradient(params: LayerParams, s: np.ndarray, T: int, mode: str) -> PolicyDelta:
    """Analytic gradient of expected reward, by full enumeration.

    See the module docstring for what each mode's W_rec block means and for
    the chain mode's sweeps-only convention on W and b.
    """
    sf = np.asarray(s, dtype=np.float64)
    if mode == "independent":
        configs = enumerate_configs(params.n_hidden)
        probs = _product_law(logits(params, s), configs)
        values, e_out = _outcome_values(params, s, configs)
        hf = configs.astype(np.float64)
        d = hf - sigmoid(logits(params, s))
        gb = (probs * values) @ d
        w_rec = None
        final_probs = probs
    elif mode == "boltzmann":
        m = exact_boltzmann(params, s)
        hf = m.configs.astype(np.float64)
        values, e_out = _outcome_values(params, s, m.configs)
        pv = m.probs * values
        gb = pv @ (hf - m.first)
        pair = hf.T @ (pv[:, None] * hf) - pv.sum() * m.second
        w_rec = params.c * pair
        np.fill_diagonal(w_rec, 0.0)
        final_probs = m.probs
    elif mode == "chain":
        dist = exact_chain_distribution(params, s, T)
        hf = dist.configs.astype(np.float64)
        values, e_out = _outcome_values(params, s, dist.configs)
        M = dist.transition
        # backward[t][g] = E[R | H_t = g], via one matrix-vector pass
        backward = np.empty_like(dist.marginals)
        backward[T] = values
        for t in range(T - 1, -1, -1):
            backward[t] = M @ backward[t + 1]
        pre = params.c * (hf @ params.W_rec) + logits(params, s)
        p_all = sigmoid(pre)
        gb = np.zeros(params.n_hidden)
        acc = np.zeros((params.n_hidden, params.n_hidden))
        for t in range(1, T + 1):
            pw = (dist.marginals[t - 1][:, None] * M) * backward[t][None, :]
            centered = pw @ hf - pw.sum(axis=1)[:, None] * p_all
            gb += centered.sum(axis=0)
            acc += hf.T @ centered
        w_rec = params.c * acc
        final_probs = dist.final
    else:
        raise ValueError(f"unknown mode {mode!r}")
    pe = final_probs * e_out
    return PolicyDelta(
        W=np.outer(sf, gb),
        b=gb,
        W_rec=w_rec,
        w_out=pe @ hf,
        b_out=float(pe.sum()),
    )


def finite_difference_gradient(
    params: LayerParams, s: np.ndarray, T: int, mode: str, step: float = 1e-5
) -> PolicyDelta:
    """Central finite differences of exact_expected_reward, entry by entry.

    Matches exact_gradient's conventions: Boltzmann-mode W_rec moves
    mirrored pairs together (one parameter per unordered pair, diagonal
    fixed at 0), the independent W_rec block is None, and chain-mode
    perturbations pin the initial sample's law to the unperturbed params.
    """
    base = params.copy()
    pinned = base if mode == "chain" else None

    def er(p: LayerParams) -> float:
        return exact_expected_reward(p, s, T, mode, init_params=pinned)

    def fd_array(name: str) -> np.ndarray:
        arr = getattr(base, name)
        out = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            work = base.copy()
            target = getattr(work, name)
            target[idx] += step
            hi = er(work)
            target[idx] -= 2.0 * step
            lo = er(work)
            out[idx] = (hi - lo) / (2.0 * step)
            it.iternext()
        return out

    def fd_scalar(name: str) -> float:
        work = base.copy()
        setattr(work, name, getattr(base, name) + step)
        hi = er(work)
        setattr(work, name, getattr(base, name) - step)
        lo = er(work)
        return (hi - lo) / (2.0 * step)

    def fd_rec_tied() -> np.ndarray:
        # Symmetric W_rec means one parameter per unordered pair; move both
        # mirrored entries together, matching the learning rules' tied update.
        n = base.W_rec.shape[0]
        out = np.zeros_like(base.W_rec)
        for j in range(n):
            for i in range(j + 1, n):
                work = base.copy()
                work.W_rec[j, i] += step
                work.W_rec[i, j] += step
                hi = er(work)
                work.W_rec[j, i] -= 2.0 * step
                work.W_rec[i, j] -= 2.0 * step
                lo = er(work)
                out[j, i] = out[i, j] = (hi - lo) / (2.0 * step)
        return out

    if mode == "independent":
        w_rec = None
    elif mode == "boltzmann":
        w_rec = fd_rec_tied()
    else:
        w_rec = fd_array("W_rec")
    return PolicyDelta(
        W=fd_array("W"),
        b=fd_array("b"),
        W_rec=w_rec,
        w_out=fd_array("w_out"),
        b_out=fd_scalar("b_out"),
    )


def _flatten_delta(d: PolicyDelta) -> np.ndarray:
    parts = [d.W.ravel(), d.b]
    if d.W_rec is not None:
        parts.append(d.W_rec.ravel())
    parts.append(d.w_out)
    parts.append(np.array([d.b_out]))
    return np.concatenate(parts)


def _unflatten_delta(vec: np.ndarray, state_dim: int, n: int, with_rec: bool) -> PolicyDelta:
    pos = 0

    def take(count):
        nonlocal pos
        out = vec[pos : pos + count]
        pos += count
        return out

    W = take(state_dim * n).reshape(state_dim, n)
    b = take(n)
    w_rec = take(n * n).reshape(n, n) if with_rec else None
    w_out = take(n)
    b_out = float(take(1)[0])
    return PolicyDelta(W=W, b=b, W_rec=w_rec, w_out=w_out, b_out=b_out)


def _sample_categorical(probs: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws from a fixed categorical law, one uniform double per draw."""
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n), side="right")


def expected_update(
    rule_id: str,
    params: LayerParams,
    s: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
    T: int = 1,
    lam: float = 1.0,
):
    """Monte-Carlo mean and standard error of a rule's per-episode delta.

    Samples hidden configurations from the rule's own law (independent,
    exact Boltzmann, or the synchronous chain), draws the action, and feeds
    each episode through the actual learn-module rule. Rules that subtract
    a baseline get the exact E[R | S] for their law, so their mean should
    match exact_gradient for the same mode. Returns (mean, se) as
    PolicyDelta pairs.
    """
    if rule_id not in RULE_IDS:
        raise ValueError(f"unknown rule {rule_id!r}")
    task = infer_task(len(s))
    target = mux_output(task, s)
    n = params.n_hidden
    state_dim = len(s)
    with_rec = rule_id in ("alg1", "alg1-negstats", "alg2")

    indep_like = rule_id.startswith("indep") or rule_id == "ste"
    if indep_like:
        mode = "independent"
    elif rule_id == "alg2":
        mode = "chain"
    else:
        mode = "boltzmann"
    baseline = exact_expected_reward(params, s, T, mode)
    if rule_id in ("indep-one-sided-action", "alg1-negstats"):
        baseline = 0.0

    # Hidden-configuration samples for every episode, drawn law-exactly.
    if indep_like:
        p_ind = sigmoid(logits(params, s))
        H_final = (rng.random((n_samples, n)) < p_ind).astype(np.int8)
        traces = None
    elif rule_id in ("alg1", "alg1-negstats"):
        m = exact_boltzmann(params, s)
        idx = _sample_categorical(m.probs, n_samples, rng)
        H_final = m.configs[idx]
        traces = None
        moments = m
    else:
        a = logits(params, s)
        H = np.empty((T + 1, n_samples, n), dtype=np.int8)
        P = np.empty((T, n_samples, n))
        H[0] = (rng.random((n_samples, n)) < sigmoid(a)).astype(np.int8)
        for t in range(1, T + 1):
            p_t = sigmoid(params.c * (H[t - 1].astype(np.float64) @ params.W_rec) + a)
            P[t - 1] = p_t
            H[t] = (rng.random((n_samples, n)) < p_t).astype(np.int8)
        H_final = H[T]
        traces = (H, P)

    p_out = sigmoid(H_final.astype(np.float64) @ params.w_out + params.b_out)
    actions = (rng.random(n_samples) < p_out).astype(np.int8)
    rewards = np.where(actions == target, 1, -1)

    p_row = sigmoid(logits(params, s))
    acc = None
    acc2 = None
    for i in range(n_samples):
        if traces is None:
            trace = independent_trace(H_final[i], p_row)
        else:
            trace = SampleTrace(H=traces[0][:, i, :], P=traces[1][:, i, :])
        record = EpisodeRecord(
            state=s, trace=trace, action=int(actions[i]), reward=int(rewards[i]), baseline=baseline
        )
        if rule_id == "indep-two-sided":
            d = indep_update(params, record, CenteringMode.TWO_SIDED)
        elif rule_id == "indep-one-sided-action":
            d = indep_update(params, record, CenteringMode.ONE_SIDED_ACTION)
        elif rule_id == "indep-one-sided-reward":
            d = indep_update(params, record, CenteringMode.ONE_SIDED_REWARD)
        elif rule_id == "ste":
            d = ste_update(params, record)
        elif rule_id == "alg1":
            d = alg1_update(params, record)
        elif rule_id == "alg1-negstats":
            d = alg1_update_negstats(params, record, moments)
        else:
            d = alg2_update(params, record, traces_from_trace(trace, lam))
        vec = _flatten_delta(d)
        if acc is None:
            acc = np.zeros_like(vec)
            acc2 = np.zeros_like(vec)
        acc += vec
        acc2 += vec * vec

    mean = acc / n_samples
    var = np.maximum(acc2 - n_samples * mean * mean, 0.0) / max(n_samples - 1, 1)
    se = np.sqrt(var / n_samples)
    return (
        _unflatten_delta(mean, state_dim, n, with_rec),
        _unflatten_delta(se, state_dim, n, with_rec),
    )


def max_abs_z(mean: PolicyDelta, se: PolicyDelta, exact: PolicyDelta) -> float:
    """Largest |mean - exact| / SE over all parameter entries.

    Entries with zero SE count 0 when the means agree to 1e-12 and inf
    otherwise.
    """
    m, s_, e = _flatten_delta(mean), _flatten_delta(se), _flatten_delta(exact)
    diff = np.abs(m - e)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(s_ > 0, diff / np.where(s_ > 0, s_, 1.0), np.where(diff < 1e-12, 0.0, np.inf))
    return float(z.max())


def random_instance(index: int, rule_id: str):
    """A small reproducible (params, s, T) for verification batteries.

    k=1 multiplexer head (state width 3), N=3 hidden units, T cycling 1..3.
    W_rec is symmetrized with zero diagonal for the Boltzmann-family rules
    and left fully random (diagonal included) for the chain rule.
    """
    rng = make_stream(7000 + index, "mc")
    n, state_dim = 3, 3
    T = 1 + index % 3
    c = 0.25 + 0.75 * rng.random()
    W = 2.0 * rng.random((state_dim, n)) - 1.0
    b = rng.random(n) - 0.5
    A = 2.0 * rng.random((n, n)) - 1.0
    if rule_id in ("alg1", "alg1-negstats", "boltzmann"):
        A = 0.5 * (A + A.T)
        np.fill_diagonal(A, 0.0)
    elif rule_id in ("indep-two-sided", "indep-one-sided-action", "indep-one-sided-reward", "ste", "independent"):
        A = np.zeros((n, n))
        c = 0.0
    w_out = 2.0 * rng.random(n) - 1.0
    b_out = float(rng.random() - 0.5)
    params = LayerParams(W=W, b=b, W_rec=A, c=c, w_out=w_out, b_out=b_out)
    s = (rng.random(state_dim) < 0.5).astype(np.int8)
    return params, s, T


def verification_report(n_samples: int = 100_000, n_instances: int = 3, seed: int = 0):
    """MC-vs-analytic battery for every unbiased rule; rows for a CSV.

    Each row holds the largest |mean - exact| / SE over all parameter
    entries of one (rule, instance) cell; 4 is a generous pass threshold
    for this many correlated comparisons.
    """
    rows = []
    for rule_id in RULE_IDS:
        if rule_id == "ste":  # biased by construction; nothing to verify against
            continue
        if rule_id.startswith("indep"):
            mode = "independent"
        elif rule_id == "alg2":
            mode = "chain"
        else:
            mode = "boltzmann"
        for i in range(n_instances):
            params, s, T = random_instance(100 * seed + i, rule_id)
            exact = exact_gradient(params, s, T, mode)
            rng = make_stream(10_000 + 100 * seed + i, "mc")
            mean, se = expected_update(rule_id, params, s, n_samples, rng, T=T, lam=1.0)
            z = max_abs_z(mean, se, exact)
            rows.append(
                {
                    "rule": rule_id,
                    "instance": i,
                    "n_samples": n_samples,
                    "max_abs_z": z,
                    "pass": z < 4.0,
                }
            )
    return rows
