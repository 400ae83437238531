"""Per-episode learning rules and the learned reward baseline.

Every rule is an unbiased estimator (over sampling noise, given the state)
of the gradient of expected reward with respect to its parameters; the
enumeration oracles check this numerically. All rules share the output-unit
update advantage * (A - p_out) * [H; 1]; they differ in how the hidden
layer's covariance between reward and activity is estimated:

* two-sided:        (R - baseline) * (H - p)
* one-sided-action:  R             * (H - p)      (no baseline anywhere)
* one-sided-reward: (R - baseline) *  H

The coupled rules estimate the recurrent-weight gradient from pairwise
coactivation: the reward-modulated Hebbian rule uses c * (R - baseline) *
H_i * H_j on a symmetric zero-diagonal W_rec; its negative-statistics
variant centers with exact conditional moments and raw reward; the
eligibility-trace rule sums per-sweep scores H_prev_j * (H_i - p_i) into
decaying traces and scales the total by c * (R - baseline).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import AdamState, adam_step, sigmoid_prime
from .policy import LayerParams, SampleTrace, check_symmetric_zero_diag, logits, output_prob


class CenteringMode(enum.Enum):
    TWO_SIDED = "two-sided"
    ONE_SIDED_ACTION = "one-sided-action"
    ONE_SIDED_REWARD = "one-sided-reward"


@dataclass
class EpisodeRecord:
    """Everything one episode contributes to learning."""

    state: np.ndarray
    trace: SampleTrace
    action: int
    reward: int
    baseline: float


@dataclass
class PolicyDelta:
    """Additive parameter update. W_rec is None for rules that do not touch it."""

    W: np.ndarray
    b: np.ndarray
    W_rec: np.ndarray | None
    w_out: np.ndarray
    b_out: float

    def add_(self, other: "PolicyDelta") -> "PolicyDelta":
        self.W += other.W
        self.b += other.b
        if self.W_rec is not None and other.W_rec is not None:
            self.W_rec += other.W_rec
        self.w_out += other.w_out
        self.b_out += other.b_out
        return self

    def scaled(self, k: float) -> "PolicyDelta":
        return PolicyDelta(
            W=self.W * k,
            b=self.b * k,
            W_rec=None if self.W_rec is None else self.W_rec * k,
            w_out=self.w_out * k,
            b_out=self.b_out * k,
        )

    @classmethod
    def zeros(cls, state_dim: int, n_hidden: int, with_rec: bool) -> "PolicyDelta":
        return cls(
            W=np.zeros((state_dim, n_hidden)),
            b=np.zeros(n_hidden),
            W_rec=np.zeros((n_hidden, n_hidden)) if with_rec else None,
            w_out=np.zeros(n_hidden),
            b_out=0.0,
        )


def _output_terms(params: LayerParams, record: EpisodeRecord, advantage: float):
    h = record.trace.H[-1].astype(np.float64)
    p_out = output_prob(params, record.trace.H[-1])
    d_out = advantage * (record.action - p_out)
    return h, d_out


def indep_update(params: LayerParams, record: EpisodeRecord, mode: CenteringMode) -> PolicyDelta:
    """Update for the uncoupled layer; reads only the trace's final sweep.

    The one-sided-action mode ignores record.baseline entirely.
    """
    s = record.state.astype(np.float64)
    h = record.trace.H[-1].astype(np.float64)
    p = record.trace.P[-1]
    if mode is CenteringMode.ONE_SIDED_ACTION:
        adv = float(record.reward)
    else:
        adv = record.reward - record.baseline
    if mode is CenteringMode.ONE_SIDED_REWARD:
        unit = h
    else:
        unit = h - p
    _, d_out = _output_terms(params, record, adv)
    return PolicyDelta(
        W=np.outer(s, adv * unit),
        b=adv * unit,
        W_rec=None,
        w_out=d_out * h,
        b_out=d_out,
    )


def alg1_update(params: LayerParams, record: EpisodeRecord) -> PolicyDelta:
    """Reward-modulated Hebbian update for the Boltzmann-coupled layer.

    One-sided in the activity factor: hidden deltas are (R - baseline) * H
    and recurrent deltas c * (R - baseline) * H_i * H_j off the diagonal.
    """
    check_symmetric_zero_diag(params.W_rec)
    s = record.state.astype(np.float64)
    h = record.trace.H[-1].astype(np.float64)
    adv = record.reward - record.baseline
    hebb = np.outer(h, h)
    np.fill_diagonal(hebb, 0.0)
    _, d_out = _output_terms(params, record, adv)
    return PolicyDelta(
        W=np.outer(s, adv * h),
        b=adv * h,
        W_rec=params.c * adv * hebb,
        w_out=d_out * h,
        b_out=d_out,
    )


def alg1_update_negstats(params: LayerParams, record: EpisodeRecord, moments) -> PolicyDelta:
    """Exactly-centered variant of the Hebbian rule.

    moments must carry the conditional Boltzmann statistics for
    record.state: .first = E[H_i | S], .second = E[H_i H_j | S]. Centering
    by exact moments replaces the reward baseline, so raw reward is used.
    """
    check_symmetric_zero_diag(params.W_rec)
    s = record.state.astype(np.float64)
    h = record.trace.H[-1].astype(np.float64)
    r = float(record.reward)
    pair = np.outer(h, h) - moments.second
    np.fill_diagonal(pair, 0.0)
    _, d_out = _output_terms(params, record, r)
    return PolicyDelta(
        W=np.outer(s, r * (h - moments.first)),
        b=r * (h - moments.first),
        W_rec=params.c * r * pair,
        w_out=d_out * h,
        b_out=d_out,
    )


@dataclass
class EligibilityTraces:
    """Decaying sums of per-sweep score contributions."""

    z_rec: np.ndarray
    z: np.ndarray
    lam: float

    @classmethod
    def zeros(cls, n_hidden: int, lam: float) -> "EligibilityTraces":
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {lam}")
        return cls(z_rec=np.zeros((n_hidden, n_hidden)), z=np.zeros(n_hidden), lam=lam)


def accumulate_traces(
    traces: EligibilityTraces, h_prev: np.ndarray, h_new: np.ndarray, p: np.ndarray
) -> EligibilityTraces:
    """Fold one sweep into the traces (in place): decay by lambda, add score.

    z_rec[j, i] += h_prev[j] * (h_new[i] - p[i]); z[i] += (h_new[i] - p[i]).
    """
    d = h_new.astype(np.float64) - p
    traces.z_rec *= traces.lam
    traces.z_rec += np.outer(h_prev.astype(np.float64), d)
    traces.z *= traces.lam
    traces.z += d
    return traces


def traces_from_trace(trace: SampleTrace, lam: float) -> EligibilityTraces:
    """Accumulate a whole episode's sweeps into fresh traces."""
    traces = EligibilityTraces.zeros(trace.H.shape[1], lam)
    for t in range(1, trace.H.shape[0]):
        accumulate_traces(traces, trace.H[t - 1], trace.H[t], trace.P[t - 1])
    return traces


def alg2_update(
    params: LayerParams,
    record: EpisodeRecord,
    traces: EligibilityTraces,
    update_diagonal: bool = True,
) -> PolicyDelta:
    """Eligibility-trace update for the recurrent chain.

    W_rec may be asymmetric here and its diagonal is a live parameter
    (self-recurrence across sweeps); pass update_diagonal=False to freeze it.
    """
    s = record.state.astype(np.float64)
    adv = record.reward - record.baseline
    d_rec = params.c * adv * traces.z_rec
    if not update_diagonal:
        np.fill_diagonal(d_rec, 0.0)
    _, d_out = _output_terms(params, record, adv)
    return PolicyDelta(
        W=np.outer(s, adv * traces.z),
        b=adv * traces.z,
        W_rec=d_rec,
        w_out=d_out * record.trace.H[-1].astype(np.float64),
        b_out=d_out,
    )


def ste_update(
    params: LayerParams, record: EpisodeRecord, sigma_prime_backward: bool = True
) -> PolicyDelta:
    """Straight-through comparator: backprop the output error as if hidden
    sampling were the identity.

    Hidden delta is d_out * w_out_i, times sigma'(a_i) unless
    sigma_prime_backward is False. Only meaningful for the uncoupled layer,
    so c must be 0.
    """
    if params.c != 0.0:
        raise ValueError("straight-through update requires c = 0")
    s = record.state.astype(np.float64)
    adv = record.reward - record.baseline
    h, d_out = _output_terms(params, record, adv)
    g = d_out * params.w_out
    if sigma_prime_backward:
        g = g * sigmoid_prime(logits(params, record.state))
    return PolicyDelta(
        W=np.outer(s, g),
        b=g,
        W_rec=None,
        w_out=d_out * h,
        b_out=d_out,
    )


class Critic:
    """State-value baseline: state -> tanh hidden layer -> scalar.

    Output weights start at zero so a fresh critic predicts exactly 0.
    Trained by Adam on the squared prediction error; callers compute
    baselines for a batch before training on that batch.
    """

    def __init__(
        self,
        state_dim: int,
        rng: np.random.Generator,
        n_hidden: int = 64,
        alpha: float = 0.005,
    ):
        bound = 1.0 / np.sqrt(state_dim)
        self.W1 = (2.0 * rng.random((state_dim, n_hidden)) - 1.0) * bound
        self.b1 = np.zeros(n_hidden)
        self.w2 = np.zeros(n_hidden)
        self.b2 = 0.0
        self.alpha = alpha
        self._opt = {
            "W1": AdamState.zeros(self.W1.shape),
            "b1": AdamState.zeros(self.b1.shape),
            "w2": AdamState.zeros(self.w2.shape),
            "b2": AdamState.zeros(()),
        }

    def predict_batch(self, states: np.ndarray) -> np.ndarray:
        hidden = np.tanh(states.astype(np.float64) @ self.W1 + self.b1)
        return hidden @ self.w2 + self.b2

    def predict(self, state: np.ndarray) -> float:
        return float(self.predict_batch(state.astype(np.float64)[None, :])[0])

    def update_batch(self, states: np.ndarray, rewards: np.ndarray):
        """One Adam step on the batch-mean gradient of -(R - pred)^2 / 2."""
        states = states.astype(np.float64)
        hidden = np.tanh(states @ self.W1 + self.b1)
        err = rewards.astype(np.float64) - (hidden @ self.w2 + self.b2)
        n = states.shape[0]
        back = (err[:, None] * (1.0 - hidden * hidden)) * self.w2
        grads = {
            "W1": states.T @ back / n,
            "b1": back.mean(axis=0),
            "w2": (err[:, None] * hidden).mean(axis=0),
            "b2": np.asarray(err.mean()),
        }
        self.W1 += adam_step(self._opt["W1"], grads["W1"], self.alpha)
        self.b1 += adam_step(self._opt["b1"], grads["b1"], self.alpha)
        self.w2 += adam_step(self._opt["w2"], grads["w2"], self.alpha)
        self.b2 += float(adam_step(self._opt["b2"], grads["b2"], self.alpha))
