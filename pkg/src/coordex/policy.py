"""Stochastic policy: a hidden layer of Bernoulli-logistic units plus one
Bernoulli-logistic output unit.

Three sampling regimes share one parameter container:

* independent: each hidden unit fires with probability sigma(a_i) where
  a = s W + b.
* Boltzmann: recurrent weights W_rec (symmetric, zero diagonal) couple the
  units; synchronous Gibbs sweeps approximate the Boltzmann distribution
  with energy gain a.h + c * h.W_rec.h.
* recurrent chain: the same synchronous sweep run for a fixed number of
  steps with an arbitrary (not necessarily symmetric) W_rec; the trace of
  visited configurations is the object the learning rules consume.

The coupling strength c scales every recurrent contribution to a unit's
pre-activation: pre_i = c * sum_j W_rec[j, i] h_j + a_i.

Stream contract used by the training loop: the initial configuration and
all Gibbs steps except the last draw from the "warmup" stream (T * N
doubles per episode); the last step draws from the "final" stream (N
doubles); the output unit draws one double from the "action" stream.
Independent sampling draws its N doubles from the "final" stream, so at
c = 0 a Gibbs-sampled episode and an independent episode consume identical
randomness and produce identical samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import bernoulli, bernoulli_vector, sigmoid


@dataclass
class LayerParams:
    """Hidden-layer and output-unit parameters.

    W[j, i] feeds state bit j to hidden unit i; W_rec[j, i] feeds hidden
    unit j to hidden unit i on the next sweep; w_out reads the hidden
    configuration into the output unit's pre-activation.
    """

    W: np.ndarray
    b: np.ndarray
    W_rec: np.ndarray
    c: float
    w_out: np.ndarray
    b_out: float

    @property
    def state_dim(self) -> int:
        return self.W.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[1]

    def validate(self):
        n = self.n_hidden
        if self.W.ndim != 2:
            raise ValueError(f"W must be 2-d, got shape {self.W.shape}")
        if self.b.shape != (n,):
            raise ValueError(f"b shape {self.b.shape} != ({n},)")
        if self.W_rec.shape != (n, n):
            raise ValueError(f"W_rec shape {self.W_rec.shape} != ({n}, {n})")
        if self.w_out.shape != (n,):
            raise ValueError(f"w_out shape {self.w_out.shape} != ({n},)")
        if not np.isfinite(self.c):
            raise ValueError(f"c must be finite, got {self.c}")

    def copy(self) -> "LayerParams":
        return LayerParams(
            W=self.W.copy(),
            b=self.b.copy(),
            W_rec=self.W_rec.copy(),
            c=self.c,
            w_out=self.w_out.copy(),
            b_out=self.b_out,
        )


def init_params(state_dim: int, n_hidden: int, c: float, rng: np.random.Generator) -> LayerParams:
    """Fresh parameters: W and w_out uniform in +-1/sqrt(fan_in), rest zero.

    Draw order (all from rng): W row-major, then w_out. Zero W_rec keeps the
    initial hidden law independent regardless of c.
    """
    bound_w = 1.0 / np.sqrt(state_dim)
    bound_out = 1.0 / np.sqrt(n_hidden)
    W = (2.0 * rng.random((state_dim, n_hidden)) - 1.0) * bound_w
    w_out = (2.0 * rng.random(n_hidden) - 1.0) * bound_out
    return LayerParams(
        W=W,
        b=np.zeros(n_hidden),
        W_rec=np.zeros((n_hidden, n_hidden)),
        c=float(c),
        w_out=w_out,
        b_out=0.0,
    )


def check_symmetric_zero_diag(W_rec: np.ndarray):
    """Boltzmann sampling requires W_rec symmetric with zero diagonal.

    Exact equality, not a tolerance: the zero init and the symmetric update
    rules preserve both properties bit for bit.
    """
    if np.any(np.diag(W_rec) != 0.0):
        raise ValueError("W_rec has nonzero diagonal")
    if not np.array_equal(W_rec, W_rec.T):
        raise ValueError("W_rec is not symmetric")


def logits(params: LayerParams, s: np.ndarray) -> np.ndarray:
    """Feedforward pre-activations a = s W + b."""
    return np.asarray(s, dtype=np.float64) @ params.W + params.b


def conditional_prob(params: LayerParams, h: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Per-unit firing probabilities for one synchronous sweep given h."""
    pre = params.c * (np.asarray(h, dtype=np.float64) @ params.W_rec) + logits(params, s)
    return sigmoid(pre)


def output_prob(params: LayerParams, h: np.ndarray) -> float:
    """Output unit's firing probability given a hidden configuration."""
    return sigmoid(float(np.asarray(h, dtype=np.float64) @ params.w_out + params.b_out))


def sample_independent(params: LayerParams, s: np.ndarray, rng: np.random.Generator):
    """Sample the uncoupled hidden layer. Returns (H, p), consumes N doubles."""
    p = sigmoid(logits(params, s))
    return bernoulli_vector(p, rng), p


def output_sample(params: LayerParams, h: np.ndarray, rng: np.random.Generator):
    """Sample the output unit. Returns (A, p_out), consumes one double."""
    p_out = output_prob(params, h)
    return bernoulli(p_out, rng), p_out


@dataclass
class SampleTrace:
    """Record of one sampling episode.

    H holds T+1 configurations (row 0 the initial independent sample, row t
    the result of sweep t); P holds the T per-sweep conditional probability
    vectors, so P[t-1] generated H[t].
    """

    H: np.ndarray
    P: np.ndarray

    @property
    def T(self) -> int:
        return self.H.shape[0] - 1

    def validate(self):
        if self.H.ndim != 2 or self.P.ndim != 2:
            raise ValueError("trace arrays must be 2-d")
        if self.H.shape[0] != self.P.shape[0] + 1:
            raise ValueError(f"H has {self.H.shape[0]} rows, expected {self.P.shape[0] + 1}")
        if self.H.shape[1] != self.P.shape[1]:
            raise ValueError("H and P disagree on layer width")
        if self.T < 1:
            raise ValueError("trace needs at least one sweep")
        vals = np.unique(self.H)
        if not np.all(np.isin(vals, [0, 1])):
            raise ValueError("H entries must be 0/1")


def gibbs_sample(
    params: LayerParams,
    s: np.ndarray,
    T: int,
    rng: np.random.Generator,
    final_rng: np.random.Generator | None = None,
) -> SampleTrace:
    """Run T synchronous sweeps from an independent initial sample.

    Draws the initial sample and sweeps 1..T-1 from rng and the final sweep
    from final_rng (defaulting to rng), matching the training loop's
    warmup/final stream split.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if final_rng is None:
        final_rng = rng
    n = params.n_hidden
    a = logits(params, s)
    H = np.empty((T + 1, n), dtype=np.int8)
    P = np.empty((T, n), dtype=np.float64)
    H[0] = bernoulli_vector(sigmoid(a), rng)
    for t in range(1, T + 1):
        p = sigmoid(params.c * (H[t - 1].astype(np.float64) @ params.W_rec) + a)
        P[t - 1] = p
        H[t] = bernoulli_vector(p, final_rng if t == T else rng)
    return SampleTrace(H=H, P=P)


def independent_trace(H: np.ndarray, p: np.ndarray) -> SampleTrace:
    """Wrap an independent sample as a one-sweep trace.

    Both rows hold the same configuration; the learning rules only read the
    final row, so this lets independent and Gibbs episodes share the record
    format.
    """
    H = np.asarray(H, dtype=np.int8)
    return SampleTrace(H=np.stack([H, H]), P=np.asarray(p, dtype=np.float64)[None, :])
