"""Numerics shared by every module: stable sigmoid, named RNG streams, Adam.

Reproducibility contract: every random draw in a run comes from one of the
named Philox streams below, each seeded from the run seed plus the stream's
fixed spawn key. A Bernoulli sample consumes exactly one double from its
stream, so consumption counts are auditable and two configurations that
draw from a stream in the same order see identical bits regardless of what
the other streams did.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Stream name -> spawn key. Order is part of the on-disk/reproducibility
# contract; never renumber, only append.
STREAMS = {
    "param_init": 0,
    "critic_init": 1,
    "env": 2,
    "warmup": 3,
    "final": 4,
    "action": 5,
    "mc": 6,
}


def make_stream(seed: int, name: str) -> np.random.Generator:
    """Return the named Philox stream for this run seed."""
    try:
        key = STREAMS[name]
    except KeyError:
        raise ValueError(f"unknown stream {name!r}") from None
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(key,))))


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    """All named streams for one run, keyed by stream name."""
    return {name: make_stream(seed, name) for name in STREAMS}


def sigmoid(x):
    """Logistic function, computed without overflow for any finite input.

    Splits on sign so the exponential argument is always <= 0:
    x >= 0 gives 1/(1+e^-x), x < 0 gives e^x/(1+e^x).
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return float(out) if out.ndim == 0 else out


def sigmoid_prime(x):
    """Derivative of the logistic function, sigma(x) * (1 - sigma(x))."""
    s = sigmoid(x)
    return s * (1.0 - s)


def bernoulli(p: float, rng: np.random.Generator) -> int:
    """One Bernoulli(p) sample. Consumes exactly one double from rng."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    return int(rng.random() < p)


def bernoulli_vector(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Elementwise Bernoulli samples, one double per element, in index order."""
    p = np.asarray(p, dtype=np.float64)
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise ValueError("probabilities outside [0, 1]")
    return (rng.random(p.shape) < p).astype(np.int8)


@dataclass
class AdamState:
    """Per-parameter Adam accumulators (gradient-ascent convention)."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, shape) -> "AdamState":
        return cls(m=np.zeros(shape), v=np.zeros(shape))


def adam_step(state: AdamState, grad: np.ndarray, alpha: float) -> np.ndarray:
    """Advance Adam one step and return the parameter increment.

    Ascent convention: the increment has the sign of ``grad``, so callers do
    ``params += adam_step(...)`` to maximize. Mutates ``state`` in place.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.m.shape:
        raise ValueError(f"gradient shape {grad.shape} != state shape {state.m.shape}")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return alpha * m_hat / (np.sqrt(v_hat) + state.eps)


def adam_state_arrays(state: AdamState) -> dict[str, np.ndarray]:
    """Flatten an AdamState into arrays suitable for np.savez."""
    return {
        "m": state.m,
        "v": state.v,
        "t": np.array(state.t, dtype=np.int64),
        "hyper": np.array([state.beta1, state.beta2, state.eps]),
    }


def adam_state_from_arrays(arrays) -> AdamState:
    """Inverse of adam_state_arrays."""
    hyper = np.asarray(arrays["hyper"], dtype=np.float64)
    return AdamState(
        m=np.asarray(arrays["m"], dtype=np.float64),
        v=np.asarray(arrays["v"], dtype=np.float64),
        t=int(arrays["t"]),
        beta1=float(hyper[0]),
        beta2=float(hyper[1]),
        eps=float(hyper[2]),
    )
