"""Vectorized numpy episode kernels (fallback backend).

Each function simulates one batch of episodes and returns the summed
parameter deltas plus per-episode rewards. The compiled backend implements
the same contract; the harness treats them interchangeably.

Stream contract (shared with the compiled kernels): per episode, the
initial hidden sample and sweeps 1..T-1 consume T*N doubles from the
warmup generator, the final sweep (or the independent sample) consumes N
doubles from the final generator, and the output unit consumes one double
from the action generator, all in episode-major order. Pre-drawing the
uniforms as (B, T, N) blocks preserves exactly that order, because the
uniforms do not depend on the sampled path.

Bit-exactness guarantees within this backend: the coupled kernel at c=0
evaluates the same expressions as the independent kernel in
one-sided-reward mode, and the trace kernel at c=0, lam=0 evaluates the
same expressions as the independent kernel in two-sided mode, so the
equivalence reductions hold bit for bit.
"""

from __future__ import annotations

import numpy as np

from .core import sigmoid

MODE_TWO_SIDED = 0
MODE_ONE_SIDED_ACTION = 1
MODE_ONE_SIDED_REWARD = 2

BACKEND_NAME = "numpy"


def _output_phase(w_out, b_out, Hf, targets, rng_action):
    """Sample the output unit and score each episode."""
    p_out = sigmoid(Hf @ w_out + b_out)
    actions = rng_action.random(p_out.shape[0]) < p_out
    rewards = np.where(actions == (targets != 0), np.int8(1), np.int8(-1))
    return p_out, actions, rewards


def _tail(states_f, Hf, unit, scale, d_out):
    """Summed deltas for the blocks every rule shares."""
    M = scale[:, None] * unit
    dW = states_f.T @ M
    db = M.sum(axis=0)
    dw_out = d_out @ Hf
    db_out = float(d_out.sum())
    return dW, db, dw_out, db_out


def batch_indep(W, b, w_out, b_out, states, targets, baselines, mode, rng_final, rng_action):
    """One batch of independent-exploration episodes."""
    states_f = states.astype(np.float64)
    a = states_f @ W + b
    p = sigmoid(a)
    Hf = (rng_final.random(a.shape) < p).astype(np.float64)
    p_out, actions, rewards = _output_phase(w_out, b_out, Hf, targets, rng_action)
    if mode == MODE_ONE_SIDED_ACTION:
        scale = rewards.astype(np.float64)
    else:
        scale = rewards - baselines
    d_out = scale * (actions - p_out)
    unit = Hf if mode == MODE_ONE_SIDED_REWARD else Hf - p
    dW, db, dw_out, db_out = _tail(states_f, Hf, unit, scale, d_out)
    return dW, db, None, dw_out, db_out, rewards


def batch_ste(W, b, w_out, b_out, states, targets, baselines, sigma_prime, rng_final, rng_action):
    """One batch of straight-through episodes (uncoupled layer)."""
    states_f = states.astype(np.float64)
    a = states_f @ W + b
    p = sigmoid(a)
    Hf = (rng_final.random(a.shape) < p).astype(np.float64)
    p_out, actions, rewards = _output_phase(w_out, b_out, Hf, targets, rng_action)
    scale = rewards - baselines
    d_out = scale * (actions - p_out)
    g = d_out[:, None] * w_out[None, :]
    if sigma_prime:
        g = g * (p * (1.0 - p))
    dW = states_f.T @ g
    db = g.sum(axis=0)
    dw_out = d_out @ Hf
    db_out = float(d_out.sum())
    return dW, db, None, dw_out, db_out, rewards


def batch_alg1(W, b, W_rec, c, T, w_out, b_out, states, targets, baselines, rng_warm, rng_final, rng_action):
    """One batch of Boltzmann-coupled episodes with the Hebbian rule."""
    states_f = states.astype(np.float64)
    a = states_f @ W + b
    U = rng_warm.random((states.shape[0], T, a.shape[1]))
    Hf = (U[:, 0, :] < sigmoid(a)).astype(np.float64)
    for t in range(1, T + 1):
        pre = a if c == 0.0 else c * (Hf @ W_rec) + a
        p = sigmoid(pre)
        u = rng_final.random(a.shape) if t == T else U[:, t, :]
        Hf = (u < p).astype(np.float64)
    p_out, actions, rewards = _output_phase(w_out, b_out, Hf, targets, rng_action)
    scale = rewards - baselines
    d_out = scale * (actions - p_out)
    dW, db, dw_out, db_out = _tail(states_f, Hf, Hf, scale, d_out)
    M = scale[:, None] * Hf
    # mirror the upper triangle: the matmul result is symmetric only up to
    # summation order, and downstream invariants require exact symmetry
    upper = c * np.triu(Hf.T @ M, 1)
    dW_rec = upper + upper.T
    return dW, db, dW_rec, dw_out, db_out, rewards


def batch_alg2(
    W, b, W_rec, c, T, lam, update_diag, w_out, b_out, states, targets, baselines, rng_warm, rng_final, rng_action
):
    """One batch of recurrent-chain episodes with eligibility traces."""
    states_f = states.astype(np.float64)
    a = states_f @ W + b
    B, n = a.shape
    U = rng_warm.random((B, T, n))
    Hf = (U[:, 0, :] < sigmoid(a)).astype(np.float64)
    z = np.zeros((B, n))
    z_rec = np.zeros((B, n, n))
    for t in range(1, T + 1):
        pre = a if c == 0.0 else c * (Hf @ W_rec) + a
        p = sigmoid(pre)
        u = rng_final.random(a.shape) if t == T else U[:, t, :]
        Hnew = (u < p).astype(np.float64)
        d = Hnew - p
        z_rec *= lam
        z_rec += Hf[:, :, None] * d[:, None, :]
        z = lam * z + d
        Hf = Hnew
    p_out, actions, rewards = _output_phase(w_out, b_out, Hf, targets, rng_action)
    scale = rewards - baselines
    d_out = scale * (actions - p_out)
    dW, db, dw_out, db_out = _tail(states_f, Hf, z, scale, d_out)
    dW_rec = c * np.einsum("e,eji->ji", scale, z_rec)
    if not update_diag:
        np.fill_diagonal(dW_rec, 0.0)
    return dW, db, dW_rec, dw_out, db_out, rewards
