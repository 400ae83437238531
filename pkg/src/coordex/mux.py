"""The k-bit multiplexer task.

A state is k address bits followed by 2^k data bits, all iid Bernoulli(1/2).
The address bits select one data bit (little-endian: the first address bit
is the least significant) and the correct action is that bit's value.
Reward is +1 for a match, -1 otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MuxTask:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    @property
    def n_data(self) -> int:
        return 2**self.k

    @property
    def state_dim(self) -> int:
        return self.k + 2**self.k


def sample_state(task: MuxTask, rng: np.random.Generator) -> np.ndarray:
    """Uniform random state; consumes state_dim doubles in bit order."""
    return (rng.random(task.state_dim) < 0.5).astype(np.int8)


def sample_states(task: MuxTask, n: int, rng: np.random.Generator) -> np.ndarray:
    """n states as rows; consumes n * state_dim doubles in row order."""
    return (rng.random((n, task.state_dim)) < 0.5).astype(np.int8)


def mux_address(task: MuxTask, state: np.ndarray) -> int:
    """Decode the little-endian address from the first k bits."""
    addr = 0
    for i in range(task.k):
        addr += int(state[i]) << i
    return addr


def mux_output(task: MuxTask, state: np.ndarray) -> int:
    """The data bit the address selects, i.e. the rewarded action."""
    state = np.asarray(state)
    if state.shape != (task.state_dim,):
        raise ValueError(f"state shape {state.shape} != ({task.state_dim},)")
    return int(state[task.k + mux_address(task, state)])


def mux_output_batch(task: MuxTask, states: np.ndarray) -> np.ndarray:
    """Row-wise mux_output for an (n, state_dim) batch."""
    states = np.asarray(states)
    if states.ndim != 2 or states.shape[1] != task.state_dim:
        raise ValueError(f"states shape {states.shape} incompatible with k={task.k}")
    weights = 2 ** np.arange(task.k)
    addr = states[:, : task.k].astype(np.int64) @ weights
    return states[np.arange(states.shape[0]), task.k + addr].astype(np.int8)


def reward(action: int, target: int) -> int:
    """+1 if the action equals the target bit, else -1."""
    return 1 if int(action) == int(target) else -1


def infer_task(state_dim: int) -> MuxTask:
    """Recover the task from a state width (k + 2^k is injective in k)."""
    k = 1
    while k + 2**k < state_dim:
        k += 1
    if k + 2**k != state_dim:
        raise ValueError(f"no multiplexer has state width {state_dim}")
    return MuxTask(k)
