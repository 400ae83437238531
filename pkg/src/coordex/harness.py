"""Experiment driver: runs, sweeps, window reports, metrics files.

A run is fully determined by its RunConfig: stream layout, initialization,
batch schedule, and file contents are all derived from it. One batch is
batch_size episodes; the episode deltas are averaged and applied with one
Adam step per parameter block, then the critic takes one step on the same
batch (baselines are read before the critic trains).
"""

from __future__ import annotations

import csv
import dataclasses
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backend
from .config import ConfigError, RunConfig
from .core import AdamState, adam_step, make_streams
from .learn import CenteringMode, Critic, EpisodeRecord, PolicyDelta, alg1_update_negstats
from .mux import MuxTask, mux_output_batch, reward, sample_states
from .oracle import negative_statistics
from .policy import LayerParams, gibbs_sample, init_params, output_sample

METRICS_FIELDS = ("episode", "reward", "reward_ma", "seed", "config_id", "wall_ms")
RECURRENT_ALGORITHMS = ("alg1", "alg1-negstats", "alg2")

# sweepable config fields, by axis name accepted on the command line
AXIS_FIELDS = {"c": "c", "T": "gibbs_steps", "lambda": "lam", "N": "n_hidden"}


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean over `window` entries; shorter prefixes average what exists."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    x = np.asarray(x, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.shape[0] + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


@dataclass
class RunResult:
    """Everything a finished run hands back; files only if out_dir was given."""

    config: RunConfig
    params: LayerParams
    rewards: np.ndarray
    reward_ma: np.ndarray
    wall_ms: np.ndarray
    backend: str
    metrics_path: str | None = None
    params_path: str | None = None

    def window_mean(self, start: int, end: int) -> float:
        _check_window(start, end, self.rewards.shape[0])
        return float(self.rewards[start:end].astype(np.float64).mean())


class _PolicyOptimizer:
    """Per-block Adam states for the policy parameters."""

    def __init__(self, params: LayerParams, alpha: float, with_rec: bool):
        self.alpha = alpha
        self.with_rec = with_rec
        self.states = {
            "W": AdamState.zeros(params.W.shape),
            "b": AdamState.zeros(params.b.shape),
            "w_out": AdamState.zeros(params.w_out.shape),
            "b_out": AdamState.zeros(()),
        }
        if with_rec:
            self.states["W_rec"] = AdamState.zeros(params.W_rec.shape)

    def apply(self, params: LayerParams, dW, db, dW_rec, dw_out, db_out, scale: float):
        params.W += adam_step(self.states["W"], dW * scale, self.alpha)
        params.b += adam_step(self.states["b"], db * scale, self.alpha)
        if self.with_rec and dW_rec is not None:
            params.W_rec += adam_step(self.states["W_rec"], dW_rec * scale, self.alpha)
        params.w_out += adam_step(self.states["w_out"], dw_out * scale, self.alpha)
        params.b_out += float(adam_step(self.states["b_out"], np.asarray(db_out * scale), self.alpha))


def _negstats_batch(params, T, states, targets, rng_warm, rng_final, rng_action):
    """Python path for the exactly-centered Hebbian rule.

    Consumes the streams exactly like the compiled kernels (T*N warmup
    doubles, N final doubles, 1 action double per episode). The conditional
    moments are enumerated once per distinct state within the batch; they
    are valid for the whole batch because parameters change between batches.
    """
    B = states.shape[0]
    total = PolicyDelta.zeros(params.state_dim, params.n_hidden, with_rec=True)
    rewards = np.empty(B, dtype=np.int8)
    moment_cache: dict[bytes, object] = {}
    for e in range(B):
        s = states[e]
        trace = gibbs_sample(params, s, T, rng_warm, final_rng=rng_final)
        action, _ = output_sample(params, trace.H[-1], rng_action)
        r = reward(action, int(targets[e]))
        rewards[e] = r
        key = s.tobytes()
        moments = moment_cache.get(key)
        if moments is None:
            moments = moment_cache[key] = negative_statistics(params, s)
        record = EpisodeRecord(state=s, trace=trace, action=action, reward=r, baseline=0.0)
        total.add_(alg1_update_negstats(params, record, moments))
    return total.W, total.b, total.W_rec, total.w_out, total.b_out, rewards


def run(config: RunConfig, out_dir: str | None = None) -> RunResult:
    """Train one policy; deterministic given the config.

    With out_dir set, writes `<config_id>-seed<seed>.csv` (metrics) and
    `<config_id>-seed<seed>-params.npz` (final policy and critic weights).
    """
    config.validate()
    task = MuxTask(config.k)
    streams = make_streams(config.seed)
    params = init_params(task.state_dim, config.n_hidden, config.c, streams["param_init"])
    critic = Critic(task.state_dim, streams["critic_init"], config.critic_hidden, config.critic_alpha)
    opt = _PolicyOptimizer(params, config.alpha, with_rec=config.algorithm in RECURRENT_ALGORITHMS)
    env, warm, fin, act = streams["env"], streams["warmup"], streams["final"], streams["action"]
    K = backend.kernels
    mode = backend.mode_code(CenteringMode(config.centering))
    B = config.batch_size
    T = config.gibbs_steps
    n_batches = config.episodes // B
    rewards = np.empty(config.episodes, dtype=np.int8)
    wall_ms = np.zeros(config.episodes, dtype=np.int64)
    t0 = time.perf_counter()
    for bi in range(n_batches):
        states = sample_states(task, B, env)
        targets = mux_output_batch(task, states)
        baselines = critic.predict_batch(states)
        if config.algorithm == "indep-reinforce":
            dW, db, dWr, dwo, dbo, r = K.batch_indep(
                params.W, params.b, params.w_out, params.b_out, states, targets, baselines, mode, fin, act
            )
        elif config.algorithm == "ste":
            dW, db, dWr, dwo, dbo, r = K.batch_ste(
                params.W, params.b, params.w_out, params.b_out, states, targets, baselines,
                1 if config.ste_sigma_prime else 0, fin, act,
            )
        elif config.algorithm == "alg1":
            dW, db, dWr, dwo, dbo, r = K.batch_alg1(
                params.W, params.b, params.W_rec, params.c, T,
                params.w_out, params.b_out, states, targets, baselines, warm, fin, act,
            )
        elif config.algorithm == "alg2":
            dW, db, dWr, dwo, dbo, r = K.batch_alg2(
                params.W, params.b, params.W_rec, params.c, T, config.lam,
                1 if config.update_recurrent_diagonal else 0,
                params.w_out, params.b_out, states, targets, baselines, warm, fin, act,
            )
        else:
            dW, db, dWr, dwo, dbo, r = _negstats_batch(params, T, states, targets, warm, fin, act)
        rewards[bi * B : (bi + 1) * B] = r
        opt.apply(params, dW, db, dWr, dwo, dbo, 1.0 / B)
        critic.update_batch(states, r)
        if config.timing:
            wall_ms[bi * B : (bi + 1) * B] = int((time.perf_counter() - t0) * 1000.0)
    reward_ma = moving_average(rewards, config.ma_window)
    result = RunResult(
        config=config,
        params=params,
        rewards=rewards,
        reward_ma=reward_ma,
        wall_ms=wall_ms,
        backend=backend.backend_name(),
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        stem = f"{config.config_id()}-seed{config.seed}"
        result.metrics_path = os.path.join(out_dir, stem + ".csv")
        write_metrics_csv(result.metrics_path, result)
        result.params_path = os.path.join(out_dir, stem + "-params.npz")
        save_run_params(result.params_path, params, critic)
    return result


def metrics_csv_text(result: RunResult) -> str:
    """Render the per-episode metrics CSV; floats use %.9g."""
    config_id = result.config.config_id()
    seed = result.config.seed
    lines = [",".join(METRICS_FIELDS)]
    rewards = result.rewards
    ma = result.reward_ma
    wall = result.wall_ms
    for i in range(rewards.shape[0]):
        lines.append(f"{i},{int(rewards[i])},{ma[i]:.9g},{seed},{config_id},{int(wall[i])}")
    return "\n".join(lines) + "\n"


def write_metrics_csv(path: str, result: RunResult) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(metrics_csv_text(result))


def read_metrics_csv(path: str) -> dict:
    """Load one metrics CSV; raises ConfigError on schema mismatch."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty metrics file") from None
        if tuple(header) != METRICS_FIELDS:
            raise ConfigError(f"{path}: expected header {','.join(METRICS_FIELDS)!r}")
        episode, rew, ma, wall = [], [], [], []
        seed = None
        config_id = None
        for row in reader:
            if len(row) != len(METRICS_FIELDS):
                raise ConfigError(f"{path}: malformed row {row!r}")
            episode.append(int(row[0]))
            rew.append(int(row[1]))
            ma.append(float(row[2]))
            wall.append(int(row[5]))
            if seed is None:
                seed = int(row[3])
                config_id = row[4]
    if seed is None:
        raise ConfigError(f"{path}: no data rows")
    return {
        "episode": np.asarray(episode, dtype=np.int64),
        "reward": np.asarray(rew, dtype=np.int8),
        "reward_ma": np.asarray(ma, dtype=np.float64),
        "wall_ms": np.asarray(wall, dtype=np.int64),
        "seed": seed,
        "config_id": config_id,
        "path": path,
    }


def save_run_params(path: str, params: LayerParams, critic: Critic) -> None:
    np.savez(
        path,
        W=params.W, b=params.b, W_rec=params.W_rec, c=np.asarray(params.c),
        w_out=params.w_out, b_out=np.asarray(params.b_out),
        critic_W1=critic.W1, critic_b1=critic.b1, critic_w2=critic.w2, critic_b2=np.asarray(critic.b2),
    )


def load_run_params(path: str) -> LayerParams:
    with np.load(path) as z:
        return LayerParams(
            W=z["W"], b=z["b"], W_rec=z["W_rec"], c=float(z["c"]),
            w_out=z["w_out"], b_out=float(z["b_out"]),
        )


def _check_window(start: int, end: int, episodes: int) -> None:
    if not (0 <= start < end <= episodes):
        raise ConfigError(f"window [{start}, {end}) does not fit a {episodes}-episode run")


def default_windows(episodes: int) -> list[tuple[str, int, int]]:
    """First and last quarter of the run."""
    q = max(1, episodes // 4)
    return [("first", 0, q), ("last", episodes - q, episodes)]


def parse_window_spec(text: str, episodes: int) -> list[tuple[str, int, int]]:
    """Parse `name=start:end,...` (names optional; end may be 'end')."""
    windows = []
    for i, part in enumerate(text.split(",")):
        part = part.strip()
        if not part:
            raise ConfigError(f"empty window in spec {text!r}")
        name, _, span = part.rpartition("=")
        if not name:
            name = f"w{i}"
        lo, sep, hi = span.partition(":")
        if not sep:
            raise ConfigError(f"window {part!r} must look like start:end")
        try:
            start = int(lo)
            end = episodes if hi.strip() == "end" else int(hi)
        except ValueError:
            raise ConfigError(f"window {part!r} must use integer bounds") from None
        _check_window(start, end, episodes)
        windows.append((name, start, end))
    return windows


def window_report(runs: list[dict], windows: list[tuple[str, int, int]]) -> list[dict]:
    """Aggregate raw-reward window means across seeds, grouped by config_id.

    Rows come out in (config_id, window) order with mean and population std
    across seeds; a single seed reports std 0 and is flagged.
    """
    if not runs:
        raise ConfigError("no runs to report on")
    by_config: dict[str, list[dict]] = {}
    for r in runs:
        by_config.setdefault(r["config_id"], []).append(r)
    rows = []
    for config_id in sorted(by_config):
        group = sorted(by_config[config_id], key=lambda r: r["seed"])
        for name, start, end in windows:
            means = []
            for r in group:
                _check_window(start, end, r["reward"].shape[0])
                means.append(float(r["reward"][start:end].astype(np.float64).mean()))
            arr = np.asarray(means)
            rows.append({
                "config_id": config_id,
                "window": name,
                "start": start,
                "end": end,
                "n_seeds": len(group),
                "mean": float(arr.mean()),
                "std": float(arr.std()),
                "flag": "single-seed" if len(group) == 1 else "",
            })
    return rows


def report_csv_text(rows: list[dict]) -> str:
    fields = ("config_id", "window", "start", "end", "n_seeds", "mean", "std", "flag")
    lines = [",".join(fields)]
    for row in rows:
        lines.append(
            f"{row['config_id']},{row['window']},{row['start']},{row['end']},"
            f"{row['n_seeds']},{row['mean']:.9g},{row['std']:.9g},{row['flag']}"
        )
    return "\n".join(lines) + "\n"


@dataclass
class SweepResult:
    axis: str
    values: list
    seeds: list[int]
    cells: list[dict]
    summary_rows: list[dict]
    summary_path: str | None = None


def _sweep_cell(args):
    config, out_dir, windows, keep_curve = args
    result = run(config, out_dir=out_dir)
    cell = {
        "value": None,  # filled by caller
        "seed": config.seed,
        "config_id": config.config_id(),
        "windows": {name: result.window_mean(start, end) for name, start, end in windows},
    }
    if keep_curve:
        stride = max(1, config.episodes // 2000)
        cell["curve_episode"] = np.arange(0, config.episodes, stride, dtype=np.int64)
        cell["curve_ma"] = result.reward_ma[::stride].copy()
    return cell


def sweep(
    base: RunConfig,
    axis: str,
    values,
    seeds,
    out_dir: str | None = None,
    windows: list[tuple[str, int, int]] | None = None,
    jobs: int = 1,
    keep_curves: bool = False,
) -> SweepResult:
    """One run per (value, seed) cell, merged in deterministic order.

    Cells are independent; jobs > 1 runs them in worker processes. Window
    means of raw reward are aggregated across seeds per value (mean and
    population std; a single seed reports std 0 and is flagged).
    """
    if axis not in AXIS_FIELDS:
        raise ConfigError(f"sweep axis must be one of {sorted(AXIS_FIELDS)}, got {axis!r}")
    values = list(values)
    seeds = [int(s) for s in seeds]
    if not values:
        raise ConfigError("sweep needs at least one value")
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    if len(set(values)) != len(values) or len(set(seeds)) != len(seeds):
        raise ConfigError("sweep values and seeds must be unique")
    field = AXIS_FIELDS[axis]
    windows = default_windows(base.episodes) if windows is None else windows
    for name, start, end in windows:
        _check_window(start, end, base.episodes)
    configs = []
    for value in values:
        for seed in seeds:
            cfg = dataclasses.replace(base, **{field: value}, seed=seed)
            cfg.validate()
            configs.append((value, cfg))
    tasks = [(cfg, out_dir, windows, keep_curves) for _, cfg in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_sweep_cell, tasks))
    else:
        cells = [_sweep_cell(t) for t in tasks]
    for (value, _), cell in zip(configs, cells):
        cell["value"] = value
    summary_rows = []
    for value in values:
        group = [c for c in cells if c["value"] == value]
        for name, start, end in windows:
            arr = np.asarray([c["windows"][name] for c in group])
            summary_rows.append({
                "axis": axis,
                "value": value,
                "window": name,
                "start": start,
                "end": end,
                "n_seeds": len(group),
                "mean": float(arr.mean()),
                "std": float(arr.std()),
                "flag": "single-seed" if len(group) == 1 else "",
            })
    result = SweepResult(axis=axis, values=values, seeds=seeds, cells=cells, summary_rows=summary_rows)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        result.summary_path = os.path.join(out_dir, "sweep-summary.csv")
        fields = ("axis", "value", "window", "start", "end", "n_seeds", "mean", "std", "flag")
        lines = [",".join(fields)]
        for row in summary_rows:
            lines.append(
                f"{row['axis']},{row['value']:g},{row['window']},{row['start']},{row['end']},"
                f"{row['n_seeds']},{row['mean']:.9g},{row['std']:.9g},{row['flag']}"
            )
        with open(result.summary_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    return result


def bench_backends(config: RunConfig, n_batches: int = 200) -> list[dict]:
    """Time the episode kernels of every importable backend on one workload.

    Measures kernel calls only (no optimizer, no critic updates) over
    identical stream-driven batches; one untimed warmup batch per backend.
    """
    from . import _kernels_py

    config.validate()
    modules = [_kernels_py]
    try:
        from . import _kernels

        modules.append(_kernels)
    except ImportError:
        pass
    rows = []
    for K in modules:
        task = MuxTask(config.k)
        streams = make_streams(config.seed)
        params = init_params(task.state_dim, config.n_hidden, config.c, streams["param_init"])
        critic = Critic(task.state_dim, streams["critic_init"], config.critic_hidden, config.critic_alpha)
        env, warm, fin, act = streams["env"], streams["warmup"], streams["final"], streams["action"]
        mode = backend.mode_code(CenteringMode(config.centering))
        B, T = config.batch_size, config.gibbs_steps

        def one_batch():
            states = sample_states(task, B, env)
            targets = mux_output_batch(task, states)
            baselines = critic.predict_batch(states)
            if config.algorithm == "indep-reinforce":
                K.batch_indep(params.W, params.b, params.w_out, params.b_out,
                              states, targets, baselines, mode, fin, act)
            elif config.algorithm == "ste":
                K.batch_ste(params.W, params.b, params.w_out, params.b_out, states, targets,
                            baselines, 1 if config.ste_sigma_prime else 0, fin, act)
            elif config.algorithm == "alg2":
                K.batch_alg2(params.W, params.b, params.W_rec, params.c, T, config.lam,
                             1 if config.update_recurrent_diagonal else 0, params.w_out, params.b_out,
                             states, targets, baselines, warm, fin, act)
            else:
                K.batch_alg1(params.W, params.b, params.W_rec, params.c, T, params.w_out,
                             params.b_out, states, targets, baselines, warm, fin, act)

        one_batch()
        t0 = time.perf_counter()
        for _ in range(n_batches):
            one_batch()
        elapsed = time.perf_counter() - t0
        episodes = n_batches * B
        rows.append({
            "backend": K.BACKEND_NAME,
            "algorithm": config.algorithm,
            "episodes": episodes,
            "seconds": elapsed,
            "us_per_episode": 1e6 * elapsed / episodes,
        })
    return rows
