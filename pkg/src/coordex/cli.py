"""Command line interface.

Subcommands: run, sweep, oracle, plot, report, bench. Exit codes: 0 on
success, 2 for configuration or usage errors, 3 for runtime failures
(including a failed oracle battery).
"""

from __future__ import annotations

import argparse
import sys

from . import backend
from .config import PRESETS, SWEEP_GRIDS, ConfigError, build_config
from . import harness
from .oracle import verification_report
from .svgplot import series_from_runs, write_svg

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="config file (key = value lines)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named base configuration")
    p.add_argument("--algorithm", help="indep-reinforce | alg1 | alg1-negstats | alg2 | ste")
    p.add_argument("--centering", help="two-sided | one-sided-action | one-sided-reward")
    p.add_argument("--k", type=int, help="multiplexer address width")
    p.add_argument("--n-hidden", type=int, dest="n_hidden", help="hidden units")
    p.add_argument("--gibbs-steps", type=int, dest="gibbs_steps", help="sweeps per episode (T)")
    p.add_argument("--c", type=float, help="recurrent coupling strength")
    p.add_argument("--lambda", type=float, dest="lam", help="eligibility trace decay")
    p.add_argument("--alpha", type=float, help="policy Adam step size")
    p.add_argument("--batch", type=int, dest="batch_size", help="episodes per update")
    p.add_argument("--episodes", type=int, help="total episodes")
    p.add_argument("--seed", type=int, help="run seed")
    p.add_argument("--critic-hidden", type=int, dest="critic_hidden")
    p.add_argument("--critic-alpha", type=float, dest="critic_alpha")
    p.add_argument("--update-recurrent-diagonal", dest="update_recurrent_diagonal",
                   choices=("true", "false"), help="alg2: train self-recurrence weights")
    p.add_argument("--ste-sigma-prime", dest="ste_sigma_prime", choices=("true", "false"),
                   help="ste: multiply the backward pass by sigma'")
    p.add_argument("--ma-window", type=int, dest="ma_window", help="moving-average window")
    p.add_argument("--timing", action="store_const", const=True, default=None,
                   help="record cumulative wall-clock ms per batch in the metrics")
    p.add_argument("--out", help="output directory")


def _flags_dict(args: argparse.Namespace) -> dict:
    names = ("algorithm", "centering", "k", "n_hidden", "gibbs_steps", "c", "lam", "alpha",
             "batch_size", "episodes", "seed", "critic_hidden", "critic_alpha",
             "update_recurrent_diagonal", "ste_sigma_prime", "ma_window", "timing", "out")
    flags = {}
    for name in names:
        value = getattr(args, name, None)
        if value is None:
            continue
        if value in ("true", "false"):
            value = value == "true"
        flags[name] = value
    return flags


def _config_from_args(args: argparse.Namespace):
    return build_config(preset=args.preset, config_file=args.config, flags=_flags_dict(args))


def _parse_values(axis: str, text: str) -> list:
    cast = int if axis in ("N", "T") else float
    try:
        return [cast(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"--values for axis {axis} must be comma-separated {cast.__name__}s") from None


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError("--seeds must be comma-separated integers") from None


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    result = harness.run(config, out_dir=config.out)
    final_ma = result.reward_ma[-1]
    print(f"run {config.config_id()} seed {config.seed} [{result.backend}]")
    print(f"  episodes {config.episodes}  final reward_ma {final_ma:.9g}")
    print(f"  metrics {result.metrics_path}")
    print(f"  params  {result.params_path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _config_from_args(args)
    if (args.values is None) == (args.grid is None):
        raise ConfigError("sweep needs exactly one of --values or --grid")
    if args.grid is not None:
        if args.grid not in SWEEP_GRIDS:
            raise ConfigError(f"unknown grid {args.grid!r} (have {sorted(SWEEP_GRIDS)})")
        if args.axis != args.grid:
            raise ConfigError(f"grid {args.grid!r} sweeps axis {args.grid!r}, not {args.axis!r}")
        values = list(SWEEP_GRIDS[args.grid])
    else:
        values = _parse_values(args.axis, args.values)
    seeds = _parse_seeds(args.seeds)
    windows = None
    if args.windows:
        windows = harness.parse_window_spec(args.windows, config.episodes)
    result = harness.sweep(config, args.axis, values, seeds, out_dir=config.out,
                           windows=windows, jobs=args.jobs)
    print(f"sweep {args.axis} over {values} x seeds {seeds} [{backend.backend_name()}]")
    for row in result.summary_rows:
        flag = f"  ({row['flag']})" if row["flag"] else ""
        print(f"  {args.axis}={row['value']:g} {row['window']}: "
              f"mean {row['mean']:.6f} std {row['std']:.6f}{flag}")
    if result.summary_path:
        print(f"  summary {result.summary_path}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    rows = verification_report(n_samples=args.samples, n_instances=args.instances, seed=args.seed)
    fields = ("rule", "instance", "n_samples", "max_abs_z", "pass")
    lines = [",".join(fields)]
    for row in rows:
        lines.append(f"{row['rule']},{row['instance']},{row['n_samples']},"
                     f"{row['max_abs_z']:.9g},{str(row['pass']).lower()}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    failed = [r for r in rows if not r["pass"]]
    if failed:
        print(f"FAILED: {len(failed)} of {len(rows)} cells out of tolerance", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"all {len(rows)} cells within tolerance", file=sys.stderr)
    return EXIT_OK


def _cmd_plot(args) -> int:
    runs = [harness.read_metrics_csv(p) for p in args.metrics]
    series = series_from_runs(runs, max_points=args.max_points)
    write_svg(args.out, series, title=args.title)
    print(f"wrote {args.out} ({len(series)} series)")
    return EXIT_OK


def _cmd_report(args) -> int:
    runs = [harness.read_metrics_csv(p) for p in args.metrics]
    episodes = runs[0]["reward"].shape[0] if runs else 0
    if args.windows:
        windows = harness.parse_window_spec(args.windows, episodes)
    else:
        windows = harness.default_windows(episodes)
    rows = harness.window_report(runs, windows)
    text = harness.report_csv_text(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_bench(args) -> int:
    config = _config_from_args(args)
    rows = harness.bench_backends(config, n_batches=args.batches)
    print(f"kernel benchmark: {config.config_id()}, {args.batches} batches of {config.batch_size}")
    for row in rows:
        print(f"  {row['backend']:>6}: {row['seconds']:.3f} s "
              f"({row['us_per_episode']:.2f} us/episode)")
    if len(rows) == 2:
        print(f"  speedup: {rows[0]['seconds'] / rows[1]['seconds']:.2f}x")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coordex",
        description="Coordinated exploration for teams of Bernoulli-logistic units "
                    "on the k-bit multiplexer task.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train one policy and write metrics")
    _add_config_flags(p)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("sweep", help="grid of runs over one axis x seeds")
    _add_config_flags(p)
    p.add_argument("--axis", required=True, choices=sorted(harness.AXIS_FIELDS))
    p.add_argument("--values", help="comma-separated axis values")
    p.add_argument("--grid", help="named value grid: " + ", ".join(sorted(SWEEP_GRIDS)))
    p.add_argument("--seeds", default="0", help="comma-separated seeds (default 0)")
    p.add_argument("--windows", help="window spec name=start:end,... (default quarters)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("oracle", help="Monte Carlo vs analytic-gradient battery")
    p.add_argument("--samples", type=int, default=100_000, help="episodes per cell")
    p.add_argument("--instances", type=int, default=3, help="random instances per rule")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report CSV here instead of stdout")
    p.set_defaults(fn=_cmd_oracle)

    p = sub.add_parser("plot", help="SVG learning curves from metrics CSVs")
    p.add_argument("metrics", nargs="+", help="metrics CSV paths")
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--title", default="")
    p.add_argument("--max-points", type=int, dest="max_points", default=1200)
    p.set_defaults(fn=_cmd_plot)

    p = sub.add_parser("report", help="window means across seeds from metrics CSVs")
    p.add_argument("metrics", nargs="+", help="metrics CSV paths")
    p.add_argument("--windows", help="window spec name=start:end,... (default quarters)")
    p.add_argument("--out", help="write the report CSV here instead of stdout")
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("bench", help="time the episode kernels of each backend")
    _add_config_flags(p)
    p.add_argument("--batches", type=int, default=200)
    p.set_defaults(fn=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
