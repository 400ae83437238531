"""Run configuration: defaults, presets, file format, env and flag overrides.

Precedence, lowest to highest: field defaults, preset, config file, COORDEX_*
environment variables, CLI flags. Config files are flat `key = value` lines
with a mandatory `config_version` header; `#` starts a comment.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

CONFIG_VERSION = 1
ENV_PREFIX = "COORDEX_"

ALGORITHMS = ("indep-reinforce", "alg1", "alg1-negstats", "alg2", "ste")
CENTERINGS = ("two-sided", "one-sided-action", "one-sided-reward")

PRESETS = {
    "desk": {"k": 2, "n_hidden": 16, "episodes": 200_000},
    "paper": {"k": 4, "n_hidden": 64, "episodes": 4_000_000},
}

# Sweep grids matching the published protocol, available by name.
SWEEP_GRIDS = {
    "c": (0.0, 0.05, 0.10, 0.25, 0.40, 0.50, 0.75, 1.0),
    "N": (8, 16, 32, 64, 96, 128),
}


class ConfigError(Exception):
    """Invalid configuration; the CLI maps this to exit code 2."""


@dataclass
class RunConfig:
    """One training run. Defaults follow the published protocol."""

    algorithm: str = "alg1"
    centering: str = "two-sided"  # indep-reinforce only
    k: int = 4
    n_hidden: int = 64
    gibbs_steps: int = 25
    c: float = 0.25
    lam: float = 0.25  # trace decay, alg2 only
    alpha: float = 0.005
    batch_size: int = 16
    episodes: int = 4_000_000
    seed: int = 0
    critic_hidden: int = 64
    critic_alpha: float = 0.005
    update_recurrent_diagonal: bool = True
    ste_sigma_prime: bool = True
    ma_window: int = 10_000
    timing: bool = False
    out: str = "runs"

    def validate(self) -> "RunConfig":
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.centering not in CENTERINGS:
            raise ConfigError(f"centering must be one of {CENTERINGS}, got {self.centering!r}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.n_hidden < 1:
            raise ConfigError(f"n_hidden must be >= 1, got {self.n_hidden}")
        if self.gibbs_steps < 1:
            raise ConfigError(f"gibbs_steps must be >= 1, got {self.gibbs_steps}")
        if not self.c >= 0.0:
            raise ConfigError(f"c must be >= 0, got {self.c}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")
        if not self.alpha > 0.0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.episodes < 1:
            raise ConfigError(f"episodes must be >= 1, got {self.episodes}")
        if self.episodes % self.batch_size != 0:
            raise ConfigError(
                f"episodes ({self.episodes}) must be divisible by batch_size ({self.batch_size}) "
                "so every update averages a full batch"
            )
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.critic_hidden < 1 or not self.critic_alpha > 0.0:
            raise ConfigError("critic_hidden must be >= 1 and critic_alpha > 0")
        if self.ma_window < 1:
            raise ConfigError(f"ma_window must be >= 1, got {self.ma_window}")
        if self.algorithm in ("ste", "indep-reinforce") and self.c != 0.0:
            raise ConfigError(f"{self.algorithm} has no recurrent coupling; set c = 0 (got {self.c})")
        if self.algorithm == "alg1-negstats" and self.n_hidden > 20:
            raise ConfigError(
                f"alg1-negstats enumerates 2^n_hidden configurations per distinct state; "
                f"n_hidden={self.n_hidden} exceeds the limit of 20"
            )
        return self

    def config_id(self) -> str:
        """Compact identity string used in CSV rows and file names."""
        parts = [self.algorithm, f"k{self.k}", f"N{self.n_hidden}", f"T{self.gibbs_steps}", f"c{self.c:g}"]
        if self.algorithm == "alg2":
            parts.append(f"lam{self.lam:g}")
            if not self.update_recurrent_diagonal:
                parts.append("nodiag")
        if self.algorithm == "indep-reinforce":
            parts.append(self.centering)
        if self.algorithm == "ste":
            parts.append("sp" if self.ste_sigma_prime else "id")
        return "-".join(parts)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, text: str):
    field = _FIELDS[name]
    text = text.strip()
    if field.type in ("bool", bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name} expects a boolean, got {text!r}")
    try:
        if field.type in ("int", int):
            return int(text)
        if field.type in ("float", float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{name} expects a {field.type}, got {text!r}") from None
    return text


def parse_config_file(path: str) -> dict:
    """Read `key = value` lines into a field dict; header must be present."""
    overrides = {}
    version = None
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key == "config_version":
            try:
                version = int(value.strip())
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: config_version must be an integer") from None
            continue
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        overrides[key] = _coerce(key, value)
    if version is None:
        raise ConfigError(f"{path}: missing config_version header")
    if version != CONFIG_VERSION:
        raise ConfigError(f"{path}: config_version {version} unsupported (expected {CONFIG_VERSION})")
    return overrides


def config_file_text(config: RunConfig) -> str:
    """Serialize a config in the file format, header first, field order fixed."""
    lines = [f"config_version = {CONFIG_VERSION}"]
    for f in dataclasses.fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def env_overrides(environ=None) -> dict:
    """Collect COORDEX_<FIELD> overrides from the environment."""
    environ = os.environ if environ is None else environ
    found = {}
    for name in _FIELDS:
        key = ENV_PREFIX + name.upper()
        if key in environ:
            found[name] = _coerce(name, environ[key])
    return found


def build_config(
    preset: str | None = None,
    config_file: str | None = None,
    env: dict | None = None,
    flags: dict | None = None,
) -> RunConfig:
    """Layer the override sources in precedence order and validate."""
    merged: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r} (have {sorted(PRESETS)})")
        merged.update(PRESETS[preset])
    if config_file is not None:
        merged.update(parse_config_file(config_file))
    merged.update(env_overrides() if env is None else env)
    if flags:
        merged.update({k: v for k, v in flags.items() if v is not None})
    return RunConfig(**merged).validate()
