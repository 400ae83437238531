import pytest

from coordex.config import (
    CONFIG_VERSION,
    PRESETS,
    SWEEP_GRIDS,
    ConfigError,
    RunConfig,
    build_config,
    config_file_text,
    env_overrides,
    parse_config_file,
)


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert cfg.algorithm == "alg1"
    assert cfg.k == 4 and cfg.n_hidden == 64 and cfg.gibbs_steps == 25
    assert cfg.alpha == 0.005 and cfg.batch_size == 16
    assert cfg.episodes == 4_000_000


@pytest.mark.parametrize(
    "kw",
    [
        {"algorithm": "reinforce"},
        {"centering": "none"},
        {"k": 0},
        {"n_hidden": 0},
        {"gibbs_steps": 0},
        {"c": -0.5},
        {"c": float("nan")},
        {"lam": 1.5},
        {"alpha": 0.0},
        {"batch_size": 0},
        {"episodes": 0},
        {"episodes": 100, "batch_size": 16},
        {"seed": -1},
        {"ma_window": 0},
        {"algorithm": "ste", "c": 0.5},
        {"algorithm": "indep-reinforce", "c": 0.1},
        {"algorithm": "alg1-negstats", "n_hidden": 32},
    ],
)
def test_validate_rejects(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw).validate()


def test_presets():
    assert PRESETS["paper"] == {"k": 4, "n_hidden": 64, "episodes": 4_000_000}
    assert PRESETS["desk"] == {"k": 2, "n_hidden": 16, "episodes": 200_000}
    cfg = build_config(preset="desk", flags={"c": 0.0, "algorithm": "ste"})
    assert cfg.k == 2 and cfg.n_hidden == 16 and cfg.episodes == 200_000
    with pytest.raises(ConfigError):
        build_config(preset="nope")


def test_sweep_grids_present():
    assert SWEEP_GRIDS["c"] == (0.0, 0.05, 0.10, 0.25, 0.40, 0.50, 0.75, 1.0)
    assert SWEEP_GRIDS["N"] == (8, 16, 32, 64, 96, 128)


def test_config_id_variants():
    assert RunConfig(k=2, n_hidden=16, c=0.25).config_id() == "alg1-k2-N16-T25-c0.25"
    cfg = RunConfig(algorithm="alg2", lam=0.5, update_recurrent_diagonal=False)
    assert cfg.config_id().endswith("lam0.5-nodiag")
    cfg = RunConfig(algorithm="indep-reinforce", c=0.0, centering="one-sided-action")
    assert cfg.config_id().endswith("one-sided-action")
    assert RunConfig(algorithm="ste", c=0.0).config_id().endswith("-sp")
    assert RunConfig(algorithm="ste", c=0.0, ste_sigma_prime=False).config_id().endswith("-id")


def test_file_roundtrip(tmp_path):
    cfg = RunConfig(algorithm="alg2", k=2, n_hidden=8, episodes=3200, lam=0.125, timing=True)
    path = tmp_path / "run.cfg"
    path.write_text(config_file_text(cfg))
    overrides = parse_config_file(str(path))
    assert RunConfig(**overrides) == cfg


def test_file_errors(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("k = 2\n")  # no header
    with pytest.raises(ConfigError):
        parse_config_file(str(p))
    p.write_text(f"config_version = {CONFIG_VERSION + 1}\nk = 2\n")
    with pytest.raises(ConfigError):
        parse_config_file(str(p))
    p.write_text(f"config_version = {CONFIG_VERSION}\nnot_a_key = 2\n")
    with pytest.raises(ConfigError):
        parse_config_file(str(p))
    p.write_text(f"config_version = {CONFIG_VERSION}\nk 2\n")
    with pytest.raises(ConfigError):
        parse_config_file(str(p))
    p.write_text(f"config_version = {CONFIG_VERSION}\nk = two\n")
    with pytest.raises(ConfigError):
        parse_config_file(str(p))
    with pytest.raises(ConfigError):
        parse_config_file(str(tmp_path / "missing.cfg"))


def test_file_comments_and_blanks(tmp_path):
    p = tmp_path / "ok.cfg"
    p.write_text(f"# comment\nconfig_version = {CONFIG_VERSION}\n\nk = 3  # inline\n")
    assert parse_config_file(str(p)) == {"k": 3}


def test_env_overrides():
    env = {"COORDEX_K": "3", "COORDEX_TIMING": "true", "COORDEX_ALPHA": "0.01", "PATH": "/bin"}
    got = env_overrides(env)
    assert got == {"k": 3, "timing": True, "alpha": 0.01}
    with pytest.raises(ConfigError):
        env_overrides({"COORDEX_TIMING": "maybe"})


def test_precedence_chain(tmp_path):
    p = tmp_path / "file.cfg"
    p.write_text(f"config_version = {CONFIG_VERSION}\nk = 3\nn_hidden = 12\nepisodes = 4800\n")
    # preset < file < env < flags
    cfg = build_config(
        preset="desk",
        config_file=str(p),
        env={"n_hidden": 10, "seed": 5},
        flags={"seed": 9, "c": None},
    )
    assert cfg.k == 3  # file beats preset
    assert cfg.n_hidden == 10  # env beats file
    assert cfg.seed == 9  # flag beats env
    assert cfg.episodes == 4800
    assert cfg.c == 0.25  # None flags are ignored


def test_build_config_validates():
    with pytest.raises(ConfigError):
        build_config(flags={"algorithm": "ste", "c": 0.5})
