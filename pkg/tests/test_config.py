import pytest

from bgprel.config import CONFIG_ENV, RunConfig, load_config, parse_config
from bgprel.errors import ConfigError


def test_defaults():
    cfg = RunConfig()
    assert (cfg.min_votes, cfg.backup_max_run_days, cfg.prepend_threshold) == (1, 5, 2)
    assert (cfg.dominance_ratio, cfg.proximity_abs, cfg.proximity_rel) == (4.0, 10, 0.05)
    assert 23456 in cfg.rejected and 65000 in cfg.rejected


def test_parse():
    cfg = parse_config("""
        # thresholds
        min-votes = 2
        dominance_ratio = 3.5   # looser
        corpus = a, b
        rejected-asns = 23456
    """)
    assert cfg.min_votes == 2 and cfg.dominance_ratio == 3.5
    assert cfg.corpus == ["a", "b"]
    assert 65000 not in cfg.rejected


@pytest.mark.parametrize("text", ["bogus = 1", "min-votes = x", "min-votes", "min-votes = 0",
                                  "workers = 0", "rejected-asns = 9-1", "dominance-ratio = 1"])
def test_bad_config(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_hash_ignores_paths_and_workers():
    base = RunConfig()
    assert base.config_hash() == base.replace(workers=8, corpus=["x"], output="y").config_hash()
    assert base.config_hash() != base.replace(min_votes=2).config_hash()
    assert len(base.config_hash()) == 16


def test_load_from_env(tmp_path, monkeypatch):
    path = tmp_path / "run.conf"
    path.write_text("prepend-threshold = 3\n")
    monkeypatch.setenv(CONFIG_ENV, str(path))
    assert load_config().prepend_threshold == 3
    assert load_config(path).prepend_threshold == 3
    monkeypatch.delenv(CONFIG_ENV)
    assert load_config() == RunConfig()
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.conf")
