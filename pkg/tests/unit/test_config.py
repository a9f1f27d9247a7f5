import pytest
import yaml

from prime_lab import config as lab_config


def test_shipped_defaults_match_builtin():
    config = lab_config.load_config()
    assert config == lab_config.DEFAULTS


def test_overlay_merges_sections(tmp_path):
    overlay = tmp_path / "overlay.yaml"
    overlay.write_text(yaml.safe_dump({"sieve": {"limit": 5000}, "levin": {"machine": "u2"}}))
    config = lab_config.load_config(str(overlay))
    assert config["sieve"]["limit"] == 5000
    assert config["sieve"]["segment_size"] == 1 << 20
    assert config["levin"]["machine"] == "u2"
    assert config["levin"]["max_len"] == 20


def test_overlay_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        lab_config.load_config(str(tmp_path / "missing.yaml"))
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n")
    with pytest.raises(ValueError):
        lab_config.load_config(str(listing))


def test_cli_overrides_win_when_given():
    config = lab_config.load_config()
    cfg = lab_config.build_run_config("ek", config, {"limit": 1234, "bins": None, "ablate_bit0": None})
    assert cfg.limit == 1234
    assert cfg.bins == 41
    assert cfg.ablate_bit0 is False
    assert cfg.as_dict()["checkpoints"] == [100, 10_000, 1_000_000]
    assert "extra" not in cfg.as_dict()


def test_ek_checkpoints_end_at_limit():
    config = lab_config.load_config()
    assert lab_config.build_run_config("ek", config, {"limit": 50_000}).ek_checkpoints() == (100, 10_000, 50_000)
    assert lab_config.build_run_config("ek", config, {"limit": 10**6}).ek_checkpoints() == (100, 10_000, 10**6)
    assert lab_config.build_run_config("ek", config, {"limit": 50}).ek_checkpoints() == (50,)
