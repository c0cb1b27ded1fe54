import json
import os

import pytest

from core.errors import ConfigError
from engine.config import Config
from engine.registry import MODELS, PRESETS, Registry
from tools.defaults import (
    apply_defaults,
    get_file_paths,
    get_pairclone_defaults,
    get_worker_count,
    setup_output_dir,
)


def test_config_from_yaml(tmp_path):
    path = tmp_path / "run.yml"
    path.write_text("model: flat\nsampler:\n  iters: 100\n  thin: 2\n")
    cfg = Config.fromfile(path)
    assert cfg.model == "flat"
    assert cfg.sampler.iters == 100
    assert cfg.filename == str(path)
    assert "iters: 100" in cfg.text
    assert cfg.to_dict() == {"model": "flat", "sampler": {"iters": 100, "thin": 2}}


def test_config_from_json_and_empty_yaml(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 3}))
    assert Config.fromfile(path).seed == 3

    empty = tmp_path / "empty.yml"
    empty.write_text("")
    assert len(Config.fromfile(empty)) == 0


@pytest.mark.parametrize(
    "name, text",
    [
        ("run.toml", "seed = 1"),
        ("bad.yml", "sampler: [unclosed"),
        ("list.yml", "- 1\n- 2\n"),
        ("reserved.yml", "filename: x\n"),
    ],
)
def test_config_bad_files(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    with pytest.raises(ConfigError):
        Config.fromfile(path)


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        Config.fromfile(tmp_path / "nope.yml")


def test_missing_attribute_raises():
    cfg = Config({"sampler": {"iters": 10}})
    with pytest.raises(AttributeError):
        cfg.sampler.burnin
    assert cfg.get("seed", 5) == 5


def test_validate_keys(tmp_path):
    cfg = Config({"model": "flat", "iters": 10, "iterations": 3})
    cfg.validate_keys(["model", "iters", "iterations"])
    with pytest.raises(ConfigError, match="Unknown keys in config: \\['iterations'\\]"):
        cfg.validate_keys(["model", "iters"])

    path = tmp_path / "typo.yml"
    path.write_text("thinning: 3\n")
    with pytest.raises(ConfigError, match="typo.yml"):
        Config.fromfile(path).validate_keys(["thin"])


def test_pick_returns_plain_values():
    cfg = Config({"preset": "sim3", "preset_args": {"K": 40}, "n_range": [10, 20]})
    picked = cfg.pick(["preset_args", "n_range", "seed"])
    assert picked == {"preset_args": {"K": 40}, "n_range": [10, 20]}
    assert type(picked["preset_args"]) is dict
    assert cfg.get("preset_args") == {"K": 40}


def test_apply_defaults_layers():
    base = {"iters": 10, "burnin": 2, "thin": 1}
    merged = apply_defaults({"iters": 50, "thin": 5}, {"thin": 2, "burnin": None}, base)
    assert merged == {"iters": 50, "burnin": 2, "thin": 2}


def test_apply_defaults_builtin_base():
    merged = apply_defaults()
    assert merged == get_pairclone_defaults()["sampler"]
    assert merged["iters"] == 30000


def test_file_paths(tmp_path):
    paths = get_file_paths(str(tmp_path))
    assert paths["manifest"] == os.path.join(str(tmp_path), "manifest.json")
    assert paths["z_hat"].endswith("z_hat.csv")
    assert get_file_paths("out", {"a": "a.txt"}) == {"a": os.path.join("out", "a.txt")}


def test_setup_output_dir(tmp_path, monkeypatch):
    out = setup_output_dir(str(tmp_path / "run"), "ignored")
    assert os.path.isdir(out)

    monkeypatch.setenv("PAIRCLONE_RESULT_FOLDER", str(tmp_path / "results"))
    named = setup_output_dir(None, "fit_abc")
    assert named == os.path.join(str(tmp_path / "results"), "fit_abc")
    assert os.path.isdir(named)

    existing = tmp_path / "file.txt"
    existing.write_text("x")
    assert setup_output_dir(str(existing), "ignored") == str(tmp_path)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("PAIRCLONE_NUM_WORKERS", "3")
    assert get_worker_count(None, task_count=1) == 1
    assert get_worker_count(1) == 1
    assert 1 <= get_worker_count(None) <= 3

    monkeypatch.setenv("PAIRCLONE_NUM_WORKERS", "many")
    assert get_worker_count(None) == 1


def test_registry_lookup():
    assert MODELS.list_modules() == ["flat", "flat_purity", "tree"]
    assert "sim1" in PRESETS
    assert "tree" in MODELS
    assert "nested" not in MODELS


def test_registry_build_errors():
    with pytest.raises(ConfigError, match="'type'"):
        MODELS.build({"hyper": {}})
    with pytest.raises(ConfigError, match="not found"):
        MODELS.build({"type": "nested"})


def test_registry_duplicate_and_required():
    registry = Registry("toy")

    @registry.register_module("pair")
    def make_pair(first, second=2):
        return first, second

    with pytest.raises(KeyError):
        registry.register_module("pair")(make_pair)
    assert registry.build({"type": "pair", "first": 1, "third": 3}) == (1, 2)
    with pytest.raises(ConfigError, match="first"):
        registry.build({"type": "pair"})


def test_model_hyper_overrides():
    model = MODELS.build({"type": "flat", "hyper": {"c_max": 4, "r": 0.2}})
    assert model.hyper.c_max == 4
    assert model.hyper.r == 0.2
    assert model.hyper.alpha == 4.0
    assert model.ordering == "pairclone"
    assert MODELS.build({"type": "tree"}).ordering == "tree"


@pytest.mark.parametrize(
    "cfg",
    [
        {"type": "flat", "hyper": {"lam": 1.0}},
        {"type": "flat", "hyper": {"r": 1.5}},
        {"type": "tree", "hyper": {"alpha": 2.0}},
        {"type": "flat", "theta_step": 0.0},
        {"type": "flat", "ordering": "sorted"},
    ],
)
def test_model_bad_settings(cfg):
    with pytest.raises(ConfigError):
        MODELS.build(cfg)
