import os

import pandas as pd
import pytest

import pairclone
from tools.utils import read_json


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_version_and_usage_errors(tmp_path):
    assert pairclone.main(["--version"]) == 0
    assert pairclone.main([]) == 2
    assert pairclone.main(["fit", "--train-frac", "0.9", "--test-target", "10"]) == 2
    assert pairclone.main(["fit-tree", "--purity"]) == 2
    assert pairclone.main(["summarize"]) == 2


def test_fit_input_errors(tmp_path):
    out = str(tmp_path / "out")
    assert pairclone.main(["fit", "--counts", str(tmp_path / "missing.tsv"), "--out-dir", out]) == 3
    assert pairclone.main(["fit", "--out-dir", out]) == 2
    assert pairclone.main(["fit", "--preset", "sim9", "--out-dir", out]) == 2

    bad_key = _write(tmp_path / "bad.yml", "preset: sim1\niterations: 10\n")
    assert pairclone.main(["fit", "--config", bad_key, "--out-dir", out]) == 2

    tree_purity = _write(tmp_path / "tree.yml", "preset: tree_sim1\npurity: true\n")
    assert pairclone.main(["fit-tree", "--config", tree_purity, "--out-dir", out]) == 2


def test_simulate_is_reproducible(tmp_path):
    first, second = str(tmp_path / "a"), str(tmp_path / "b")
    for out in (first, second):
        assert pairclone.main(["simulate", "--preset", "sim1", "--seed", "5", "--out-dir", out]) == 0

    for name in ("counts.tsv", "index.csv", "z_true.csv", "w_true.csv", "rho_true.csv", "manifest.json"):
        with open(os.path.join(first, name), "rb") as a, open(os.path.join(second, name), "rb") as b:
            assert a.read() == b.read(), name

    counts = pd.read_csv(os.path.join(first, "counts.tsv"), sep="\t")
    assert len(counts) == 40
    manifest = read_json(os.path.join(first, "manifest.json"))
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 5


def test_simulate_needs_preset(tmp_path):
    assert pairclone.main(["simulate", "--out-dir", str(tmp_path)]) == 2


def test_fit_then_summarize(tmp_path):
    config = _write(
        tmp_path / "fit.yml",
        "\n".join(
            [
                "preset: sim1",
                "preset_args:",
                "  K: 12",
                "seed: 3",
                "iters: 40",
                "burnin: 10",
                "thin: 2",
                "temps: [2.0, 1.0]",
                "candidate_warmup: 3",
                "c_max: 3",
            ]
        ),
    )
    out = str(tmp_path / "fit")
    assert pairclone.main(["fit", "--config", config, "--out-dir", out, "--quiet"]) == 0

    for name in (
        "manifest.json",
        "samples.jsonl",
        "run.log",
        "counts.tsv",
        "index.csv",
        "z_true.csv",
        "z_hat.csv",
        "w_hat.csv",
        "rho_hat.csv",
        "c_posterior.csv",
        "acceptance.csv",
        "swap_rates.csv",
        "transdim.csv",
        "residual_histogram.csv",
        "convergence.csv",
    ):
        assert os.path.exists(os.path.join(out, name)), name

    manifest = read_json(os.path.join(out, "manifest.json"))
    assert manifest["model"] == "flat"
    assert manifest["config"]["sampler"]["iters"] == 40
    assert manifest["config"]["hyper"]["c_max"] == 3
    assert 1 <= manifest["C_hat"] <= 3
    assert 0 < manifest["b"] < 1

    z_hat = pd.read_csv(os.path.join(out, "z_hat.csv"))
    assert len(z_hat) == 12
    assert len(z_hat.columns) == manifest["C_hat"] + 1

    os.remove(os.path.join(out, "z_hat.csv"))
    assert pairclone.main(["summarize", "--out-dir", out, "--quiet"]) == 0
    assert pd.read_csv(os.path.join(out, "z_hat.csv")).equals(z_hat)


def test_summarize_refuses_other_runs(tmp_path):
    out = str(tmp_path / "sim")
    assert pairclone.main(["simulate", "--preset", "sim1", "--out-dir", out]) == 0
    assert pairclone.main(["summarize", "--out-dir", out]) == 2


def test_geweke_command(tmp_path):
    config = _write(
        tmp_path / "geweke.yml",
        "\n".join(["model: flat", "seed: 1", "T: 2", "K: 5", "C: 2", "L: 150", "n_range: [20, 30]"]),
    )
    out = str(tmp_path / "geweke")
    assert pairclone.main(["geweke", "--config", config, "--out-dir", out, "--quiet"]) == 0

    table = pd.read_csv(os.path.join(out, "geweke.csv"))
    assert {"statistic", "z", "p"} <= set(table.columns)
    assert len(table) > 0
    assert "L=150" in open(os.path.join(out, "geweke_summary.txt")).read()


def test_tree_geweke_needs_topology(tmp_path):
    config = _write(tmp_path / "g.yml", "model: tree\nL: 150\n")
    assert pairclone.main(["geweke", "--config", config, "--out-dir", str(tmp_path / "g")]) == 2
