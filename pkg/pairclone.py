# System path setup
import os
import sys

ROOT = os.path.dirname(os.path.abspath(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

import argparse
import platform
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy
from loguru import logger

from core.errors import ConfigError, DiagnosticsError, PairCloneError
from core.likelihood import ReadCounts, residuals, split_snv_rows
from core.priors import hyper_fields
from engine import Config
from engine.registry import MODELS, PRESETS
from eval.diagnostics import (
    BANDWIDTH_RULE,
    JointSetting,
    Statistic,
    default_statistics,
    export_traces,
    geweke_convergence,
    geweke_joint,
    residual_histogram,
    statistic_trace,
)
from eval.estimate import (
    PointEstimate,
    map_estimate,
    posterior_mode,
    posterior_of_C,
    posterior_of_tree,
    select_point_estimate,
    tree_mode,
    z_distance,
)
from mcmc.fit import PosteriorSamples, SamplerConfig, run_fit
from model.base import SubcloneModel
from simulate.generator import Truth, generate
from tools.data import (
    load_data,
    read_index,
    write_c_posterior,
    write_counts,
    write_index,
    write_rho,
    write_snv,
    write_tree_posterior,
    write_truth,
    write_weights,
    write_z,
    write_z_snv,
)
from tools.defaults import apply_defaults, get_file_paths, get_pairclone_defaults, get_worker_count, setup_output_dir
from tools.env_utils import get_log_level, load_environment
from tools.utils import file_sha256, generate_config_signature, read_json, to_builtin, write_json

__version__ = "0.1.0"

INPUT_KEYS = {"model", "counts", "snv", "preset", "preset_args", "purity"}
JOINT_KEYS = {"T", "K", "L", "n_range", "v_missing", "prior_mean", "prior_draws", "replicates"}
GEWEKE_KEYS = JOINT_KEYS | {"model", "C", "tree", "statistics", "purity"}


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON config file")
    common.add_argument("--out-dir", help="Output directory (default: <result folder>/<run name>)")
    common.add_argument("--seed", type=int, help="Random seed")
    common.add_argument("--workers", type=int, help="Worker threads (default: PAIRCLONE_NUM_WORKERS)")
    common.add_argument("--quiet", action="store_true", help="Hide progress bars")

    sampling = argparse.ArgumentParser(add_help=False)
    sampling.add_argument("--counts", help="Counts TSV")
    sampling.add_argument("--snv", help="Marginal SNV TSV, appended after the pairs")
    sampling.add_argument("--preset", help="Fit data generated from a simulation preset")
    sampling.add_argument("--iters", type=int)
    sampling.add_argument("--burnin", type=int)
    sampling.add_argument("--thin", type=int)
    sampling.add_argument("--cmin", type=int)
    sampling.add_argument("--cmax", type=int)
    split = sampling.add_mutually_exclusive_group()
    split.add_argument("--train-frac", type=float, help="Training fraction b")
    split.add_argument("--test-target", type=float, help="Reads in the test part, divided by T")

    parser = argparse.ArgumentParser(
        prog="pairclone",
        description="Subclone reconstruction from mutation-pair read counts",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", parents=[common, sampling], help="Fit the flat model")
    fit.add_argument("--purity", action="store_true", help="Add a mutation-free normal subclone")
    sub.add_parser("fit-tree", parents=[common, sampling], help="Fit the tree model")

    simulate = sub.add_parser("simulate", parents=[common], help="Write a synthetic dataset")
    simulate.add_argument("--preset", help="Registered preset name")

    geweke = sub.add_parser("geweke", parents=[common], help="Joint-distribution sampler test")
    geweke.add_argument("--iters", type=int, help="Simulator cycles L")
    geweke.add_argument("--purity", action="store_true")

    summarize = sub.add_parser("summarize", help="Recompute summaries of a finished run")
    summarize.add_argument("--out-dir", required=True, help="Directory of the finished run")
    summarize.add_argument("--workers", type=int)
    summarize.add_argument("--quiet", action="store_true")
    return parser


def setup_logging(out_dir: Optional[str] = None) -> List[int]:
    """Replace loguru's sinks with stderr and, when given, <out_dir>/run.log."""
    logger.remove()
    sinks = [logger.add(sys.stderr, level=get_log_level())]
    if out_dir:
        path = get_file_paths(out_dir)["log"]
        sinks.append(logger.add(path, level="DEBUG", mode="w", encoding="utf-8"))
    return sinks


def load_config(path: Optional[str]) -> Config:
    return Config.fromfile(path) if path else Config()


def versions() -> Dict[str, str]:
    return {
        "pairclone": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


# ---------------------------------------------------------------------------
# Settings
# ---------------------------------------------------------------------------


def resolve_model(
    cfg: Config, model_name: str, cli_sampler: Dict[str, Any], cli_hyper: Dict[str, Any], extra_keys=()
) -> Tuple[SubcloneModel, SamplerConfig, Dict[str, Any]]:
    """Build the model and sampler settings from defaults, metafile, config file and flags."""
    model_cls = MODELS.get(model_name)
    if model_cls is None:
        raise ConfigError(f"Unknown model '{model_name}'. Available: {MODELS.list_modules()}")
    sampler_keys = set(SamplerConfig.keys())
    hyper_keys = hyper_fields(model_cls.hyper_cls)
    cfg.validate_keys(sampler_keys | hyper_keys | set(extra_keys))

    base = dict(get_pairclone_defaults()["sampler"])
    base.update(model_cls.sampler_defaults)
    sampler_values = apply_defaults(cfg.pick(sampler_keys), cli_sampler, base)
    sampler_values["model"] = model_name
    sampler = SamplerConfig.from_dict(sampler_values)

    # "b" is a sampler setting when given in a config file
    hyper = apply_defaults(cfg.pick(hyper_keys - sampler_keys), cli_hyper, base={})
    model = MODELS.build(
        {
            "type": model_name,
            "hyper": hyper,
            "theta_step": sampler.theta_step,
            "rho_step": sampler.rho_step,
            "jacobian": sampler.jacobian,
        }
    )
    return model, sampler, hyper


def pick_model_name(cfg: Config, command: str, purity: bool) -> str:
    if command == "fit-tree":
        if purity or cfg.get("purity"):
            raise ConfigError("The tree model already has a normal clone; 'purity' does not apply")
        return "tree"
    name = cfg.get("model", "flat")
    if purity or cfg.get("purity"):
        if name not in ("flat", "flat_purity"):
            raise ConfigError(f"'purity' needs the flat model, config names '{name}'")
        return "flat_purity"
    return name


def build_spec(preset: str, preset_args: Optional[dict], seed: Optional[int]):
    if PRESETS.get(preset) is None:
        raise ConfigError(f"Unknown preset '{preset}'. Available: {PRESETS.list_modules()}")
    cfg = dict(preset_args or {})
    cfg.update(type=preset, seed=seed if seed is not None else cfg.get("seed", 0))
    return PRESETS.build(cfg)


def load_inputs(args, cfg: Config) -> Tuple[ReadCounts, int, Optional[Truth], Dict[str, Any]]:
    """Counts from files or from a preset, with what the manifest should record about them."""
    counts_path = apply_defaults({"counts": cfg.get("counts")}, {"counts": args.counts}, base={})["counts"]
    snv_path = apply_defaults({"snv": cfg.get("snv")}, {"snv": args.snv}, base={})["snv"]
    preset = apply_defaults({"preset": cfg.get("preset")}, {"preset": args.preset}, base={})["preset"]

    if counts_path and preset:
        raise ConfigError("Give either counts files or a preset, not both")
    if counts_path:
        counts, k_pairs = load_data(counts_path, snv_path)
        inputs = {"counts": {"path": counts_path, "sha256": file_sha256(counts_path)}}
        if snv_path:
            inputs["snv"] = {"path": snv_path, "sha256": file_sha256(snv_path)}
        return counts, k_pairs, None, inputs
    if preset:
        data_seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        spec = build_spec(preset, cfg.get("preset_args"), data_seed)
        counts, truth = generate(spec)
        inputs = {"preset": preset, "preset_args": cfg.get("preset_args") or {}, "data_seed": data_seed}
        return counts, truth.k_pairs, truth, inputs
    raise ConfigError("No input data: pass --counts (and optionally --snv) or --preset")


def write_manifest(path: str, command: str, settings: Dict[str, Any], seed: int, **fields) -> None:
    manifest = {
        "command": command,
        "config": to_builtin(settings),
        "config_signature": generate_config_signature(to_builtin(settings)),
        "seed": seed,
        "versions": versions(),
    }
    manifest.update(to_builtin(fields))
    write_json(path, manifest)


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------


def summarize_samples(
    samples: PosteriorSamples,
    paths: Dict[str, str],
    sample_ids: List[str],
    row_ids: List[str],
    k_pairs: int,
    max_pairwise: int = 2000,
    num_workers: int = 1,
    disable_progress: bool = False,
) -> Tuple[PointEstimate, int]:
    """Write the posterior tables and point estimates of a set of draws."""
    c_table = posterior_of_C(samples)
    write_c_posterior(paths["c_posterior"], c_table)
    logger.info("Posterior of C:\n{}", pd.DataFrame({"C": list(c_table), "p": list(c_table.values())}).to_string(index=False))

    if samples.is_tree:
        rows = posterior_of_tree(samples, top=3)
        write_tree_posterior(paths["tree_posterior"], rows)
        for tree, C, prob in rows:
            logger.info("Tree {} (C={}): {:.3f}", "-".join(map(str, tree)), C, prob)
        tree_hat, C_hat = tree_mode(samples)
        estimate = map_estimate(samples, C_hat, tree_hat)
    else:
        C_hat = posterior_mode(c_table)
        estimate = select_point_estimate(samples, C_hat, max_pairwise, num_workers, disable_progress)
    logger.info("Point estimate: draw {} at C={}", estimate.index, C_hat)

    Z_pairs, z_snv = split_snv_rows(estimate.Z, k_pairs, samples.ordering)
    write_z(paths["z_hat"], Z_pairs, row_ids[:k_pairs])
    if k_pairs < len(row_ids):
        write_z_snv(paths["z_snv_hat"], z_snv, row_ids[k_pairs:])
    write_weights(paths["w_hat"], estimate.w, sample_ids, estimate.w_star)
    write_rho(paths["rho_hat"], estimate.rho)
    return estimate, C_hat


def check_convergence(
    samples: PosteriorSamples, log_post: np.ndarray, C_hat: int, T: int, K: int, out_dir: str, seed: int
) -> pd.DataFrame:
    """Split-chain z-scores of the cold-chain log posterior and a few statistics at C_hat."""
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[2])
    statistics = default_statistics(T, K, C_hat, rng)
    traces = {"log_post": log_post}
    for s in statistics:
        traces[s.name] = statistic_trace(samples, s, C_hat)[1]

    rows = []
    for name, trace in traces.items():
        try:
            test = geweke_convergence(trace, name=name)
        except DiagnosticsError as e:
            logger.warning("Convergence check of {} skipped: {}", name, e)
            continue
        rows.append({"statistic": name, "draws": len(trace), "z": test.z, "p": test.p})

    export_traces(samples, statistics, os.path.join(out_dir, "traces"), C_hat)
    return pd.DataFrame(rows, columns=["statistic", "draws", "z", "p"])


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    model_name = pick_model_name(cfg, args.command, getattr(args, "purity", False))
    cli_sampler = {
        "seed": args.seed,
        "iters": args.iters,
        "burnin": args.burnin,
        "thin": args.thin,
        "b": args.train_frac,
        "test_target": args.test_target,
        "num_workers": args.workers,
    }
    cli_hyper = {"c_min": args.cmin, "c_max": args.cmax}
    model, sampler, hyper = resolve_model(cfg, model_name, cli_sampler, cli_hyper, INPUT_KEYS)
    sampler.num_workers = get_worker_count(sampler.num_workers)

    counts, k_pairs, truth, inputs = load_inputs(args, cfg)
    settings = {"sampler": sampler.to_dict(), "hyper": model.hyper.to_dict()}
    run_name = f"{args.command}_{generate_config_signature({**settings, 'inputs': inputs})}"
    out_dir = setup_output_dir(args.out_dir, run_name)
    setup_logging(out_dir)
    paths = get_file_paths(out_dir)
    logger.info("Writing results to {}", out_dir)

    write_index(paths["index"], counts, k_pairs)
    if truth is not None:
        write_counts(paths["counts"], counts, k_pairs)
        if k_pairs < counts.K:
            write_snv(paths["snv"], counts, k_pairs)
        write_truth(paths, truth, counts)

    result = run_fit(counts, model, sampler, disable_progress=args.quiet)
    result.samples.save(paths["samples"])
    result.write_telemetry(out_dir)

    estimate, C_hat = summarize_samples(
        result.samples,
        paths,
        counts.sample_ids,
        counts.pair_ids,
        k_pairs,
        sampler.max_pairwise,
        sampler.num_workers,
        args.quiet,
    )
    resid = residuals(counts, estimate.Z, estimate.w, estimate.rho, model.ordering, estimate.w_star)
    residual_histogram(resid).to_csv(paths["residual_histogram"], index=False)
    logger.info("Mean |residual| = {:.4f}", float(np.nanmean(np.abs(resid))))

    convergence = check_convergence(
        result.samples, result.log_post_trace[:, -1], C_hat, counts.T, counts.K, out_dir, sampler.seed
    )
    convergence.to_csv(paths["convergence"], index=False)

    extra = {}
    if truth is not None and truth.C == estimate.Z.shape[1]:
        extra["truth_z_distance"] = z_distance(estimate.Z, truth.Z, model.ordering)
        logger.info("Distance to the simulation truth: {}", extra["truth_z_distance"])

    write_manifest(
        paths["manifest"],
        args.command,
        settings,
        sampler.seed,
        model=model.name,
        ordering=model.ordering,
        inputs=inputs,
        k_pairs=k_pairs,
        b=result.b,
        C_hat=C_hat,
        spectral_density=BANDWIDTH_RULE,
        **extra,
    )
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    cfg.validate_keys({"preset", "preset_args", "seed"})
    preset = apply_defaults({"preset": cfg.get("preset")}, {"preset": args.preset}, base={})["preset"]
    if not preset:
        raise ConfigError(f"simulate needs --preset, one of {PRESETS.list_modules()}")
    seed = apply_defaults({"seed": cfg.get("seed")}, {"seed": args.seed}, base={"seed": 0})["seed"]
    preset_args = cfg.get("preset_args") or {}

    spec = build_spec(preset, preset_args, seed)
    settings = {"preset": preset, "preset_args": preset_args}
    out_dir = setup_output_dir(args.out_dir, f"simulate_{preset}_{seed}")
    setup_logging(out_dir)
    paths = get_file_paths(out_dir)

    counts, truth = generate(spec)
    write_counts(paths["counts"], counts, truth.k_pairs)
    if truth.k_pairs < counts.K:
        write_snv(paths["snv"], counts, truth.k_pairs)
    write_index(paths["index"], counts, truth.k_pairs)
    write_truth(paths, truth, counts)
    write_manifest(
        paths["manifest"], "simulate", settings, seed, ordering=truth.ordering, k_pairs=truth.k_pairs
    )
    logger.info("Wrote {} samples x {} rows to {}", counts.T, counts.K, out_dir)
    return 0


def joint_setting(cfg: Config, model: SubcloneModel, L: Optional[int]) -> JointSetting:
    values = cfg.pick(JOINT_KEYS)
    if L is not None:
        values["L"] = L
    if "n_range" in values:
        values["n_range"] = tuple(values["n_range"])
    if model.name == "tree":
        if cfg.get("tree") is None:
            raise ConfigError("The tree model's joint test needs a fixed 'tree'")
        tree = tuple(cfg["tree"])
        values["key"] = (tree, len(tree))
    else:
        values["key"] = int(cfg.get("C", 3))
    return JointSetting(**values)


def cmd_geweke(args) -> int:
    cfg = load_config(args.config)
    model_name = "flat_purity" if args.purity or cfg.get("purity") else cfg.get("model", "flat")
    cli_sampler = {"seed": args.seed, "num_workers": args.workers}
    model, sampler, hyper = resolve_model(cfg, model_name, cli_sampler, {}, GEWEKE_KEYS)
    setting = joint_setting(cfg, model, args.iters)
    statistics = [Statistic.parse(s) for s in cfg["statistics"]] if cfg.get("statistics") else None

    settings = {"sampler": sampler.to_dict(), "hyper": model.hyper.to_dict(), "joint": setting.__dict__}
    out_dir = setup_output_dir(args.out_dir, f"geweke_{generate_config_signature(to_builtin(settings))}")
    setup_logging(out_dir)
    paths = get_file_paths(out_dir)

    result = geweke_joint(
        model,
        setting,
        statistics,
        seed=sampler.seed,
        num_workers=get_worker_count(sampler.num_workers, setting.replicates),
        disable_progress=args.quiet,
    )
    table = result.table()
    table.to_csv(paths["geweke"], index=False)
    summary = table.to_string(index=False)
    with open(paths["geweke_summary"], "w", encoding="utf-8") as fp:
        fp.write(f"model={model.name} key={setting.key} L={setting.L} replicates={setting.replicates}\n")
        fp.write(f"spectral density: {BANDWIDTH_RULE}\n\n{summary}\n")
    logger.info("Joint test:\n{}", summary)

    write_manifest(
        paths["manifest"], "geweke", settings, sampler.seed, model=model.name, ordering=model.ordering,
        spectral_density=BANDWIDTH_RULE,
    )
    return 0


def cmd_summarize(args) -> int:
    setup_logging(args.out_dir)
    paths = get_file_paths(args.out_dir)
    manifest = read_json(paths["manifest"])
    if manifest.get("command") not in ("fit", "fit-tree"):
        raise ConfigError(f"{args.out_dir} does not hold a fit run")

    samples = PosteriorSamples.load(paths["samples"], manifest["model"], manifest["ordering"])
    sample_ids, row_ids, k_pairs = read_index(paths["index"])
    sampler = manifest["config"]["sampler"]
    summarize_samples(
        samples,
        paths,
        sample_ids,
        row_ids,
        k_pairs,
        sampler.get("max_pairwise", 2000),
        get_worker_count(args.workers or sampler.get("num_workers")),
        args.quiet,
    )
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "fit-tree": cmd_fit,
    "simulate": cmd_simulate,
    "geweke": cmd_geweke,
    "summarize": cmd_summarize,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code is None else int(e.code)

    load_environment()
    setup_logging()
    try:
        return COMMANDS[args.command](args)
    except PairCloneError as e:
        logger.error("{}: {}", type(e).__name__, e)
        return e.exit_code
    except Exception:
        logger.exception("Unexpected failure")
        return 4
    finally:
        setup_logging()


if __name__ == "__main__":
    sys.exit(main())
