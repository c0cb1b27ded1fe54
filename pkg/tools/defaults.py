"""
Default values and output file names used by pairclone.py
"""

import os
from typing import Any, Dict, Optional

from loguru import logger

from mcmc.fit import SamplerConfig
from tools.env_utils import get_num_workers, get_result_folder


def get_pairclone_defaults() -> Dict[str, Any]:
    """
    Built-in defaults, the lowest layer under model metafiles, config files and flags

    Returns:
        Dict: sampler defaults, result folder and output file names
    """
    return {
        "sampler": SamplerConfig().to_dict(),
        "default_result_folder": get_result_folder(),
        "file_names": {
            "manifest": "manifest.json",
            "samples": "samples.jsonl",
            "log": "run.log",
            "counts": "counts.tsv",
            "snv": "snv.tsv",
            "index": "index.csv",
            "z_hat": "z_hat.csv",
            "w_hat": "w_hat.csv",
            "rho_hat": "rho_hat.csv",
            "z_snv_hat": "z_snv_hat.csv",
            "c_posterior": "c_posterior.csv",
            "tree_posterior": "tree_posterior.csv",
            "acceptance": "acceptance.csv",
            "swap_rates": "swap_rates.csv",
            "transdim": "transdim.csv",
            "log_posterior_trace": "log_posterior_trace.csv",
            "residual_histogram": "residual_histogram.csv",
            "convergence": "convergence.csv",
            "z_true": "z_true.csv",
            "w_true": "w_true.csv",
            "rho_true": "rho_true.csv",
            "tree_true": "tree_true.txt",
            "geweke": "geweke.csv",
            "geweke_summary": "geweke_summary.txt",
        },
    }


def apply_defaults(
    config: Optional[Dict[str, Any]] = None,
    cli: Optional[Dict[str, Any]] = None,
    base: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """
    Layer settings: base < config file < command line

    A command-line value that replaces a different config-file value is
    reported with a warning. ``None`` on the command line means "not given".

    Args:
        config: values read from the config file
        cli: values taken from command-line flags
        base: lower layers, the built-in sampler defaults when omitted

    Returns:
        Dict: merged settings
    """
    final = dict(get_pairclone_defaults()["sampler"] if base is None else base)
    config = dict(config or {})
    final.update(config)

    for key, value in (cli or {}).items():
        if value is None:
            continue
        if key in config and config[key] != value:
            logger.warning(
                "Command line sets {}={!r}, overriding {!r} from the config file",
                key,
                value,
                config[key],
            )
        final[key] = value

    return final


def setup_output_dir(out_dir: Optional[str], run_name: str) -> str:
    """
    Create the output directory, <result folder>/<run_name> when none is given
    """
    out_dir = out_dir or os.path.join(get_pairclone_defaults()["default_result_folder"], run_name)

    # a file path points at its directory
    if os.path.exists(out_dir) and not os.path.isdir(out_dir):
        out_dir = os.path.dirname(out_dir)

    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def get_file_paths(out_dir: str, file_names: Optional[Dict[str, str]] = None) -> Dict[str, str]:
    """
    Paths of every output file inside ``out_dir``
    """
    if file_names is None:
        file_names = get_pairclone_defaults()["file_names"]
    return {key: os.path.join(out_dir, name) for key, name in file_names.items()}


def get_worker_count(config_workers: Optional[int] = None, task_count: Optional[int] = None) -> int:
    """
    Worker count from the config, else PAIRCLONE_NUM_WORKERS, capped by CPUs and tasks
    """
    num_workers = config_workers or get_num_workers()

    max_workers = os.cpu_count() or 1
    if task_count:
        max_workers = min(max_workers, task_count)

    return max(1, min(num_workers, max_workers))
