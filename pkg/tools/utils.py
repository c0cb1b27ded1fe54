import gzip
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, List

import numpy as np
import yaml
from loguru import logger

from tools.env_utils import get_env_var


def multi_process_function(
    function: Callable,
    parameters_per_node: List,
    num_workers: int = 1,
    desc: str = "Completing tasks",
) -> List[Any]:
    """
    Execute a function over a list of parameter sets with a thread pool.

    Results come back in submission order, so callers stay deterministic
    whatever the worker count.

    Args:
        function: The function to execute on each parameter set
        parameters_per_node: List of parameter sets to process
        num_workers: Number of worker threads to use
        desc: Description used in the debug log

    Returns:
        List of results, one per parameter set
    """
    if not parameters_per_node:
        return []
    num_workers = max(1, min(num_workers, len(parameters_per_node), os.cpu_count() or 1))
    if num_workers == 1:
        return [function(param) for param in parameters_per_node]

    logger.debug(f"{desc}: {len(parameters_per_node)} tasks on {num_workers} workers")
    with ThreadPoolExecutor(num_workers) as executor:
        futures = [executor.submit(function, param) for param in parameters_per_node]
        return [future.result() for future in futures]


def generate_config_signature(config_dict: dict, max_length: int = None) -> str:
    """
    Short sha256 signature of a configuration, used to name result folders.

    Args:
        config_dict: Configuration parameters dictionary
        max_length: Maximum length of generated signature

    Returns:
        Hex signature string
    """
    if max_length is None:
        max_length = get_env_var("CONFIG_SIGNATURE_MAX_LENGTH", "16", int)
    param_str = json.dumps(config_dict, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(param_str.encode("utf-8")).hexdigest()[:max_length]


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def to_builtin(obj):
    """Convert numpy scalars, arrays and tuples into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_builtin(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def read_jsonl(filename: str) -> List[Dict]:
    """
    Reads a jsonl file to list
    """
    return list(stream_jsonl(filename))


def stream_jsonl(filename: str) -> Iterable[Dict]:
    """
    Parses each jsonl line and yields it as a dictionary
    """
    if filename.endswith(".gz"):
        with open(filename, "rb") as gzfp:
            with gzip.open(gzfp, "rt") as fp:
                for line in fp:
                    if any(not x.isspace() for x in line):
                        yield json.loads(line)
    else:
        with open(filename, "r", encoding="utf-8") as fp:
            for line in fp:
                if any(not x.isspace() for x in line):
                    yield json.loads(line)


def write_jsonl(filename: str, data: Iterable[Dict], append: bool = False):
    """
    Writes an iterable of dictionaries to jsonl
    """
    mode = "ab" if append else "wb"
    filename = os.path.expanduser(filename)
    if filename.endswith(".gz"):
        with open(filename, mode) as fp:
            with gzip.GzipFile(fileobj=fp, mode="wb") as gzfp:
                for x in data:
                    gzfp.write((json.dumps(to_builtin(x)) + "\n").encode("utf-8"))
    else:
        with open(filename, mode) as fp:
            for x in data:
                fp.write((json.dumps(to_builtin(x)) + "\n").encode("utf-8"))


def write_json(filename: str, data: Dict):
    with open(filename, "w", encoding="utf-8") as fp:
        json.dump(to_builtin(data), fp, indent=2, sort_keys=False)


def read_json(filename: str) -> Dict:
    with open(filename, "r", encoding="utf-8") as fp:
        return json.load(fp)


def read_metafile(path):
    if os.path.isdir(path):
        path = os.path.join(path, "metafile.yml")
    if not os.path.exists(path):
        raise FileNotFoundError(f"metafile.yml is not found at {path}")
    with open(path, "r") as fp:
        info = yaml.safe_load(fp)
    return info or {}
