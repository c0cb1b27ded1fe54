"""
Tab-separated count files in, CSV result tables out.

Counts file columns: sample_id, pair_id, n00, n01, n10, n11, nm0, nm1, n0m, n1m.
SNV file columns: sample_id, snv_id, n_total, n_variant. Genotype codes are
written 1-based, as integers.
"""

import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from core.errors import DataError
from core.genotype import COUNT_COLUMNS, NUM_OUTCOMES, OUTCOME_LABELS
from core.likelihood import ReadCounts, embed_snv

SNV_COLUMNS = ("n_total", "n_variant")


def _read_table(path: str, columns: Sequence[str], what: str) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise DataError(f"{what} file not found: {path}")
    try:
        frame = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError as e:
        raise DataError(f"{what} file {path} is empty") from e
    except pd.errors.ParserError as e:
        raise DataError(f"Malformed {what} file {path}: {e}") from e

    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: header lacks columns {missing}")
    return frame


def _line(row: int) -> int:
    # header is line 1
    return row + 2


def _id_column(frame: pd.DataFrame, column: str, path: str) -> pd.Series:
    ids = frame[column].str.strip()
    empty = np.flatnonzero((ids == "").to_numpy())
    if empty.size:
        raise DataError(f"{path}, line {_line(int(empty[0]))}: empty '{column}'")
    return ids


def _count_matrix(frame: pd.DataFrame, columns: Sequence[str], path: str) -> np.ndarray:
    values = frame[list(columns)].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    with np.errstate(invalid="ignore"):
        bad = ~np.isfinite(values) | (values < 0) | (values != np.round(values))
    rows = np.flatnonzero(bad.any(axis=1))
    if rows.size:
        r = int(rows[0])
        column = columns[int(np.flatnonzero(bad[r])[0])]
        raise DataError(
            f"{path}, line {_line(r)}: '{column}' must be a nonnegative integer, "
            f"got {frame.iloc[r][column]!r}"
        )
    return values


def _check_duplicates(first: pd.Series, second: pd.Series, path: str) -> None:
    dup = pd.DataFrame({"a": first, "b": second}).duplicated(keep="first").to_numpy()
    if dup.any():
        r = int(np.flatnonzero(dup)[0])
        raise DataError(f"{path}, line {_line(r)}: duplicate entry ({first.iloc[r]}, {second.iloc[r]})")


def _dense(
    values: np.ndarray,
    sample_col: pd.Series,
    item_col: pd.Series,
    sample_ids: List[str],
    item_ids: List[str],
    path: str,
) -> np.ndarray:
    t_idx = pd.Index(sample_ids).get_indexer(sample_col)
    k_idx = pd.Index(item_ids).get_indexer(item_col)
    unknown = np.flatnonzero(t_idx < 0)
    if unknown.size:
        r = int(unknown[0])
        raise DataError(f"{path}, line {_line(r)}: unknown sample '{sample_col.iloc[r]}'")

    dense = np.zeros((len(sample_ids), len(item_ids), values.shape[1]))
    dense[t_idx, k_idx] = values
    present = np.zeros((len(sample_ids), len(item_ids)), dtype=bool)
    present[t_idx, k_idx] = True
    if not present.all():
        t, k = np.argwhere(~present)[0]
        logger.warning(
            "{} (sample, id) rows missing from {}, filled with zeros (first: {}, {})",
            int((~present).sum()),
            path,
            sample_ids[t],
            item_ids[k],
        )
    return dense


def parse_counts(path: str) -> ReadCounts:
    """Read a counts TSV into a dense (T, K, 8) array.

    Samples and pairs are indexed in order of first appearance.
    """
    frame = _read_table(path, ("sample_id", "pair_id") + COUNT_COLUMNS, "Counts")
    samples = _id_column(frame, "sample_id", path)
    pairs = _id_column(frame, "pair_id", path)
    values = _count_matrix(frame, COUNT_COLUMNS, path)
    _check_duplicates(samples, pairs, path)

    sample_ids = list(dict.fromkeys(samples))
    pair_ids = list(dict.fromkeys(pairs))
    n = _dense(values, samples, pairs, sample_ids, pair_ids, path)
    logger.info("Read {} samples x {} pairs from {}", len(sample_ids), len(pair_ids), path)
    return ReadCounts(n, sample_ids, pair_ids)


def parse_snv(path: str, sample_ids: Optional[List[str]] = None) -> ReadCounts:
    """Read an SNV TSV and embed each SNV as a pair with locus 2 unobserved.

    Args:
        path: SNV file
        sample_ids: sample order to follow, e.g. the one of the counts file

    Returns:
        ReadCounts: (T, S, 8) with reads in outcomes 0- and 1-
    """
    frame = _read_table(path, ("sample_id", "snv_id") + SNV_COLUMNS, "SNV")
    samples = _id_column(frame, "sample_id", path)
    snvs = _id_column(frame, "snv_id", path)
    values = _count_matrix(frame, SNV_COLUMNS, path)
    over = np.flatnonzero(values[:, 1] > values[:, 0])
    if over.size:
        raise DataError(f"{path}, line {_line(int(over[0]))}: n_variant exceeds n_total")
    _check_duplicates(samples, snvs, path)

    sample_ids = list(sample_ids) if sample_ids is not None else list(dict.fromkeys(samples))
    snv_ids = list(dict.fromkeys(snvs))
    dense = _dense(values, samples, snvs, sample_ids, snv_ids, path)
    logger.info("Read {} SNVs from {}", len(snv_ids), path)
    return ReadCounts(embed_snv(dense[..., 0], dense[..., 1]), sample_ids, snv_ids)


def load_data(counts_path: str, snv_path: Optional[str] = None) -> Tuple[ReadCounts, int]:
    """Pairs followed by embedded SNVs, and the number of pair rows."""
    counts = parse_counts(counts_path)
    k_pairs = counts.K
    if snv_path:
        snv = parse_snv(snv_path, counts.sample_ids)
        clash = sorted(set(snv.pair_ids) & set(counts.pair_ids))
        if clash:
            raise DataError(f"SNV ids also used as pair ids: {clash[:5]}")
        counts = counts.append(snv)
    return counts, k_pairs


def _integral(block: np.ndarray, what: str) -> np.ndarray:
    if not np.array_equal(block, np.round(block)):
        raise DataError(f"Cannot write fractional {what} counts")
    return block.astype(np.int64)


def write_counts(path: str, counts: ReadCounts, k_pairs: Optional[int] = None) -> None:
    K = counts.K if k_pairs is None else k_pairs
    n = _integral(counts.n[:, :K], "pair")
    frame = pd.DataFrame(n.reshape(-1, NUM_OUTCOMES), columns=list(COUNT_COLUMNS))
    frame.insert(0, "pair_id", np.tile(counts.pair_ids[:K], counts.T))
    frame.insert(0, "sample_id", np.repeat(counts.sample_ids, K))
    frame.to_csv(path, sep="\t", index=False)


def write_snv(path: str, counts: ReadCounts, k_pairs: int) -> None:
    block = _integral(counts.n[:, k_pairs:], "SNV")
    S = block.shape[1]
    frame = pd.DataFrame(
        {
            "sample_id": np.repeat(counts.sample_ids, S),
            "snv_id": np.tile(counts.pair_ids[k_pairs:], counts.T),
            "n_total": (block[..., 6] + block[..., 7]).reshape(-1),
            "n_variant": block[..., 7].reshape(-1),
        }
    )
    frame.to_csv(path, sep="\t", index=False)


def write_index(path: str, counts: ReadCounts, k_pairs: int) -> None:
    """Map every sample, pair and SNV id to its 1-based position."""
    rows = [("sample", sid, t + 1) for t, sid in enumerate(counts.sample_ids)]
    rows += [
        ("pair" if k < k_pairs else "snv", pid, k + 1) for k, pid in enumerate(counts.pair_ids)
    ]
    pd.DataFrame(rows, columns=["kind", "id", "position"]).to_csv(path, index=False)


def read_index(path: str) -> Tuple[List[str], List[str], int]:
    """(sample ids, row ids, number of pair rows) from an index file."""
    if not os.path.isfile(path):
        raise DataError(f"Index file not found: {path}")
    frame = pd.read_csv(path, dtype={"id": str}).sort_values(["kind", "position"], kind="stable")
    sample_ids = frame.loc[frame.kind == "sample", "id"].tolist()
    rows = frame[frame.kind != "sample"].sort_values("position", kind="stable")
    return sample_ids, rows["id"].tolist(), int((rows.kind == "pair").sum())


def write_z(path: str, Z: np.ndarray, row_ids: Sequence[str]) -> None:
    """Genotype matrix with 0-based codes, written as codes 1..10."""
    Z = np.asarray(Z)
    frame = pd.DataFrame(Z + 1, columns=[f"c{c + 1}" for c in range(Z.shape[1])])
    frame.insert(0, "pair_id", list(row_ids))
    frame.to_csv(path, index=False)


def write_z_snv(path: str, fractions: np.ndarray, snv_ids: Sequence[str]) -> None:
    frame = pd.DataFrame(fractions, columns=[f"c{c + 1}" for c in range(np.shape(fractions)[1])])
    frame.insert(0, "snv_id", list(snv_ids))
    frame.to_csv(path, index=False)


def write_weights(path: str, w: np.ndarray, sample_ids: Sequence[str], w_star=None) -> None:
    w = np.atleast_2d(w)
    frame = pd.DataFrame(w, columns=[f"w{c}" for c in range(w.shape[1])])
    if w_star is not None:
        frame["w_star"] = np.asarray(w_star)
    frame.insert(0, "sample_id", list(sample_ids))
    frame.to_csv(path, index=False)


def write_rho(path: str, rho: np.ndarray) -> None:
    pd.DataFrame(
        {"outcome": OUTCOME_LABELS, "column": COUNT_COLUMNS, "rho": np.asarray(rho)}
    ).to_csv(path, index=False)


def write_c_posterior(path: str, table: Dict[int, float]) -> None:
    pd.DataFrame(
        {"C": list(table.keys()), "probability": list(table.values())}
    ).to_csv(path, index=False)


def write_tree_posterior(path: str, rows: Sequence[Tuple[Sequence[int], int, float]]) -> None:
    pd.DataFrame(
        [("-".join(str(p) for p in tree), C, prob) for tree, C, prob in rows],
        columns=["tree", "C", "probability"],
    ).to_csv(path, index=False)


def read_table(path: str) -> pd.DataFrame:
    """Read back one of the CSV result tables."""
    if not os.path.isfile(path):
        raise DataError(f"Result file not found: {path}")
    return pd.read_csv(path)


def write_truth(paths: Dict[str, str], truth, counts: ReadCounts) -> None:
    """Truth files of a simulated dataset; ``paths`` as from ``get_file_paths``."""
    write_z(paths["z_true"], truth.Z, counts.pair_ids)
    write_weights(paths["w_true"], truth.w, counts.sample_ids, truth.w_star)
    write_rho(paths["rho_true"], truth.rho)
    if truth.tree is not None:
        with open(paths["tree_true"], "w", encoding="utf-8") as fp:
            fp.write(" ".join(str(p) for p in truth.tree) + "\n")
