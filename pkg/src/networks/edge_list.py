"""Edge-list text files: one `i j multiplicity` row per dyad, i < j, sorted by (i, j)."""

import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import scipy.sparse as sp

logger = logging.getLogger(__name__)

EDGE_COLUMNS = ["i", "j", "multiplicity"]


def upper_entries(matrix: sp.spmatrix) -> pd.DataFrame:
    """Upper-triangle entries of a symmetric matrix, sorted by (i, j)."""
    upper = sp.triu(matrix, k=1).tocoo()
    df = pd.DataFrame({"i": upper.row, "j": upper.col, "multiplicity": upper.data.astype(np.int64)})
    df = df[df["multiplicity"] > 0]
    return df.sort_values(["i", "j"], kind="mergesort").reset_index(drop=True)


def symmetric_from_entries(n: int, rows, cols, values) -> sp.csr_matrix:
    """Symmetric CSR matrix with the given upper-triangle entries; repeated dyads are summed."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=np.int64)
    if rows.size and (rows.min() < 0 or cols.min() < 0 or max(rows.max(), cols.max()) >= n):
        raise ValueError(f"edge endpoints must be within 0..{n - 1}")
    if np.any(rows == cols):
        raise ValueError("self-edges are not permitted")
    upper = sp.coo_matrix((values, (rows, cols)), shape=(n, n), dtype=np.int64)
    full = (upper + upper.T).tocsr()
    full.sum_duplicates()
    full.eliminate_zeros()
    return full


def write_edge_list(matrix: sp.spmatrix, path: Path, header: Optional[str] = None) -> None:
    df = upper_entries(matrix)
    with open(path, "w", encoding="utf-8") as handle:
        if header is not None:
            handle.write(header + "\n")
        df.to_csv(handle, sep=" ", header=False, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(df)} dyads to {path}")


def read_edge_list(path: Path, n: int, has_header: bool = False) -> tuple[sp.csr_matrix, Optional[str]]:
    """Read an edge list; a missing multiplicity column means 1 per row."""
    path = Path(path)
    header = None
    with open(path, encoding="utf-8") as handle:
        if has_header:
            header = handle.readline().strip()
        try:
            df = pd.read_csv(handle, sep=r"\s+", header=None, comment="#", dtype=np.int64)
        except pd.errors.EmptyDataError:
            df = pd.DataFrame(columns=EDGE_COLUMNS, dtype=np.int64)

    if df.shape[1] == 2:
        df[2] = 1
    if df.shape[1] != 3:
        raise ValueError(f"{path}: expected 2 or 3 columns per edge, got {df.shape[1]}")
    df.columns = EDGE_COLUMNS
    if (df["multiplicity"] < 1).any():
        raise ValueError(f"{path}: multiplicities must be >= 1")

    i = np.minimum(df["i"].to_numpy(), df["j"].to_numpy())
    j = np.maximum(df["i"].to_numpy(), df["j"].to_numpy())
    matrix = symmetric_from_entries(n, i, j, df["multiplicity"].to_numpy())
    logger.info(f"Read {len(df)} dyads from {path}")
    return matrix, header
