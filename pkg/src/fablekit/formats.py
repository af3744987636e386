"""MatrixMarket coordinate files for sparse matrices, CSV for dense ones."""

from __future__ import annotations

import os

import numpy as np
import scipy.io

from .linalg import SparseMatrix, as_dense, log2_exact

MM_HEADER = "%%MatrixMarket matrix coordinate real general"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_market(path, A: SparseMatrix, comments=()) -> None:
    """Write ``A`` with 1-based indices.  Output is byte-stable for equal input."""
    lines = [MM_HEADER]
    lines += [f"% {c}" for c in comments]
    lines.append(f"{A.N} {A.N} {A.nnz}")
    lines += [f"{r + 1} {c + 1} {_fmt(v)}" for r, c, v in zip(A.rows, A.cols, A.values)]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_market(path) -> SparseMatrix:
    """Read a real MatrixMarket file (coordinate or array) as a :class:`SparseMatrix`.

    Symmetric storage is expanded and explicit zeros are dropped.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    M = scipy.io.mmread(path)
    if np.iscomplexobj(M):
        raise ValueError(f"{path}: complex matrices are not supported")
    if hasattr(M, "tocoo"):
        coo = M.tocoo()
        coo.sum_duplicates()
        rows, cols, vals = coo.row, coo.col, coo.data
        shape = coo.shape
    else:
        shape = M.shape
        rows, cols = np.nonzero(M)
        vals = M[rows, cols]
    if shape[0] != shape[1]:
        raise ValueError(f"{path}: matrix is not square {shape}")
    n = log2_exact(shape[0])
    keep = vals != 0
    return SparseMatrix(n, rows[keep], cols[keep], np.asarray(vals[keep], dtype=np.float64))


def write_dense_csv(path, A) -> None:
    A = as_dense(A)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for row in A:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def read_dense_csv(path) -> np.ndarray:
    return as_dense(np.loadtxt(path, delimiter=",", ndmin=2))


def read_matrix(path):
    """Load ``.mtx`` as :class:`SparseMatrix`, anything else as dense CSV."""
    if str(path).endswith(".mtx"):
        return read_matrix_market(path)
    return read_dense_csv(path)
