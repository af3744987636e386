import numpy as np
import pytest

from fablekit.formats import (MM_HEADER, read_dense_csv, read_matrix, read_matrix_market, write_dense_csv,
                              write_matrix_market)
from fablekit.linalg import SparseMatrix
from conftest import random_sparse


def test_mm_roundtrip(tmp_path):
    A = random_sparse(4, 3, seed=2)
    p = tmp_path / "a.mtx"
    write_matrix_market(p, A, comments=["seed=2"])
    text = p.read_text().splitlines()
    assert text[0] == MM_HEADER and text[1] == "% seed=2" and text[2] == f"16 16 {A.nnz}"
    r, c, _ = text[3].split()
    assert (int(r) - 1, int(c) - 1) == (int(A.rows[0]), int(A.cols[0]))
    assert read_matrix_market(p) == A
    assert read_matrix(p) == A


def test_mm_bytes_stable(tmp_path):
    A = random_sparse(3, 2, seed=9)
    write_matrix_market(tmp_path / "x.mtx", A)
    write_matrix_market(tmp_path / "y.mtx", A)
    assert (tmp_path / "x.mtx").read_bytes() == (tmp_path / "y.mtx").read_bytes()


def test_mm_symmetric_and_zeros(tmp_path):
    p = tmp_path / "s.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 0\n2 1 0.5\n2 2 -1\n")
    A = read_matrix_market(p)
    assert A.entries() == [(0, 1, 0.5), (1, 0, 0.5), (1, 1, -1.0)]


def test_mm_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_matrix_market(tmp_path / "missing.mtx")
    p = tmp_path / "r.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real general\n3 3 1\n1 1 1\n")
    with pytest.raises(ValueError):
        read_matrix_market(p)


def test_dense_csv(tmp_path, rng):
    A = rng.standard_normal((4, 4))
    p = tmp_path / "a.csv"
    write_dense_csv(p, A)
    np.testing.assert_array_equal(read_dense_csv(p), A)
    np.testing.assert_array_equal(read_matrix(p), A)
    write_dense_csv(p, SparseMatrix.from_dense(A))
    np.testing.assert_array_equal(read_dense_csv(p), A)
