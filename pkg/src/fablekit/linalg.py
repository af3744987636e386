"""Real matrix containers, Walsh-Hadamard transforms, Gray codes and norms."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels

logger = logging.getLogger(__name__)

#: Seed of the deterministic start block used by :func:`spectral_norm`.
SPECTRAL_SEED = 0x5EED_F4B1E


class DimensionError(ValueError):
    """A size is not a power of two, or two shapes disagree."""


class SpectralNormError(RuntimeError):
    """Power iteration hit its iteration cap before reaching the tolerance."""

    def __init__(self, message, estimate, iterations):
        super().__init__(message)
        self.estimate = estimate
        self.iterations = iterations


def log2_exact(size: int) -> int:
    """Return ``m`` with ``2**m == size``; raise :class:`DimensionError` otherwise."""
    size = int(size)
    if size < 1 or size & (size - 1):
        raise DimensionError(f"size {size} is not a power of two")
    return size.bit_length() - 1


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Real ``2**n x 2**n`` matrix stored as 0-based coordinate triples.

    Entries are kept sorted by row-major linear index ``row * N + col``.
    Explicit zeros and duplicate coordinates are rejected.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        N = 1 << self.n
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == values.shape):
            raise DimensionError("rows, cols and values must have equal length")
        if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= N or cols.max() >= N):
            raise DimensionError(f"index out of range for N={N}")
        if not np.all(np.isfinite(values)):
            raise ValueError("sparse values must be finite")
        if np.any(values == 0.0):
            raise ValueError("sparse values must be nonzero")
        lin = rows * N + cols
        order = np.argsort(lin, kind="stable")
        lin = lin[order]
        if lin.size > 1 and np.any(lin[1:] == lin[:-1]):
            raise ValueError("duplicate (row, col) entries")
        for name, arr in (("rows", rows[order]), ("cols", cols[order]), ("values", values[order])):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def sparsity(self) -> float:
        """Relative sparsity ``|A| / N`` (mean nonzeros per row)."""
        return self.nnz / self.N

    @property
    def linear_indices(self) -> np.ndarray:
        return self.rows * self.N + self.cols

    def entries(self) -> list[tuple[int, int, float]]:
        return [(int(r), int(c), float(v)) for r, c, v in zip(self.rows, self.cols, self.values)]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.N, self.N))
        out[self.rows, self.cols] = self.values
        return out

    def scaled(self, factor: float) -> SparseMatrix:
        return SparseMatrix(self.n, self.rows, self.cols, self.values * factor)

    @classmethod
    def from_dense(cls, A) -> SparseMatrix:
        A = as_dense(A)
        rows, cols = np.nonzero(A)
        return cls(log2_exact(A.shape[0]), rows, cols, A[rows, cols])

    @classmethod
    def from_entries(cls, n: int, entries) -> SparseMatrix:
        entries = list(entries)
        if not entries:
            return cls(n, [], [], [])
        rows, cols, values = zip(*entries)
        return cls(n, rows, cols, values)

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"SparseMatrix(n={self.n}, nnz={self.nnz})"


def as_dense(A) -> np.ndarray:
    """Validate ``A`` as a finite real ``2**n x 2**n`` matrix and return a float64 array."""
    if isinstance(A, SparseMatrix):
        return A.to_dense()
    A = np.array(A, dtype=np.float64, order="C")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    log2_exact(A.shape[0])
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return A


def qubits_of(A) -> int:
    if isinstance(A, SparseMatrix):
        return A.n
    return log2_exact(np.shape(A)[0])


def fwht(v, normalized: bool = True) -> np.ndarray:
    """Walsh-Hadamard transform ``H^{(x)m} v`` of a length ``2**m`` vector.

    With ``normalized`` each butterfly stage is scaled by ``1/sqrt(2)``, making
    the transform orthonormal and its own inverse.  A 2-D input is transformed
    row by row.
    """
    a = np.array(v, dtype=np.float64, order="C")
    log2_exact(a.shape[-1])
    if a.ndim == 1:
        kernels.fwht_rows(a.reshape(1, -1), normalized)
    elif a.ndim == 2:
        kernels.fwht_rows(a, normalized)
    else:
        raise DimensionError("fwht expects a vector or a 2-D array of rows")
    return a


def hadamard_conjugate(A) -> np.ndarray:
    """Return ``H A H`` with the normalized ``n``-qubit Hadamard ``H``.

    Costs ``O(N^2 log N)``: one transform over the rows and one over the
    columns.
    """
    B = as_dense(A)
    kernels.fwht_rows(B, True)
    B = np.ascontiguousarray(B.T)
    kernels.fwht_rows(B, True)
    return np.ascontiguousarray(B.T)


# --------------------------------------------------------------------------
# Gray codes
# --------------------------------------------------------------------------


def gray_code(k):
    """Binary-reflected Gray code ``k ^ (k >> 1)`` (scalar or array)."""
    if np.isscalar(k):
        k = int(k)
        return k ^ (k >> 1)
    k = np.asarray(k, dtype=np.int64)
    return k ^ (k >> 1)


def gray_rank(g):
    """Inverse of :func:`gray_code`: position of code ``g`` in the sequence."""
    scalar = np.isscalar(g)
    x = np.array(g, dtype=np.int64)
    shift = x >> 1
    while np.any(shift):
        x ^= shift
        shift >>= 1
    return int(x) if scalar else x


@dataclass(frozen=True, eq=False)
class GrayTable:
    """Gray sequence ``codes[0..2**m-1]`` and the bit flipped at each step.

    ``transition_bits[j-1]`` is the bit that differs between ``codes[j-1]``
    and ``codes[j]``.  The cycle closes by flipping bit ``m-1`` to return
    from the last code to 0.
    """

    m: int
    codes: np.ndarray
    transition_bits: np.ndarray

    @property
    def closing_bit(self) -> int:
        return self.m - 1


def gray_table(m: int) -> GrayTable:
    if m < 1:
        raise ValueError("bit width must be at least 1")
    k = np.arange(1 << m, dtype=np.int64)
    codes = gray_code(k)
    flips = codes[1:] ^ codes[:-1]
    # flips are powers of two; the bit index is the trailing-zero count of k
    bits = np.zeros(flips.shape, dtype=np.int64)
    tz = k[1:].copy()
    while True:
        even = (tz & 1) == 0
        if not np.any(even):
            break
        bits[even] += 1
        tz[even] >>= 1
    codes.setflags(write=False)
    bits.setflags(write=False)
    return GrayTable(m, codes, bits)


# --------------------------------------------------------------------------
# Norms
# --------------------------------------------------------------------------


def max_abs_entry(M) -> float:
    """Largest ``|m_ij|``; this is the ``||.||_inf`` used to scale ``HAH``."""
    if isinstance(M, SparseMatrix):
        return float(np.abs(M.values).max()) if M.nnz else 0.0
    M = np.asarray(M)
    return float(np.abs(M).max()) if M.size else 0.0


def spectral_norm(M, tol: float = 1e-8, max_iter: int = 20000, block: int = 16,
                  seed: int = SPECTRAL_SEED) -> float:
    """Largest singular value of ``M`` by block power iteration on ``M^T M``.

    A block of ``block`` orthonormal vectors drawn from a fixed-seed generator
    is iterated with a Rayleigh-Ritz step each round; the top Ritz value is a
    lower bound that increases monotonically to ``sigma_max**2``.  Iteration
    stops once its square root changes by less than ``tol/10`` relative.

    Raises
    ------
    SpectralNormError
        If ``max_iter`` rounds pass without convergence.  The exception
        carries the last estimate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionError("spectral_norm expects a matrix")
    if M.size == 0 or not np.any(M):
        return 0.0
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    if M.shape[0] < M.shape[1]:
        M = M.T
    cols = M.shape[1]
    k = min(block, cols)
    rng = np.random.Generator(np.random.Philox(seed))
    V, _ = np.linalg.qr(rng.standard_normal((cols, k)))
    MtM_V = M.T @ (M @ V)
    sigma = prev = 0.0
    for it in range(1, max_iter + 1):
        ritz = np.linalg.eigvalsh(V.T @ MtM_V)[-1]
        sigma = float(np.sqrt(max(ritz, 0.0)))
        if it > 1 and abs(sigma - prev) <= 0.1 * tol * sigma:
            return sigma
        prev = sigma
        V, _ = np.linalg.qr(MtM_V)
        MtM_V = M.T @ (M @ V)
    raise SpectralNormError(
        f"power iteration did not reach tol={tol} in {max_iter} iterations", sigma, max_iter
    )
