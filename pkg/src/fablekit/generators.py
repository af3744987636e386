"""Seeded matrix families: random sparse data, Heisenberg chains, 2-D Laplacians.

All randomness comes from numpy's counter-based Philox bit generator keyed by
the 64-bit seed, so a (family, parameters, seed) triple always produces the
same matrix bit for bit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import SparseMatrix

FAMILIES = (
    "uniform_sparse",
    "binary_sparse",
    "nonneg_sparse",
    "thresholded_positive",
    "heisenberg",
    "laplacian2d",
)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFF_FFFF_FFFF_FFFF))


def nonzero_count(n: int, s: float) -> int:
    N = 1 << n
    k = int(round(s * N))
    if not 1 <= k <= N * N:
        raise ValueError(f"s={s} gives {k} nonzeros, outside [1, {N * N}] for n={n}")
    return k


def _positions(rng, n, k):
    N = 1 << n
    lin = np.sort(rng.choice(N * N, size=k, replace=False))
    return lin // N, lin % N


def _open_interval_uniform(rng, low, high, k):
    # uniform on [low, high) with exact zeros redrawn
    vals = rng.uniform(low, high, k)
    while np.any(vals == 0.0):
        bad = vals == 0.0
        vals[bad] = rng.uniform(low, high, int(bad.sum()))
    return vals


def gen_uniform_sparse(n: int, s: float, seed: int) -> SparseMatrix:
    """``round(s * 2**n)`` distinct uniformly placed nonzeros, values uniform on [-1, 1]."""
    k = nonzero_count(n, s)
    rng = make_rng(seed)
    rows, cols = _positions(rng, n, k)
    return SparseMatrix(n, rows, cols, _open_interval_uniform(rng, -1.0, 1.0, k))


def gen_binary_sparse(n: int, s: float, seed: int) -> SparseMatrix:
    """Uniformly placed nonzeros, all equal to 1 (a random directed graph)."""
    k = nonzero_count(n, s)
    rows, cols = _positions(make_rng(seed), n, k)
    return SparseMatrix(n, rows, cols, np.ones(k))


def gen_nonneg_sparse(n: int, s: float, seed: int) -> SparseMatrix:
    """Uniformly placed nonzeros with values in (0, 1]."""
    k = nonzero_count(n, s)
    rng = make_rng(seed)
    rows, cols = _positions(rng, n, k)
    return SparseMatrix(n, rows, cols, 1.0 - rng.uniform(0.0, 1.0, k))


def gen_thresholded_positive(n: int, s: float, threshold: float, seed: int) -> SparseMatrix:
    """Uniformly placed nonzeros with values uniform on (threshold, 1]."""
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must lie in [0, 1)")
    k = nonzero_count(n, s)
    rng = make_rng(seed)
    rows, cols = _positions(rng, n, k)
    vals = 1.0 - (1.0 - threshold) * rng.uniform(0.0, 1.0, k)
    return SparseMatrix(n, rows, cols, vals)


def sign_flip(A: SparseMatrix, seed: int) -> SparseMatrix:
    """Multiply every nonzero by an independent uniform draw from [-1, 1]."""
    factors = _open_interval_uniform(make_rng(seed), -1.0, 1.0, A.nnz)
    return SparseMatrix(A.n, A.rows, A.cols, A.values * factors)


_PAULI = {
    "X": sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]])),
    # Y (x) Y is real: (iσ)(iσ') with Y = i * [[0, -1], [1, 0]]
    "iY": sp.csr_matrix(np.array([[0.0, -1.0], [1.0, 0.0]])),
    "Z": sp.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]])),
}


def _place(n, ops):
    """Kronecker product with ``ops[q]`` on qubit ``q`` (qubit 0 leftmost) and identity elsewhere."""
    out = sp.identity(1, format="csr")
    eye = sp.identity(2, format="csr")
    for q in range(n):
        out = sp.kron(out, ops.get(q, eye), format="csr")
    return out


def gen_heisenberg(n: int, Jx: float, Jy: float, Jz: float, hz: float) -> np.ndarray:
    """Open Heisenberg chain ``sum J_a S^a_i S^a_{i+1} + hz sum Z_i`` as a dense real matrix."""
    if n < 2:
        raise ValueError("Heisenberg chain needs n >= 2")
    dim = 1 << n
    H = sp.csr_matrix((dim, dim))
    for i in range(n - 1):
        if Jx:
            H = H + Jx * _place(n, {i: _PAULI["X"], i + 1: _PAULI["X"]})
        if Jy:
            # Y_i Y_{i+1} = (i * iY)(i * iY) = -(iY (x) iY)
            H = H - Jy * _place(n, {i: _PAULI["iY"], i + 1: _PAULI["iY"]})
        if Jz:
            H = H + Jz * _place(n, {i: _PAULI["Z"], i + 1: _PAULI["Z"]})
    if hz:
        for i in range(n):
            H = H + hz * _place(n, {i: _PAULI["Z"]})
    return H.toarray()


def laplacian_1d(qubits: int, periodic: bool = False) -> np.ndarray:
    M = 1 << qubits
    L = 2.0 * np.eye(M) - np.eye(M, k=1) - np.eye(M, k=-1)
    if periodic and M > 1:
        L[0, M - 1] = L[M - 1, 0] = -1.0
    return L


def gen_laplacian2d(nx_qubits: int, ny_qubits: int, periodic: bool = False) -> np.ndarray:
    """``L_xx (x) I + I (x) L_yy`` with the (2, -1) stencil in each direction."""
    Lx = laplacian_1d(nx_qubits, periodic)
    Ly = laplacian_1d(ny_qubits, periodic)
    return np.kron(Lx, np.eye(Ly.shape[0])) + np.kron(np.eye(Lx.shape[0]), Ly)


@dataclass(frozen=True)
class GenSpec:
    """Everything needed to regenerate one matrix."""

    family: str
    n: int
    s: float = 0.0
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        N = 1 << self.n
        if self.family.endswith("sparse") or self.family == "thresholded_positive":
            if not 1 <= round(self.s * N) <= N * N:
                raise ValueError(f"relative sparsity s={self.s} infeasible for n={self.n}")
        if self.family == "laplacian2d":
            nx = self.params.get("nx", self.n // 2)
            ny = self.params.get("ny", self.n - nx)
            if nx + ny != self.n:
                raise ValueError("laplacian2d needs nx + ny == n")

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        """``key=value`` lines; ``params`` entries are flattened with a ``param.`` prefix."""
        lines = [f"family={self.family}", f"n={self.n}", f"s={self.s!r}", f"seed={self.seed}"]
        lines += [f"param.{k}={v!r}" for k, v in sorted(self.params.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> GenSpec:
        kw, params = {}, {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = (part.strip() for part in line.partition("="))
            if key.startswith("param."):
                params[key[6:]] = _parse_scalar(val)
            else:
                kw[key] = val
        return cls(kw["family"], int(kw["n"]), float(kw.get("s", 0.0)), int(kw.get("seed", 0)), params)


def _parse_scalar(val: str):
    low = val.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            pass
    return val.strip("'\"")


#: Mixed into the seed of the sign draws so they are independent of the placement draws.
SIGN_FLIP_SALT = 0x51_6E_F1_1B


def generate(spec: GenSpec):
    """Build the matrix described by ``spec`` (sparse families return :class:`SparseMatrix`).

    Sparse families accept ``params["sign_flip"]``: every nonzero is then
    multiplied by an independent uniform draw from [-1, 1].
    """
    A = _generate(spec)
    if spec.params.get("sign_flip", False):
        if not isinstance(A, SparseMatrix):
            raise ValueError("sign_flip applies to sparse families only")
        A = sign_flip(A, spec.seed ^ SIGN_FLIP_SALT)
    return A


def _generate(spec: GenSpec):
    p = spec.params
    if spec.family == "uniform_sparse":
        return gen_uniform_sparse(spec.n, spec.s, spec.seed)
    if spec.family == "binary_sparse":
        return gen_binary_sparse(spec.n, spec.s, spec.seed)
    if spec.family == "nonneg_sparse":
        return gen_nonneg_sparse(spec.n, spec.s, spec.seed)
    if spec.family == "thresholded_positive":
        return gen_thresholded_positive(spec.n, spec.s, p.get("threshold", 0.7), spec.seed)
    if spec.family == "heisenberg":
        if p.get("random", False):
            Jx, Jy, Jz, hz = make_rng(spec.seed).uniform(-1.0, 1.0, 4)
        else:
            Jx, Jy, Jz, hz = (p.get(k, 0.0) for k in ("Jx", "Jy", "Jz", "hz"))
        return gen_heisenberg(spec.n, Jx, Jy, Jz, hz)
    nx = p.get("nx", spec.n // 2)
    return gen_laplacian2d(nx, spec.n - nx, bool(p.get("periodic", False)))
