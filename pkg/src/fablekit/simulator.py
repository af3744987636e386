"""Dense real statevector simulation and block extraction.

Every gate used here (``R_y``, ``H``, CNOT, SWAP) is a real orthogonal
matrix, so amplitudes stay real.  This module is the independent check on
the closed-form path in :mod:`fablekit.angles`; it is only meant for small
widths.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .circuit import Circuit
from .linalg import as_dense, qubits_of

#: Largest ``n`` (matrix qubits) accepted by :func:`extract_block`: 13 circuit qubits.
MAX_BLOCK_QUBITS = 6
MAX_NAIVE_QUBITS = 3


class SimulationSizeError(RuntimeError):
    """The requested simulation exceeds the dense-simulation guard."""


def apply(c: Circuit, state) -> np.ndarray:
    """Apply ``c`` to a statevector (``2**width``) or a batch of them (``2**width x k``)."""
    psi = np.array(state, dtype=np.float64, order="C")
    single = psi.ndim == 1
    if single:
        psi = psi.reshape(-1, 1)
    if psi.shape[0] != 1 << c.width:
        raise ValueError(f"state of length {psi.shape[0]} does not match width {c.width}")
    kernels.apply_gates(psi, c.width, c.kind, c.q0, c.q1, c.angle)
    return psi[:, 0] if single else psi


def basis_state(width: int, index: int) -> np.ndarray:
    psi = np.zeros(1 << width)
    psi[index] = 1.0
    return psi


def extract_block(c: Circuit, n: int, max_qubits: int = MAX_BLOCK_QUBITS) -> np.ndarray:
    """Top-left ``N x N`` block ``<0|<0^n| U |0>|0^n>`` of the circuit unitary.

    Column ``j`` is the image of ``|0>|0^n>|j>``; its first ``N`` amplitudes
    are the block's column (all ancilla qubits zero).
    """
    if c.width != 2 * n + 1:
        raise ValueError(f"circuit width {c.width} does not match 2n+1 = {2 * n + 1}")
    if n > max_qubits:
        raise SimulationSizeError(
            f"n={n} exceeds the dense simulation guard n <= {max_qubits}; "
            "use the closed-form effective block instead"
        )
    N = 1 << n
    states = np.zeros((1 << c.width, N))
    states[np.arange(N), np.arange(N)] = 1.0
    out = apply(c, states)
    return np.ascontiguousarray(out[:N, :])


def circuit_unitary(c: Circuit, max_width: int = 11) -> np.ndarray:
    """Full ``2**width`` square unitary, built column by column."""
    if c.width > max_width:
        raise SimulationSizeError(f"width {c.width} exceeds {max_width}")
    return apply(c, np.eye(1 << c.width))


def projected_probability(c: Circuit, n: int, psi) -> float:
    """Probability of measuring all ancillas in ``|0>`` after ``c`` on ``|0>|0^n>|psi>``."""
    N = 1 << n
    full = np.zeros(1 << c.width)
    full[:N] = psi
    out = apply(c, full)
    return float(np.dot(out[:N], out[:N]))


def _ry(phi):
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    return np.array([[c, -s], [s, c]])


def naive_oracle_block(A) -> np.ndarray:
    """Block of the FABLE wrapper around a multi-controlled-rotation oracle.

    The oracle is assembled directly as a block-diagonal matrix: for each
    control state ``(i, j)`` the ancilla gets ``R_y(2 arccos a_ij)``.  The
    wrapper ``(I (x) H^n (x) I) (I (x) SWAP) O (I (x) H^n (x) I)`` is formed with
    Kronecker products, so nothing here shares code with the Gray-code
    builder or the statevector kernels.
    """
    A = as_dense(A)
    n = qubits_of(A)
    if n > MAX_NAIVE_QUBITS:
        raise SimulationSizeError(f"naive oracle limited to n <= {MAX_NAIVE_QUBITS}")
    N = 1 << n
    if np.abs(A).max() > 1.0 + 1e-12:
        raise ValueError("entries must lie in [-1, 1]")
    theta = np.arccos(np.clip(A, -1.0, 1.0))
    dim = 2 * N * N
    oracle = np.zeros((dim, dim))
    # basis index = ancilla * N^2 + i * N + j
    for i in range(N):
        for j in range(N):
            rot = _ry(2 * theta[i, j])
            idx = [i * N + j, N * N + i * N + j]
            oracle[np.ix_(idx, idx)] = rot
    h1 = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
    hn = np.ones((1, 1))
    for _ in range(n):
        hn = np.kron(hn, h1)
    I2, IN = np.eye(2), np.eye(N)
    h_row = np.kron(I2, np.kron(hn, IN))
    swap = np.zeros((N * N, N * N))
    for i in range(N):
        for j in range(N):
            swap[j * N + i, i * N + j] = 1.0
    swap = np.kron(I2, swap)
    U = h_row @ swap @ oracle @ h_row
    return U[:N, :N].copy()
