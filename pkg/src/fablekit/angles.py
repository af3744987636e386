"""Matrix entries to rotation angles, the Gray/Walsh-Hadamard angle transform,
and closed-form evaluation of what a (compressed) oracle encodes.

Vectorization is row-major: entry ``(i, j)`` has linear index ``l = i*N + j``,
and ``l`` is also the basis index of the oracle's ``2n`` control qubits
(row register high, column register low).  The transformed angle stored at
Gray position ``p`` belongs to linear index ``gray_code(p)``.

The linear map between transformed angles ``t`` (indexed by Gray position)
and raw angles ``theta`` (indexed by linear index) is

    theta = N * H^{(x)2n} * P_G * t,

where ``P_G`` moves position ``p`` to index ``gray_code(p)`` and ``H`` is the
normalized Hadamard.  Because ``H^{(x)2n} vec(X) = vec(H X H)``, both
directions reduce to one :func:`~fablekit.linalg.hadamard_conjugate`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .linalg import SparseMatrix, as_dense, gray_code, gray_rank, hadamard_conjugate, qubits_of

#: Entries this far outside [-1, 1] are clamped; anything further is an error.
CLAMP_SLACK = 1e-12
#: Transformed angles below this magnitude are stored as exact zeros.
SNAP_TOL = 1e-15


class AngleDomainError(ValueError):
    """A matrix entry lies outside [-1, 1], so ``arccos`` is undefined."""

    def __init__(self, row, col, value):
        super().__init__(
            f"entry ({row}, {col}) = {value!r} lies outside [-1, 1]; "
            "rescale the matrix (e.g. divide by its largest |entry|)"
        )
        self.row, self.col, self.value = row, col, value


@dataclass(frozen=True, eq=False)
class RawAngles:
    """``theta[i, j] = arccos(a_ij)`` in radians, each in ``[0, pi]``."""

    n: int
    theta: np.ndarray


@dataclass(frozen=True, eq=False)
class AngleSet:
    """Transformed angles, stored at ascending Gray positions.

    Dense sets (from :func:`transform_angles`) store every position
    ``0 .. N**2 - 1``.  Sparse sets (from :func:`ls_angles`) store only the
    positions that can be nonzero; all others are exactly zero.
    """

    n: int
    positions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if pos.shape != val.shape or pos.ndim != 1:
            raise ValueError("positions and values must be 1-D and of equal length")
        if pos.size and (pos[0] < 0 or pos[-1] >= self.size or np.any(np.diff(pos) <= 0)):
            raise ValueError("positions must be strictly increasing and < N**2")
        pos.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", val)

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def size(self) -> int:
        return 1 << (2 * self.n)

    @property
    def is_dense(self) -> bool:
        return self.positions.size == self.size

    @property
    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.values))

    @cached_property
    def order(self) -> np.ndarray:
        """Indices into ``positions`` by descending ``|value|``; ties keep the lower position first."""
        order = np.argsort(-np.abs(self.values), kind="stable")
        order.setflags(write=False)
        return order

    @cached_property
    def magnitude_ladder(self) -> np.ndarray:
        """``|value|`` along :attr:`order`, non-increasing."""
        ladder = np.abs(self.values)[self.order]
        ladder.setflags(write=False)
        return ladder

    def dense(self) -> np.ndarray:
        """Length ``N**2`` vector indexed by Gray position."""
        out = np.zeros(self.size)
        out[self.positions] = self.values
        return out

    def keep_mask(self, delta: float = 0.0) -> np.ndarray:
        """Stored entries that survive threshold ``delta``.

        A rotation is kept when ``|t| >= delta`` and ``t != 0``; a zero angle is
        the identity and is never emitted.
        """
        if delta < 0:
            raise ValueError("threshold must be non-negative")
        mag = np.abs(self.values)
        return (mag >= delta) & (mag > 0)

    def budget_mask(self, budget: int) -> np.ndarray:
        """Keep the ``budget`` largest-magnitude nonzero entries (ties by Gray position)."""
        if budget < 0:
            raise ValueError("budget must be non-negative")
        keep = np.zeros(self.values.size, dtype=bool)
        keep[self.order[: min(budget, self.nonzero_count)]] = True
        return keep

    def threshold_for_budget(self, budget: int) -> float:
        """A threshold reproducing ``budget_mask(budget)`` when magnitudes allow it.

        Returns the midpoint between the last kept and first dropped magnitude;
        when those tie, the kept magnitude itself (the mask is then only
        reproducible by rank, not by threshold).
        """
        nz = self.nonzero_count
        ladder = self.magnitude_ladder
        if budget <= 0:
            return float(np.nextafter(ladder[0], np.inf)) if nz else 0.0
        if budget >= nz:
            return 0.0
        hi, lo = ladder[budget - 1], ladder[budget]
        return float(0.5 * (hi + lo)) if hi > lo else float(hi)

    def to_matrix(self, keep=None) -> np.ndarray:
        """``N x N`` array with each (kept) value placed at its linear index."""
        out = np.zeros(self.size)
        if keep is None:
            out[gray_code(self.positions)] = self.values
        else:
            out[gray_code(self.positions[keep])] = self.values[keep]
        return out.reshape(self.N, self.N)


def angles_of(A) -> RawAngles:
    """``theta_ij = arccos(a_ij)``; entries within ``CLAMP_SLACK`` of +-1 are clamped."""
    A = as_dense(A)
    bad = np.abs(A) > 1.0 + CLAMP_SLACK
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise AngleDomainError(int(i), int(j), float(A[i, j]))
    theta = np.arccos(np.clip(A, -1.0, 1.0))
    return RawAngles(qubits_of(A), theta)


def transform_angles(raw: RawAngles) -> AngleSet:
    """Solve ``N H^{(x)2n} P_G t = vec(theta)`` for ``t`` in ``O(N^2 log N)``."""
    N = 1 << raw.n
    mat = hadamard_conjugate(raw.theta) / N
    values = mat.ravel()[gray_code(np.arange(N * N, dtype=np.int64))]
    values[np.abs(values) < SNAP_TOL] = 0.0
    return AngleSet(raw.n, np.arange(N * N, dtype=np.int64), values)


def forward_angles(angles: AngleSet, keep=None) -> np.ndarray:
    """Raw angles ``N H^{(x)2n} P_G t`` realized by the (kept) transformed angles."""
    return angles.N * hadamard_conjugate(angles.to_matrix(keep))


def effective_block(angles: AngleSet, delta: float = 0.0, keep=None) -> np.ndarray:
    """Closed-form ``N x N`` matrix the oracle writes on the ancilla ``|0>`` amplitude.

    Rotations below ``delta`` (or outside ``keep``, a mask over stored
    entries, when given) are dropped.  The FABLE circuit built from the same
    angles block-encodes this matrix divided by ``2**n``.
    """
    if keep is None:
        keep = angles.keep_mask(delta)
    return np.cos(forward_angles(angles, keep))


def ls_angles(A) -> AngleSet:
    """Transformed angles ``(pi/2) E_00 - A/N`` written straight from the nonzeros of ``A``.

    No arccos or transform is evaluated: each nonzero ``a_ij`` lands at the
    Gray position of its linear index with value ``-a_ij/N``.  A nonzero at
    ``(0, 0)`` is merged into the ``pi/2`` offset.
    """
    if not isinstance(A, SparseMatrix):
        A = SparseMatrix.from_dense(A)
    N = A.N
    pos = gray_rank(A.linear_indices)
    vals = -A.values / N
    order = np.argsort(pos, kind="stable")
    pos, vals = pos[order], vals[order]
    if pos.size and pos[0] == 0:
        vals = vals.copy()
        vals[0] += np.pi / 2
    else:
        pos = np.concatenate(([0], pos))
        vals = np.concatenate(([np.pi / 2], vals))
    return AngleSet(A.n, pos, vals)
