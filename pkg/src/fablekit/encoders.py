"""FABLE, S-FABLE and LS-FABLE pipelines from a matrix to a block encoding."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .angles import AngleSet, angles_of, effective_block, ls_angles, transform_angles
from .circuit import Circuit, GateCounts, assemble_fable, assemble_sfable, build_oracle, predict_counts
from .linalg import SparseMatrix, as_dense, hadamard_conjugate, max_abs_entry, qubits_of, spectral_norm

logger = logging.getLogger(__name__)

METHODS = ("FABLE", "SFABLE", "LSFABLE")


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    """A ``(alpha, n + 1, eps)`` block encoding and its closed-form prediction.

    ``alpha`` is the subnormalization: the circuit's top-left block is
    ``alpha * predicted_block``, and ``predicted_block`` approximates the
    source matrix.  ``scale`` is the factor the encoded matrix was divided by
    before taking arccos (1 unless rescaled).  The circuit is only built on
    first access.
    """

    method: str
    n: int
    alpha: float
    delta: float
    scale: float
    angles: AngleSet
    keep: np.ndarray
    predicted_block: np.ndarray

    @property
    def ancillas(self) -> int:
        return self.n + 1

    @property
    def rotations(self) -> int:
        return int(np.count_nonzero(self.keep))

    @cached_property
    def circuit(self) -> Circuit:
        oracle = build_oracle(self.angles, keep=self.keep)
        if self.method == "FABLE":
            c = assemble_fable(oracle, self.n)
        else:
            c = assemble_sfable(oracle, self.n, self.scale)
        return c.with_meta(method=self.method, delta=self.delta, alpha=self.alpha)

    def counts(self) -> GateCounts:
        """Gate counts with SWAPs expanded to CNOTs, computed without building the circuit."""
        return predict_counts(self.angles, self.method, keep=self.keep)


def _selection(angles: AngleSet, delta, budget):
    if budget is not None:
        keep = angles.budget_mask(budget)
        return keep, angles.threshold_for_budget(budget)
    if delta < 0:
        raise ValueError("threshold must be non-negative")
    return angles.keep_mask(delta), float(delta)


def sfable_scale(B, normalize: str = "auto") -> float:
    """Factor dividing ``HAH`` before arccos.

    ``"always"`` divides by ``max|HAH|``; ``"auto"`` divides only when that
    exceeds 1, i.e. only when arccos would otherwise be undefined.
    """
    peak = max_abs_entry(B)
    if peak == 0.0:
        raise ValueError("cannot encode the zero matrix: max|HAH| = 0")
    if normalize == "always":
        return peak
    if normalize == "auto":
        return max(peak, 1.0)
    raise ValueError(f"unknown normalize mode {normalize!r}")


def prepare_angles(A, method: str, normalize: str = "auto", rescale: bool = False):
    """Transformed angles of ``A`` for ``method``, plus the scale divided out first.

    Returns ``(n, scale, angles)``.  This is the expensive ``O(N^2 log N)``
    step; :func:`from_angles` then evaluates any selection of rotations.
    """
    if method == "LSFABLE":
        if not isinstance(A, SparseMatrix):
            A = SparseMatrix.from_dense(A)
        if A.nnz == 0:
            raise ValueError("cannot encode the zero matrix with LS-FABLE")
        return A.n, 1.0, ls_angles(A)
    if method == "SFABLE":
        B = hadamard_conjugate(A)
        scale = sfable_scale(B, normalize)
        return qubits_of(A), scale, transform_angles(angles_of(B / scale))
    if method != "FABLE":
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    A = as_dense(A)
    scale = 1.0
    if rescale:
        peak = max_abs_entry(A)
        if peak > 1.0:
            scale = peak
            logger.info("rescaling FABLE input by 1/%g", peak)
    return qubits_of(A), scale, transform_angles(angles_of(A / scale if scale != 1.0 else A))


def predicted_block(method: str, scale: float, angles: AngleSet, keep) -> np.ndarray:
    """Closed-form approximation of the source matrix (circuit block divided by alpha)."""
    block = effective_block(angles, keep=keep)
    if method != "FABLE":
        block = hadamard_conjugate(block)
    return scale * block if scale != 1.0 else block


def from_angles(method: str, n: int, scale: float, angles: AngleSet, keep, delta: float) -> BlockEncoding:
    return BlockEncoding(method, n, 1.0 / (2**n * scale), delta, scale, angles, keep,
                         predicted_block(method, scale, angles, keep))


def fable_encode(A, delta: float = 0.0, budget: int | None = None, rescale: bool = False) -> BlockEncoding:
    """FABLE: arccos of the entries, transformed, thresholded, Gray-code oracle.

    With ``budget`` the ``budget`` largest transformed angles are kept instead
    of thresholding.  Entries outside [-1, 1] raise
    :class:`~fablekit.angles.AngleDomainError` unless ``rescale`` is set, in
    which case ``A`` is divided by its largest ``|entry|`` and the factor is
    folded into ``alpha``.
    """
    n, scale, angles = prepare_angles(A, "FABLE", rescale=rescale)
    keep, delta = _selection(angles, delta, budget)
    return from_angles("FABLE", n, scale, angles, keep, delta)


def sfable_encode(A, delta: float = 0.0, budget: int | None = None, normalize: str = "auto") -> BlockEncoding:
    """S-FABLE: FABLE on ``HAH / scale``, undone by Hadamards on the data register."""
    n, scale, angles = prepare_angles(A, "SFABLE", normalize=normalize)
    keep, delta = _selection(angles, delta, budget)
    return from_angles("SFABLE", n, scale, angles, keep, delta)


def lsfable_encode(A) -> BlockEncoding:
    """LS-FABLE: transformed angles ``(pi/2) E_00 - A/N`` taken directly from the nonzeros.

    Uses at most ``|A| + 1`` rotations and encodes ``H sin(HAH) H / 2**n``.
    """
    n, scale, angles = prepare_angles(A, "LSFABLE")
    return from_angles("LSFABLE", n, scale, angles, angles.keep_mask(0.0), 0.0)


def normalize_method(method: str) -> str:
    name = method.upper().replace("-", "").replace("_", "")
    if name not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return name


def encode(A, method: str, delta: float = 0.0, budget: int | None = None, **kw) -> BlockEncoding:
    method = normalize_method(method)
    if method == "FABLE":
        return fable_encode(A, delta, budget, **kw)
    if method == "SFABLE":
        return sfable_encode(A, delta, budget, **kw)
    if method == "LSFABLE":
        return lsfable_encode(A)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def encoding_error(A, enc: BlockEncoding, tol: float = 1e-8) -> float:
    """``||A - block / alpha||_2`` using the closed-form block."""
    A = as_dense(A)
    if A.shape != enc.predicted_block.shape:
        raise ValueError("matrix and encoding sizes differ")
    return spectral_norm(A - enc.predicted_block, tol=tol)
