"""Hot inner loops, each with a numba and a pure-numpy implementation.

The numba versions are used when numba imports and the environment variable
``FABLEKIT_NUMBA`` is not set to ``0``/``false``/``no``.  Both implementations
are always importable under their ``_numba``/``_numpy`` names so they can be
tested and benchmarked against each other.

Conventions shared with the rest of the package:

* statevectors are batched: shape ``(2**width, batch)``, float64, C-ordered;
* qubit ``q`` is bit ``width - 1 - q`` of the basis index (qubit 0 is the most
  significant bit);
* gate kinds are the integer codes ``RY, CNOT, H, SWAP`` below.
"""

from __future__ import annotations

import math
import os

import numpy as np

RY, CNOT, H, SWAP = 0, 1, 2, 3

_FLAG = os.environ.get("FABLEKIT_NUMBA", "1").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")
BACKEND = "numba" if USE_NUMBA else "numpy"


def _jit(fn):
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# --------------------------------------------------------------------------
# Walsh-Hadamard transform along the last axis of a 2-D array (in place)
# --------------------------------------------------------------------------


@_jit
def _fwht_rows_numba(a, normalized):
    rows, length = a.shape
    scale = 1.0 / math.sqrt(2.0) if normalized else 1.0
    for r in range(rows):
        h = 1
        while h < length:
            for start in range(0, length, 2 * h):
                for k in range(start, start + h):
                    x = a[r, k]
                    y = a[r, k + h]
                    a[r, k] = (x + y) * scale
                    a[r, k + h] = (x - y) * scale
            h *= 2


def _fwht_rows_numpy(a, normalized):
    rows, length = a.shape
    scale = 1.0 / math.sqrt(2.0) if normalized else 1.0
    h = 1
    while h < length:
        v = a.reshape(rows, length // (2 * h), 2, h)
        x = v[:, :, 0, :].copy()
        y = v[:, :, 1, :]
        v[:, :, 0, :] += y
        v[:, :, 1, :] = x - y
        if normalized:
            v *= scale
        h *= 2


# --------------------------------------------------------------------------
# Gray-code oracle layout
# --------------------------------------------------------------------------


@_jit
def _oracle_cnot_total_numba(positions):
    total = 0
    prev = 0
    for p in positions:
        g = p ^ (p >> 1)
        x = g ^ prev
        while x:
            x &= x - 1
            total += 1
        prev = g
    x = prev
    while x:
        x &= x - 1
        total += 1
    return total


def _popcount(x):
    x = np.asarray(x, dtype=np.int64).copy()
    count = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        count += x & 1
        x >>= 1
    return count


def _oracle_masks(positions):
    positions = np.asarray(positions, dtype=np.int64)
    codes = positions ^ (positions >> 1)
    before = np.concatenate(([0], codes))
    after = np.concatenate((codes, [0]))
    return before ^ after


def _oracle_cnot_total_numpy(positions):
    return int(_popcount(_oracle_masks(positions)).sum())


@_jit
def _oracle_fill_numba(positions, angles, m, kind, q0, q1, angle):
    # control qubit for Gray bit b is m - b; rotation target is qubit 0
    k = 0
    prev = 0
    for i in range(positions.shape[0]):
        p = positions[i]
        g = p ^ (p >> 1)
        x = g ^ prev
        for b in range(m):
            if (x >> b) & 1:
                kind[k] = CNOT
                q0[k] = 0
                q1[k] = m - b
                angle[k] = 0.0
                k += 1
        kind[k] = RY
        q0[k] = 0
        q1[k] = -1
        angle[k] = angles[i]
        k += 1
        prev = g
    for b in range(m):
        if (prev >> b) & 1:
            kind[k] = CNOT
            q0[k] = 0
            q1[k] = m - b
            angle[k] = 0.0
            k += 1
    return k


def _oracle_fill_numpy(positions, angles, m, kind, q0, q1, angle):
    masks = _oracle_masks(positions)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(bool)
    rot = np.ones((masks.shape[0], 1), dtype=bool)
    rot[-1, 0] = False
    emit = np.hstack((bits, rot)).ravel()
    slot = np.tile(np.arange(m + 1), masks.shape[0])[emit]
    total = slot.shape[0]
    is_rot = slot == m
    kind[:total] = np.where(is_rot, RY, CNOT)
    q0[:total] = 0
    q1[:total] = np.where(is_rot, -1, m - slot)
    angle[:total] = 0.0
    angle[:total][is_rot] = angles
    return total


# --------------------------------------------------------------------------
# Batched real statevector gate application (in place)
# --------------------------------------------------------------------------


@_jit
def _apply_gates_numba(state, width, kind, q0, q1, angle):
    dim, batch = state.shape
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for g in range(kind.shape[0]):
        op = kind[g]
        if op == RY or op == H:
            bit = 1 << (width - 1 - q0[g])
            if op == RY:
                c = math.cos(0.5 * angle[g])
                s = math.sin(0.5 * angle[g])
            else:
                c = inv_sqrt2
                s = inv_sqrt2
            for i in range(dim):
                if i & bit:
                    continue
                j = i | bit
                for b in range(batch):
                    x = state[i, b]
                    y = state[j, b]
                    if op == RY:
                        state[i, b] = c * x - s * y
                        state[j, b] = s * x + c * y
                    else:
                        state[i, b] = (x + y) * c
                        state[j, b] = (x - y) * c
        elif op == CNOT:
            tbit = 1 << (width - 1 - q0[g])
            cbit = 1 << (width - 1 - q1[g])
            for i in range(dim):
                if (i & cbit) and not (i & tbit):
                    j = i | tbit
                    for b in range(batch):
                        x = state[i, b]
                        state[i, b] = state[j, b]
                        state[j, b] = x
        else:
            abit = 1 << (width - 1 - q0[g])
            bbit = 1 << (width - 1 - q1[g])
            for i in range(dim):
                if (i & abit) and not (i & bbit):
                    j = i ^ abit ^ bbit
                    for b in range(batch):
                        x = state[i, b]
                        state[i, b] = state[j, b]
                        state[j, b] = x


def _index(width, fixed):
    idx = [slice(None)] * (width + 1)
    for q, v in fixed.items():
        idx[q] = v
    return tuple(idx)


def _apply_gates_numpy(state, width, kind, q0, q1, angle):
    view = state.reshape((2,) * width + (state.shape[1],))
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for g in range(kind.shape[0]):
        op = int(kind[g])
        a = int(q0[g])
        if op == RY or op == H:
            lo, hi = _index(width, {a: 0}), _index(width, {a: 1})
            x = view[lo].copy()
            y = view[hi]
            if op == RY:
                c, s = math.cos(0.5 * angle[g]), math.sin(0.5 * angle[g])
                view[lo] = c * x - s * y
                view[hi] = s * x + c * y
            else:
                view[lo] = (x + y) * inv_sqrt2
                view[hi] = (x - y) * inv_sqrt2
            continue
        b = int(q1[g])
        if op == CNOT:
            i, j = _index(width, {b: 1, a: 0}), _index(width, {b: 1, a: 1})
        else:
            i, j = _index(width, {a: 1, b: 0}), _index(width, {a: 0, b: 1})
        tmp = view[i].copy()
        view[i] = view[j]
        view[j] = tmp


if USE_NUMBA:
    fwht_rows = _fwht_rows_numba
    oracle_cnot_total = _oracle_cnot_total_numba
    oracle_fill = _oracle_fill_numba
    apply_gates = _apply_gates_numba
else:
    fwht_rows = _fwht_rows_numpy
    oracle_cnot_total = _oracle_cnot_total_numpy
    oracle_fill = _oracle_fill_numpy
    apply_gates = _apply_gates_numpy
