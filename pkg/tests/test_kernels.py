"""The numba and numpy kernels must agree bit for bit (or to rounding)."""

import os
import subprocess
import sys

import numpy as np
import pytest

from fablekit import kernels
from fablekit.linalg import gray_code

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


def _random_circuit(rng, width, count):
    kind = rng.integers(0, 4, count).astype(np.int8)
    q0 = rng.integers(0, width, count).astype(np.int32)
    q1 = ((q0 + rng.integers(1, width, count)) % width).astype(np.int32)
    q1[(kind == kernels.RY) | (kind == kernels.H)] = -1
    angle = rng.uniform(-np.pi, np.pi, count) * (kind == kernels.RY)
    return kind, q0, q1, angle


@needs_numba
@pytest.mark.parametrize("normalized", [True, False])
def test_fwht_backends(rng, normalized):
    a = rng.standard_normal((5, 256))
    b = a.copy()
    kernels._fwht_rows_numba(a, normalized)
    kernels._fwht_rows_numpy(b, normalized)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


@needs_numba
def test_oracle_backends(rng):
    m = 8
    for frac in (1.0, 0.3, 0.01):
        positions = np.flatnonzero(rng.random(1 << m) < frac).astype(np.int64)
        angles = rng.standard_normal(positions.size)
        total = kernels._oracle_cnot_total_numba(positions)
        assert total == kernels._oracle_cnot_total_numpy(positions)
        bufs = []
        for fill in (kernels._oracle_fill_numba, kernels._oracle_fill_numpy):
            out = (np.empty(total + positions.size, np.int8), np.empty(total + positions.size, np.int32),
                   np.empty(total + positions.size, np.int32), np.empty(total + positions.size))
            assert fill(positions, angles, m, *out) == total + positions.size
            bufs.append(out)
        for x, y in zip(*bufs):
            np.testing.assert_array_equal(x, y)


def test_oracle_cnot_total_is_parity_changes():
    positions = np.array([0, 1, 7], dtype=np.int64)
    codes = np.r_[0, gray_code(positions), 0]
    expected = sum(bin(int(a ^ b)).count("1") for a, b in zip(codes[:-1], codes[1:]))
    assert kernels.oracle_cnot_total(positions) == expected == 4


@needs_numba
def test_apply_backends(rng):
    width = 6
    gates = _random_circuit(rng, width, 200)
    s = rng.standard_normal((1 << width, 3))
    a, b = s.copy(), s.copy()
    kernels._apply_gates_numba(a, width, *gates)
    kernels._apply_gates_numpy(b, width, *gates)
    np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(a, axis=0), np.linalg.norm(s, axis=0), rtol=1e-12)


@pytest.mark.parametrize("flag,backend", [("0", "numpy"), ("off", "numpy")])
def test_env_flag(flag, backend):
    env = dict(os.environ, FABLEKIT_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from fablekit import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == backend


def test_numpy_backend_end_to_end():
    code = ("import numpy as np\n"
            "from fablekit.encoders import sfable_encode\n"
            "from fablekit.simulator import extract_block\n"
            "from fablekit.generators import gen_uniform_sparse\n"
            "A = gen_uniform_sparse(3, 2, 1)\n"
            "e = sfable_encode(A, delta=0.01)\n"
            "print(np.abs(extract_block(e.circuit, 3) / e.alpha - e.predicted_block).max())\n")
    env = dict(os.environ, FABLEKIT_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert float(out.stdout) < 1e-12
