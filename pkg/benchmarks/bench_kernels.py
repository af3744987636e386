"""Time the numba kernels against their numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--n 10]

Both implementations are always importable, so one process times both.  The
first numba call (compilation or cache load) is excluded.  Results are also
checked for agreement.
"""

import argparse
import time

import numpy as np

from fablekit import kernels
from fablekit.angles import angles_of, transform_angles
from fablekit.circuit import assemble_fable, build_oracle, oracle_positions
from fablekit.generators import gen_uniform_sparse


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, rng):
    N = 1 << n
    mat = rng.uniform(-1, 1, (N, N))
    yield "fwht_rows", f"{N}x{N}", lambda impl: impl(mat.copy(), True), \
        (kernels._fwht_rows_numba, kernels._fwht_rows_numpy)

    angles = transform_angles(angles_of(gen_uniform_sparse(n, 4.0, seed=1).to_dense()))
    pos, vals = oracle_positions(angles, np.quantile(np.abs(angles.values), 0.9))
    pos = np.ascontiguousarray(pos, dtype=np.int64)
    yield "oracle_cnot_total", f"{pos.size} rotations", lambda impl: impl(pos), \
        (kernels._oracle_cnot_total_numba, kernels._oracle_cnot_total_numpy)

    total = pos.size + int(kernels._oracle_cnot_total_numpy(pos))
    m = 2 * n

    def fill(impl):
        buf = (np.empty(total, np.int8), np.empty(total, np.int32), np.empty(total, np.int32), np.empty(total))
        impl(pos, np.ascontiguousarray(vals, dtype=np.float64), m, *buf)
        return buf

    yield "oracle_fill", f"{total} gates", fill, (kernels._oracle_fill_numba, kernels._oracle_fill_numpy)

    small = max(2, min(n, 4))
    c = assemble_fable(build_oracle(transform_angles(angles_of(rng.uniform(-1, 1, (1 << small,) * 2)))), small)
    width = c.width
    state = rng.standard_normal((1 << width, 1 << small))

    def run(impl):
        s = state.copy()
        impl(s, width, c.kind, c.q0, c.q1, c.angle)
        return s

    yield "apply_gates", f"{len(c)} gates on {width} qubits x {1 << small}", run, \
        (kernels._apply_gates_numba, kernels._apply_gates_numpy)


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if a is None or b is None:
        return True
    return np.allclose(np.asarray(a), np.asarray(b), atol=1e-10)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10, help="matrix qubits for the transform and oracle cases")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18} {'size':<34} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}  agree")
    for name, size, call, (fast, slow) in cases(args.n, rng):
        ref = call(slow)
        out = call(fast)  # warm-up / compile
        tf = best_of(lambda: call(fast), args.repeat)
        ts = best_of(lambda: call(slow), args.repeat)
        print(f"{name:<18} {size:<34} {1e3 * tf:>10.2f} {1e3 * ts:>10.2f} {ts / tf:>7.1f}x  {_same(out, ref)}")


if __name__ == "__main__":
    main()
