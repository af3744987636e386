"""Comparison quantities, sweeps and scaling fits.

``n_F / n_S`` (rotations needed for a target error), ``eps_F / eps_S /
eps_LS`` (error with ``|A|`` rotations), threshold sweeps, log-log
regressions and the signed error maps.  Every error is the spectral norm of
``A`` minus the closed-form predicted block; the simulator is never used here.
"""

from __future__ import annotations

import csv
import io
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .angles import AngleSet
from .circuit import GateCounts, predict_counts
from .encoders import METHODS, from_angles, normalize_method, predicted_block, prepare_angles
from .generators import FAMILIES, GenSpec, generate
from .linalg import SparseMatrix, as_dense, max_abs_entry, spectral_norm

logger = logging.getLogger(__name__)

CSV_HEADER = ("method", "n", "s", "seed", "delta", "rotations", "cnots", "hadamards", "epsilon",
              "wall_time_ms")
MODES = ("budget", "accuracy", "threshold")
#: Families whose raw entries are not confined to [-1, 1]; divided by max|entry| first.
PRESCALED_FAMILIES = ("heisenberg", "laplacian2d")
DEFAULT_MAX_N = 11
WORKERS_ENV = "FABLEKIT_WORKERS"


@dataclass(frozen=True)
class SweepRecord:
    method: str
    n: int
    s: float
    seed: int
    delta: float
    rotations: int
    cnots: int
    hadamards: int
    epsilon: float
    wall_time_ms: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0 or min(self.rotations, self.cnots, self.hadamards) < 0:
            raise ValueError("errors and gate counts must be non-negative")

    @property
    def key(self):
        return (METHODS.index(self.method), self.n, self.s, self.seed, -self.delta, self.rotations)

    def row(self) -> list[str]:
        return [self.method, str(self.n), _fmt(self.s), str(self.seed), _fmt(self.delta),
                str(self.rotations), str(self.cnots), str(self.hadamards), _fmt(self.epsilon),
                _fmt(self.wall_time_ms)]


def _fmt(x) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ScalingFit:
    """``eps ~ coefficient * s**s_exponent * N**N_exponent``."""

    coefficient: float
    s_exponent: float
    N_exponent: float
    residual: float = 0.0

    def predict(self, s, N):
        return self.coefficient * np.power(s, self.s_exponent) * np.power(N, self.N_exponent)


#: Published regressions for unstructured sparse data, for comparison.
REFERENCE_FITS = {
    "SFABLE": ScalingFit(0.3087, 1.4634, -1.0778),
    "LSFABLE": ScalingFit(0.2969, 1.6709, -1.0191),
}


# --------------------------------------------------------------------------
# Error evaluation on a fixed angle set
# --------------------------------------------------------------------------

class ErrorLadder:
    """Errors of one matrix under different rotation selections.

    The transformed angles are computed once; each evaluation costs one
    inverse transform, an entrywise cosine and a spectral norm.
    """

    def __init__(self, A, method: str, normalize: str = "auto", rescale: bool = False, tol: float = 1e-8,
                 prepared=None):
        self.method = normalize_method(method)
        self.A = as_dense(A)
        if prepared is None:
            prepared = prepare_angles(A, self.method, normalize, rescale)
        self.n, self.scale, self.angles = prepared
        self.tol = tol
        self._by_budget: dict[int, float] = {}

    @property
    def N(self) -> int:
        return 1 << self.n

    def error(self, keep) -> float:
        block = predicted_block(self.method, self.scale, self.angles, keep)
        return spectral_norm(self.A - block, tol=self.tol)

    def error_at(self, budget: int) -> float:
        if budget not in self._by_budget:
            self._by_budget[budget] = self.error(self.angles.budget_mask(budget))
        return self._by_budget[budget]

    @property
    def evaluations(self) -> int:
        return len(self._by_budget)

    def candidate_budgets(self) -> np.ndarray:
        """Retained counts reachable by a threshold: 0 and every drop between distinct magnitudes."""
        ladder = self.angles.magnitude_ladder
        nz = self.angles.nonzero_count
        steps = np.flatnonzero(ladder[: nz - 1] > ladder[1:nz]) + 1 if nz > 1 else np.empty(0, np.int64)
        return np.unique(np.concatenate(([0], steps, [nz]))).astype(np.int64)

    def counts(self, keep) -> GateCounts:
        return predict_counts(self.angles, self.method, keep=keep)

    def bound(self, keep) -> float:
        """Worst-case error from dropping rotations: ``scale * N**3 * max dropped |angle|``."""
        return prop1_bound(self.angles, keep, self.scale)


def prop1_bound(angles: AngleSet, keep, scale: float = 1.0) -> float:
    dropped = np.abs(angles.values[~np.asarray(keep, dtype=bool)])
    top = float(dropped.max()) if dropped.size else 0.0
    return scale * float(angles.N) ** 3 * top


@dataclass(frozen=True)
class AccuracyResult:
    rotations: int
    delta: float
    epsilon: float
    reached: bool
    counts: GateCounts
    evaluations: int


def rotations_for_accuracy(A, eps: float, method: str, normalize: str = "auto", rescale: bool = False,
                           ladder: ErrorLadder | None = None) -> AccuracyResult:
    """Fewest retained rotations (largest first) giving error below ``eps``.

    Retained counts are restricted to threshold boundaries.  The scan walks
    them at geometrically growing strides from zero and stops at the first
    count that meets ``eps``; the last stride is then narrowed by bisection.
    The returned count therefore meets ``eps`` and the count before it (on
    the boundary list) does not.  If even the full set misses ``eps`` the
    full count is returned with ``reached=False``.
    """
    if eps <= 0:
        raise ValueError("target error must be positive")
    if ladder is None:
        ladder = ErrorLadder(A, method, normalize, rescale)
    if ladder.method == "LSFABLE":
        raise ValueError("LS-FABLE has a fixed rotation set; use error_at_budget")
    cands = ladder.candidate_budgets()
    ok = lambda i: ladder.error_at(int(cands[i])) < eps  # noqa: E731

    last = len(cands) - 1
    if ok(0):
        hit, miss = 0, None
    else:
        miss, stride = 0, 1
        while True:
            probe = min(miss + stride, last)
            if ok(probe):
                hit = probe
                break
            if probe == last:
                hit = None
                break
            miss, stride = probe, stride * 2
        if hit is not None:
            while hit - miss > 1:
                mid = (hit + miss) // 2
                if ok(mid):
                    hit = mid
                else:
                    miss = mid
    reached = hit is not None
    k = int(cands[hit if reached else last])
    keep = ladder.angles.budget_mask(k)
    return AccuracyResult(k, ladder.angles.threshold_for_budget(k), ladder.error_at(k), reached,
                          ladder.counts(keep), ladder.evaluations)


def error_at_budget(A, budget: int, method: str, normalize: str = "auto", rescale: bool = False,
                    ladder: ErrorLadder | None = None) -> float:
    """Error with the ``budget`` largest rotations kept (LS-FABLE ignores ``budget``)."""
    if ladder is None:
        ladder = ErrorLadder(A, method, normalize, rescale)
    if ladder.method == "LSFABLE":
        return ladder.error(ladder.angles.keep_mask(0.0))
    if not 0 <= budget <= ladder.angles.size:
        raise ValueError(f"budget {budget} outside [0, {ladder.angles.size}]")
    return ladder.error_at(int(budget))


# --------------------------------------------------------------------------
# Regressions
# --------------------------------------------------------------------------

def _triples(records):
    out = []
    for r in records:
        if isinstance(r, SweepRecord):
            out.append((r.n, r.s, r.epsilon))
        else:
            n, s, e = r
            out.append((n, s, e))
    return np.array(out, dtype=np.float64).reshape(-1, 3)


def group_means(records) -> np.ndarray:
    """Rows ``(n, s, mean eps)``, one per distinct ``(n, s)``."""
    data = _triples(records)
    keys = sorted({(n, s) for n, s, _ in data})
    return np.array([(n, s, data[(data[:, 0] == n) & (data[:, 1] == s), 2].mean()) for n, s in keys])


def _lstsq(X, y):
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise ValueError("rank-deficient design: need at least two distinct values per regressor")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return coef, float(np.sqrt(np.mean(resid**2)))


def fit_scaling(records, aggregate: bool = True) -> ScalingFit:
    """Least squares of ``log eps`` on ``log s`` and ``log N``.

    ``records`` are :class:`SweepRecord` objects or ``(n, s, eps)`` triples.
    With ``aggregate`` the errors of each ``(n, s)`` cell are averaged first.
    ``residual`` is the RMS log-residual.
    """
    data = group_means(records) if aggregate else _triples(records)
    if len(_triples(records)) < 6:
        raise ValueError("need at least 6 records")
    if np.any(data[:, 2] <= 0):
        raise ValueError("errors must be positive for a log-log fit")
    X = np.column_stack([np.ones(len(data)), np.log(data[:, 1]), data[:, 0] * np.log(2.0)])
    coef, resid = _lstsq(X, np.log(data[:, 2]))
    return ScalingFit(float(np.exp(coef[0])), float(coef[1]), float(coef[2]), resid)


def fit_size_scaling(records, aggregate: bool = True) -> ScalingFit:
    """``log eps`` against ``log N`` alone, for a corpus at one sparsity."""
    data = group_means(records) if aggregate else _triples(records)
    if np.any(data[:, 2] <= 0):
        raise ValueError("errors must be positive for a log-log fit")
    X = np.column_stack([np.ones(len(data)), data[:, 0] * np.log(2.0)])
    coef, resid = _lstsq(X, np.log(data[:, 2]))
    return ScalingFit(float(np.exp(coef[0])), 0.0, float(coef[1]), resid)


# --------------------------------------------------------------------------
# Signed error maps
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ErrorMap:
    """``A - predicted`` entrywise; positive entries are underestimates."""

    error: np.ndarray
    epsilon: float
    support: np.ndarray
    tol: float = 0.0

    def _tally(self, mask):
        e = self.error[mask]
        return {"under": int(np.sum(e > self.tol)), "over": int(np.sum(e < -self.tol)),
                "exact": int(np.sum(np.abs(e) <= self.tol))}

    @property
    def summary(self) -> dict:
        everything = np.ones_like(self.support)
        return {"all": self._tally(everything), "support": self._tally(self.support),
                "off_support": self._tally(~self.support)}

    def fraction_underestimated(self, mask=None) -> float:
        """Share of entries with ``error >= -tol`` (not overestimated)."""
        e = self.error if mask is None else self.error[mask]
        return float(np.mean(e >= -self.tol)) if e.size else 1.0


def error_heatmap(A, method: str, delta: float = 0.0, budget: int | None = None,
                  normalize: str = "auto", tol: float = 0.0, max_n: int = 10) -> ErrorMap:
    """Signed entrywise error of an encoding (``budget`` overrides ``delta``)."""
    method = normalize_method(method)
    n, scale, angles = prepare_angles(A, method, normalize)
    if n > max_n:
        raise ValueError(f"error maps are limited to n <= {max_n}")
    if method == "LSFABLE":
        keep = angles.keep_mask(0.0)
    else:
        keep = angles.budget_mask(budget) if budget is not None else angles.keep_mask(delta)
    enc = from_angles(method, n, scale, angles, keep, delta)
    dense = as_dense(A)
    err = dense - enc.predicted_block
    return ErrorMap(err, spectral_norm(err), dense != 0, tol)


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    """Declarative description of a sweep.

    ``samples`` is either one count or a mapping ``{n: count}``.  ``mode``
    selects the points per instance: ``budget`` (``|A|`` rotations),
    ``accuracy`` (fewest rotations per target in ``eps``) or ``threshold``
    (every ``delta`` in ``deltas``).
    """

    name: str
    family: str
    mode: str
    n: tuple = ()
    s: tuple = (0.0,)
    samples: object = 1
    seed: int = 0
    methods: tuple = METHODS
    eps: tuple = ()
    deltas: tuple = ()
    params: dict = field(default_factory=dict)
    normalize: str = "auto"
    prescale: bool | None = None
    timing: bool = False
    max_n: int = DEFAULT_MAX_N

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        object.__setattr__(self, "n", tuple(int(x) for x in self.n))
        object.__setattr__(self, "s", tuple(float(x) for x in self.s))
        object.__setattr__(self, "methods", tuple(normalize_method(m) for m in self.methods))
        object.__setattr__(self, "eps", tuple(float(x) for x in self.eps))
        object.__setattr__(self, "deltas", tuple(float(x) for x in self.deltas))
        if isinstance(self.samples, dict):
            object.__setattr__(self, "samples", {int(k): int(v) for k, v in self.samples.items()})
        if not self.n:
            raise ValueError("sweep needs at least one n")
        if self.mode == "accuracy" and not self.eps:
            raise ValueError("accuracy sweeps need eps targets")
        if self.mode == "threshold" and not self.deltas:
            raise ValueError("threshold sweeps need deltas")

    def samples_for(self, n: int) -> int:
        if isinstance(self.samples, dict):
            return self.samples.get(n, 1)
        return int(self.samples)

    @property
    def should_prescale(self) -> bool:
        return self.family in PRESCALED_FAMILIES if self.prescale is None else self.prescale

    def instances(self):
        """``(n, s, sample)`` triples within the size ceiling, in a fixed order."""
        out = []
        for n in self.n:
            if n > self.max_n:
                logger.warning("skipping n=%d above the ceiling n <= %d (raise max_n to include it)",
                               n, self.max_n)
                continue
            for s in self.s:
                out += [(n, s, k) for k in range(self.samples_for(n))]
        return out

    def as_dict(self) -> dict:
        d = asdict(self)
        for k in ("n", "s", "methods", "eps", "deltas"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SweepConfig:
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown sweep config keys: {sorted(extra)}")
        return cls(**d)


def instance_seed(base: int, n: int, s: float, sample: int) -> int:
    """64-bit seed for one corpus member, independent of worker scheduling."""
    key = [int(base) & 0xFFFF_FFFF, int(base) >> 32 & 0xFFFF_FFFF, n, int(round(s * 1000)), sample]
    return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0])


def instance_matrix(cfg: SweepConfig, n: int, s: float, seed: int):
    A = generate(GenSpec(cfg.family, n, s, seed, dict(cfg.params)))
    if cfg.should_prescale:
        peak = max_abs_entry(A)
        if peak > 0:
            A = A.scaled(1.0 / peak) if isinstance(A, SparseMatrix) else as_dense(A) / peak
    return A


@dataclass(frozen=True)
class SweepResult:
    records: list
    bound_checks: int = 0
    bound_violations: int = 0
    max_bound_ratio: float = 0.0

    def to_csv(self) -> str:
        return records_to_csv(self.records)


def _instance_points(args):
    cfg, (n, s, sample) = args
    seed = instance_seed(cfg.seed, n, s, sample)
    A = instance_matrix(cfg, n, s, seed)
    dense = as_dense(A)
    nnz = int(np.count_nonzero(dense))
    s_rel = nnz / (1 << n)
    records, ratios = [], []

    def emit(method, delta, keep, eps, t0, ladder):
        c = ladder.counts(keep)
        ms = (time.perf_counter() - t0) * 1e3 if cfg.timing else 0.0
        records.append(SweepRecord(method, n, s_rel, seed, float(delta), c.rotations, c.cnots,
                                   c.hadamards, float(eps), ms))
        if method != "LSFABLE":
            bound = ladder.bound(keep)
            ratios.append(eps / bound if bound > 0 else (0.0 if eps <= 1e-9 else np.inf))

    for method in cfg.methods:
        t0 = time.perf_counter()
        ladder = ErrorLadder(A, method, cfg.normalize)
        if method == "LSFABLE":
            keep = ladder.angles.keep_mask(0.0)
            emit(method, 0.0, keep, ladder.error(keep), t0, ladder)
            continue
        if cfg.mode == "budget":
            keep = ladder.angles.budget_mask(nnz)
            emit(method, ladder.angles.threshold_for_budget(nnz), keep, ladder.error_at(nnz), t0, ladder)
        elif cfg.mode == "threshold":
            for delta in cfg.deltas:
                t0 = time.perf_counter()
                keep = ladder.angles.keep_mask(delta)
                emit(method, delta, keep, ladder.error(keep), t0, ladder)
        else:
            for eps in cfg.eps:
                t0 = time.perf_counter()
                res = rotations_for_accuracy(dense, eps, method, ladder=ladder)
                if not res.reached:
                    logger.warning("%s n=%d seed=%d: eps=%g unreachable, full circuit gives %g",
                                   method, n, seed, eps, res.epsilon)
                emit(method, res.delta, ladder.angles.budget_mask(res.rotations), res.epsilon, t0, ladder)
    return records, ratios


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def run_sweep(cfg: SweepConfig, out=None, workers: int | None = None) -> SweepResult:
    """Evaluate every instance of ``cfg``; optionally write the CSV to ``out``.

    Instances run on a process pool of ``workers`` (default from
    ``FABLEKIT_WORKERS``); records are sorted before writing, so the file does
    not depend on scheduling.  Every FABLE / S-FABLE point is also checked
    against the drop-rotation worst-case bound.
    """
    workers = _workers() if workers is None else workers
    jobs = [(cfg, inst) for inst in cfg.instances()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_instance_points, jobs))
    else:
        parts = [_instance_points(j) for j in jobs]
    records = sorted((r for recs, _ in parts for r in recs), key=lambda r: r.key)
    ratios = [x for _, rs in parts for x in rs]
    violations = sum(1 for x in ratios if x > 1.0 + 1e-9)
    if violations:
        logger.error("%d sweep points exceed the worst-case threshold bound", violations)
    result = SweepResult(records, len(ratios), violations, max(ratios, default=0.0))
    if out is not None:
        write_csv(out, records)
    return result


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def write_csv(path, records) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(records_to_csv(records))
    except OSError as exc:
        raise OSError(f"cannot write sweep CSV {path}: {exc.strerror or exc}") from exc


def read_csv(path) -> list[SweepRecord]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise OSError(f"cannot read sweep CSV {path}: {exc.strerror or exc}") from exc
    return [SweepRecord(r["method"], int(r["n"]), float(r["s"]), int(r["seed"]), float(r["delta"]),
                        int(r["rotations"]), int(r["cnots"]), int(r["hadamards"]),
                        float(r["epsilon"]), float(r["wall_time_ms"])) for r in rows]


# --------------------------------------------------------------------------
# Presets for the standard experiments
# --------------------------------------------------------------------------

def _tiered_samples(ns, small_upto, count=100):
    return {n: (count if n <= small_upto else 1) for n in ns}


_EPS10 = (2.0**-10,)
_PAIR = ("FABLE", "SFABLE")
_XXX = {"Jx": 1.0, "Jy": 1.0, "Jz": 1.0, "hz": 0.0}
_SIZES = range(7, 14)
_POSITIVE_S = 3855 / 256

PRESETS = {cfg.name: cfg for cfg in (
    SweepConfig("gates_vs_n_s4", "uniform_sparse", "accuracy", n=_SIZES, s=(4,),
                samples=_tiered_samples(_SIZES, 10), methods=_PAIR, eps=_EPS10, seed=6),
    SweepConfig("gates_vs_n_s16", "uniform_sparse", "accuracy", n=_SIZES, s=(16,),
                samples=_tiered_samples(_SIZES, 10), methods=_PAIR, eps=_EPS10, seed=6),
    SweepConfig("gates_vs_eps", "uniform_sparse", "accuracy", n=(9, 10, 11), s=(4,), methods=("SFABLE",),
                eps=tuple(2.0**-k for k in range(1, 21)), seed=7),
    SweepConfig("gates_vs_s", "uniform_sparse", "accuracy", n=(10, 11, 12), s=tuple(2.0**k for k in range(6)),
                methods=("SFABLE",), eps=_EPS10, seed=8),
    SweepConfig("error_vs_n_s4", "uniform_sparse", "budget", n=_SIZES, s=(4,),
                samples=_tiered_samples(_SIZES, 11), seed=9),
    SweepConfig("error_vs_n_s16", "uniform_sparse", "budget", n=_SIZES, s=(16,),
                samples=_tiered_samples(_SIZES, 11), seed=9),
    SweepConfig("error_vs_s_n11", "uniform_sparse", "budget", n=(11,), s=tuple(2.0**k for k in range(7)), seed=10),
    SweepConfig("error_vs_s_n12", "uniform_sparse", "budget", n=(12,), s=tuple(2.0**k for k in range(7)), seed=10),
    SweepConfig("heisenberg_xxx", "heisenberg", "budget", n=range(6, 14), params=_XXX, seed=11),
    SweepConfig("heisenberg_random", "heisenberg", "budget", n=range(6, 14),
                samples=_tiered_samples(range(6, 14), 11), params={"random": True}, seed=11),
    SweepConfig("laplacian_dirichlet", "laplacian2d", "budget", n=_SIZES, params={"nx": 6, "periodic": False},
                seed=12),
    SweepConfig("laplacian_periodic", "laplacian2d", "budget", n=_SIZES, params={"nx": 6, "periodic": True},
                seed=12),
    SweepConfig("binary_corpus", "binary_sparse", "budget", n=_SIZES, s=(4,),
                samples=_tiered_samples(_SIZES, 11), seed=13),
    SweepConfig("nonneg_corpus", "nonneg_sparse", "budget", n=_SIZES, s=(4,),
                samples=_tiered_samples(_SIZES, 11), seed=13),
    SweepConfig("positive_thresholded", "thresholded_positive", "budget", n=(8,), s=(_POSITIVE_S,),
                params={"threshold": 0.7}, seed=14),
    SweepConfig("positive_sign_flipped", "thresholded_positive", "budget", n=(8,), s=(_POSITIVE_S,),
                params={"threshold": 0.7, "sign_flip": True}, seed=14),
    SweepConfig("large_uniform", "uniform_sparse", "accuracy", n=(13,), s=(12,), methods=_PAIR, eps=_EPS10,
                seed=1, max_n=13),
    SweepConfig("large_heisenberg", "heisenberg", "accuracy", n=(13,), methods=_PAIR, params=_XXX, eps=_EPS10,
                seed=2, max_n=13),
    SweepConfig("large_binary", "binary_sparse", "accuracy", n=(13,), s=(12,), methods=_PAIR, eps=_EPS10,
                seed=3, max_n=13),
)}


def preset(name: str, **overrides) -> SweepConfig:
    """Named preset, optionally with fields replaced (e.g. ``samples=5``, ``max_n=13``)."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return replace(PRESETS[name], **overrides) if overrides else PRESETS[name]


def memory_estimate_bytes(n: int) -> int:
    """Rough peak working set of one evaluation: a handful of dense ``N x N`` doubles."""
    return 6 * 8 * (1 << (2 * n))
