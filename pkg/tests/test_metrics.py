import numpy as np
import pytest

from fablekit.metrics import (CSV_HEADER, PRESETS, ErrorLadder, ScalingFit, SweepConfig, SweepRecord,
                              error_at_budget, error_heatmap, fit_scaling, fit_size_scaling, instance_seed,
                              preset, read_csv, records_to_csv, rotations_for_accuracy, run_sweep)
from conftest import random_dense, random_sparse


class TestRotationsForAccuracy:
    def test_huge_eps(self):
        A = random_sparse(4, 2, seed=1)
        assert rotations_for_accuracy(A, 1e6, "FABLE").rotations == 0
        assert rotations_for_accuracy(A, 1e6, "SFABLE").rotations == 0

    def test_tiny_eps(self, rng):
        A = random_dense(rng, 3)
        res = rotations_for_accuracy(A, 1e-12, "FABLE")
        assert res.reached and res.rotations == 64

    def test_unreachable(self, rng):
        A = random_dense(rng, 3)
        res = rotations_for_accuracy(A, 1e-30, "FABLE")
        assert not res.reached and res.rotations == 64

    def test_minimal_on_boundaries(self):
        A = random_sparse(5, 3, seed=4)
        eps = 0.05
        lad = ErrorLadder(A, "SFABLE")
        res = rotations_for_accuracy(A, eps, "SFABLE", ladder=lad)
        cands = lad.candidate_budgets().tolist()
        i = cands.index(res.rotations)
        assert res.epsilon < eps and lad.error_at(cands[i - 1]) >= eps
        assert np.array_equal(lad.angles.keep_mask(res.delta), lad.angles.budget_mask(res.rotations))
        assert res.evaluations < 40

    def test_weakly_monotone_in_eps(self):
        A = random_sparse(6, 4, seed=2)
        for method in ("FABLE", "SFABLE"):
            counts = [rotations_for_accuracy(A, 2.0**-k, method).rotations for k in range(2, 14, 2)]
            assert counts == sorted(counts)

    def test_rejects(self):
        A = random_sparse(3, 1, seed=1)
        with pytest.raises(ValueError):
            rotations_for_accuracy(A, 0.0, "FABLE")
        with pytest.raises(ValueError):
            rotations_for_accuracy(A, 0.1, "LSFABLE")


class TestErrorAtBudget:
    def test_full_budget_exact(self, rng):
        for n in range(1, 6):
            A = random_dense(rng, n)
            assert error_at_budget(A, 4**n, "FABLE") <= 1e-10

    def test_ls_ignores_budget(self):
        A = random_sparse(5, 2, seed=3)
        assert error_at_budget(A, 0, "LSFABLE") == error_at_budget(A, 500, "LSFABLE")

    def test_range(self):
        with pytest.raises(ValueError):
            error_at_budget(random_sparse(2, 1, seed=1), 17, "FABLE")

    def test_fable_plateau(self):
        A = random_sparse(8, 4, seed=6)
        assert error_at_budget(A, A.nnz, "FABLE") > 0.3
        assert error_at_budget(A, A.nnz, "SFABLE") < 0.1


class TestFit:
    def test_synthetic_recovery(self):
        ref = ScalingFit(0.3087, 1.4634, -1.0778)
        recs = [(n, s, ref.predict(s, 2**n)) for n in range(7, 11) for s in (2, 4, 8)]
        fit = fit_scaling(recs)
        for got, want in zip((fit.coefficient, fit.s_exponent, fit.N_exponent), (0.3087, 1.4634, -1.0778)):
            assert got == pytest.approx(want, abs=1e-10)
        assert fit.residual < 1e-10

    def test_constant(self):
        fit = fit_scaling([(n, s, 0.25) for n in (3, 4, 5) for s in (1, 2)])
        assert abs(fit.s_exponent) < 1e-12 and abs(fit.N_exponent) < 1e-12
        assert fit.coefficient == pytest.approx(0.25)

    def test_rank_deficient(self):
        with pytest.raises(ValueError):
            fit_scaling([(n, 4, 0.1 * n) for n in range(3, 10)])
        with pytest.raises(ValueError):
            fit_scaling([(3, 2, 0.1), (4, 4, 0.2)])

    def test_aggregation_and_records(self):
        recs = [SweepRecord("SFABLE", n, s, k, 0.0, 1, 1, 1, 2.0 ** -n * s) for n in (4, 5, 6)
                for s in (1.0, 2.0) for k in range(3)]
        fit = fit_scaling(recs)
        assert fit.s_exponent == pytest.approx(1) and fit.N_exponent == pytest.approx(-1)
        assert fit_size_scaling([r for r in recs if r.s == 1.0]).N_exponent == pytest.approx(-1)


class TestHeatmap:
    def test_exact_fable(self, rng):
        m = error_heatmap(random_dense(rng, 3), "FABLE", tol=1e-12)
        assert np.abs(m.error).max() < 1e-12
        assert m.summary["all"]["exact"] == 64

    def test_support_split(self):
        A = random_sparse(5, 3, seed=2)
        m = error_heatmap(A, "SFABLE", budget=A.nnz)
        s = m.summary
        assert s["support"]["under"] + s["support"]["over"] + s["support"]["exact"] == A.nnz
        assert sum(s["all"].values()) == 1024
        assert m.epsilon > 0

    def test_guard(self):
        with pytest.raises(ValueError):
            error_heatmap(random_sparse(3, 1, seed=1), "LSFABLE", max_n=2)


class TestSweep:
    CFG = SweepConfig("t", "uniform_sparse", "budget", n=(4, 5), s=(2, 4), samples=2, seed=3)

    def test_records_and_bound(self):
        res = run_sweep(self.CFG)
        assert len(res.records) == 2 * 2 * 2 * 3
        assert res.bound_checks == 16 and res.bound_violations == 0
        assert 0 < res.max_bound_ratio < 0.1
        keys = [r.key for r in res.records]
        assert keys == sorted(keys)

    def test_csv_bytes_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_sweep(self.CFG, a)
        run_sweep(self.CFG, b)
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().splitlines()[0] == ",".join(CSV_HEADER)
        assert read_csv(a) == run_sweep(self.CFG).records

    def test_workers_do_not_change_output(self):
        assert run_sweep(self.CFG, workers=2).to_csv() == run_sweep(self.CFG, workers=1).to_csv()

    def test_threshold_and_accuracy_modes(self):
        thr = SweepConfig("t", "nonneg_sparse", "threshold", n=(4,), s=(2,), deltas=(1e-3, 1e-2),
                          methods=("FABLE", "SFABLE"))
        res = run_sweep(thr)
        assert len(res.records) == 4 and res.bound_violations == 0
        acc = SweepConfig("t", "uniform_sparse", "accuracy", n=(5,), s=(2,), eps=(0.1, 0.01),
                          methods=("SFABLE",))
        recs = run_sweep(acc).records
        assert [r.epsilon < e for r, e in zip(sorted(recs, key=lambda r: -r.delta), (0.1, 0.01))] == [True, True]

    def test_structured_prescaled(self):
        cfg = SweepConfig("t", "laplacian2d", "budget", n=(4,), params={"nx": 2})
        recs = run_sweep(cfg).records
        assert {r.method for r in recs} == {"FABLE", "SFABLE", "LSFABLE"}

    def test_ceiling(self):
        cfg = SweepConfig("t", "uniform_sparse", "budget", n=(3, 12), s=(1,))
        assert {n for n, _, _ in cfg.instances()} == {3}

    def test_timing_flag(self):
        cfg = SweepConfig("t", "uniform_sparse", "budget", n=(3,), s=(1,), timing=True)
        assert all(r.wall_time_ms > 0 for r in run_sweep(cfg).records)
        assert all(r.wall_time_ms == 0 for r in run_sweep(self.CFG).records)

    def test_io_error(self, tmp_path):
        with pytest.raises(OSError, match="missing"):
            run_sweep(SweepConfig("t", "uniform_sparse", "budget", n=(3,), s=(1,)), tmp_path / "missing" / "x.csv")

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SweepConfig("t", "uniform_sparse", "accuracy", n=(3,))
        with pytest.raises(ValueError):
            SweepConfig("t", "uniform_sparse", "walk", n=(3,))
        with pytest.raises(ValueError):
            SweepConfig.from_dict({"name": "t", "family": "uniform_sparse", "mode": "budget", "n": [3], "x": 1})
        d = self.CFG.as_dict()
        assert SweepConfig.from_dict(d) == self.CFG


def test_presets():
    for name in ("gates_vs_n_s4", "gates_vs_eps", "error_vs_n_s16", "large_uniform", "positive_thresholded", "positive_sign_flipped"):
        assert name in PRESETS
    assert preset("error_vs_n_s4", samples=2).samples == 2
    assert preset("large_uniform").max_n == 13
    with pytest.raises(KeyError):
        preset("no_such_preset")


def test_instance_seed_stable():
    assert instance_seed(1, 7, 4.0, 0) == instance_seed(1, 7, 4.0, 0)
    assert len({instance_seed(1, n, s, k) for n in (7, 8) for s in (2.0, 4.0) for k in range(5)}) == 20


def test_csv_formatting():
    r = SweepRecord("LSFABLE", 3, 0.5, 7, 0.0, 3, 10, 12, 0.1)
    assert records_to_csv([r]).splitlines()[1] == "LSFABLE,3,0.5,7,0,3,10,12,0.10000000000000001,0"
