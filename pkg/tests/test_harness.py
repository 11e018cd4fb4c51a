import numpy as np
import pytest

import xlmimo.harness as harness
from xlmimo.complexity import complexity_estimates
from xlmimo.config import SystemConfig
from xlmimo.harness import (CSV_HEADER, ExperimentResult, PointStats,
                            SerAccumulator, read_results, run_monte_carlo,
                            write_results)


def oracle_complexity(M, K, B, S, J, T):
    """Independent re-derivation of every closed form (expanded algebra)."""
    mb = M / B
    mf = J * K * 4 + J * K * S + J * mb + 3 * mb * K
    bp_per_sweep = 2 * S * K * (B - 1)
    lr_checks_per_sweep = K * B
    return {
        "mf_per_lpu": mf,
        "decentral_worst": T * (B * mf + bp_per_sweep + lr_checks_per_sweep),
        "decentral_best": B * mf + bp_per_sweep + K,
        "daisy_chain": M * K + 2 * M,
        "zf": K * K * K / 3 + M * K * K + M * K,
        "central_vmp": 3 * J * M + 2 * J * M * K + J * M * K * S + 3 * M * K,
        "sic_vmp": 1.5 * M * K * K + 0.5 * K * K * (B * S + 4 * B + 1) + M * K,
    }


class TestComplexity:
    def test_matches_oracle_on_random_tuples(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            M = int(rng.integers(1, 500))
            K = int(rng.integers(1, 64))
            B = int(rng.integers(1, 20))
            S = int(rng.choice([2, 4, 8, 16]))
            J = int(rng.integers(1, 6))
            T = int(rng.integers(1, 20))
            got = complexity_estimates(M, K, B, S, J, T)
            ref = oracle_complexity(M, K, B, S, J, T)
            assert set(got) == set(ref)
            for key in ref:
                assert got[key] == pytest.approx(ref[key], rel=1e-12), key

    def test_worst_at_least_best_everywhere(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            got = complexity_estimates(int(rng.integers(1, 400)),
                                       int(rng.integers(1, 50)),
                                       int(rng.integers(1, 16)),
                                       int(rng.choice([2, 4, 8])),
                                       int(rng.integers(1, 5)),
                                       int(rng.integers(1, 15)))
            assert got["decentral_worst"] >= got["decentral_best"]

    def test_single_block_single_sweep_collapses(self):
        got = complexity_estimates(30, 7, 1, 4, 2, 1)
        assert got["decentral_worst"] == pytest.approx(got["mf_per_lpu"] + 7)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            complexity_estimates(0, 4, 1, 4, 1, 1)


def small_config(**kw):
    base = dict(M=8, K=2, B=2, snr_db=(0.0,), J=1, T=2, gamma_thr=1e3,
                seed=5, cov_refresh=3, vr_length_scale=10.0)
    base.update(kw)
    return SystemConfig(**base)


class TestRunMonteCarlo:
    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            run_monte_carlo(small_config(), ("zf",), 0)

    def test_rejects_unknown_receiver(self):
        with pytest.raises(ValueError, match="unknown receiver"):
            run_monte_carlo(small_config(), ("mmse",), 2)

    def test_noiseless_zf_is_error_free(self):
        cfg = small_config(snr_db=(200.0,))
        result = run_monte_carlo(cfg, ("zf",), 12)
        stats = result.stats("zf", 200.0)
        assert stats.errors == 0
        assert stats.symbols == 12 * cfg.K
        assert stats.trials == 12

    def test_worker_counts_do_not_change_counts(self):
        cfg = small_config(snr_db=(0.0, 5.0))
        a = run_monte_carlo(cfg, ("mfbp", "zf", "bound"), 9, workers=1)
        b = run_monte_carlo(cfg, ("mfbp", "zf", "bound"), 9, workers=3)
        assert set(a.points) == set(b.points)
        for key in a.points:
            sa, sb = a.points[key], b.points[key]
            assert (sa.errors, sa.symbols, sa.trials) == \
                   (sb.errors, sb.symbols, sb.trials)
            assert (sa.consensus_agree, sa.consensus_pairs) == \
                   (sb.consensus_agree, sb.consensus_pairs)

    def test_receiver_subset_does_not_change_other_counts(self):
        cfg = small_config()
        full = run_monte_carlo(cfg, ("mfbp", "zf", "cvmp", "bound"), 6)
        only = run_monte_carlo(cfg, ("zf",), 6)
        sa, sb = full.stats("zf", 0.0), only.stats("zf", 0.0)
        assert (sa.errors, sa.symbols) == (sb.errors, sb.symbols)

    def test_failures_counted_and_trials_excluded(self, monkeypatch):
        calls = {"n": 0}
        real = harness.zf_detect

        def flaky(H, y, constellation, info=None):
            calls["n"] += 1
            if calls["n"] % 3 == 0:
                raise RuntimeError("synthetic failure")
            return real(H, y, constellation, info)

        monkeypatch.setattr(harness, "zf_detect", flaky)
        cfg = small_config()
        result = run_monte_carlo(cfg, ("zf", "bound"), 9, workers=1)
        zf = result.stats("zf", 0.0)
        assert zf.failures == 3
        assert zf.trials == 6
        assert zf.symbols == 6 * cfg.K
        # the other receiver is untouched
        assert result.stats("bound", 0.0).trials == 9
        assert result.total_failures == 3

    def test_consensus_tracked_for_mfbp_only(self):
        cfg = small_config()
        result = run_monte_carlo(cfg, ("mfbp", "zf"), 4)
        assert result.stats("mfbp", 0.0).consensus_pairs == 4 * cfg.K
        assert result.stats("zf", 0.0).consensus_pairs == 0


class TestAccumulator:
    def test_merge_is_entrywise_sum(self):
        a = SerAccumulator()
        a.cell("zf", 0.0).errors = 3
        a.cell("zf", 0.0).symbols = 10
        b = SerAccumulator()
        b.cell("zf", 0.0).errors = 1
        b.cell("zf", 0.0).symbols = 5
        b.cell("zf", 5.0).trials = 2
        a.merge(b)
        assert a.points[("zf", 0.0)].errors == 4
        assert a.points[("zf", 0.0)].symbols == 15
        assert a.points[("zf", 5.0)].trials == 2

    def test_stats_derived_quantities(self):
        s = PointStats(errors=25, symbols=100, trials=50)
        assert s.ser == 0.25
        assert s.stderr == pytest.approx(np.sqrt(0.25 * 0.75 / 100))


class TestWriteResults:
    def _result(self, cfg, points):
        return ExperimentResult(config=cfg, receivers=("zf",), points=points,
                                seed=cfg.seed, n_trials=3, wall_clock=1.0)

    def test_empty_result_writes_header_only(self, tmp_path):
        cfg = small_config()
        res = ExperimentResult(config=cfg, receivers=(), points={},
                               seed=cfg.seed, n_trials=0, wall_clock=0.0)
        path = tmp_path / "empty.csv"
        write_results(res, path)
        assert path.read_text() == CSV_HEADER + "\n"

    def test_round_trip_reproduces_counters(self, tmp_path):
        cfg = small_config()
        result = run_monte_carlo(cfg, ("zf", "bound"), 5)
        path = tmp_path / "out.csv"
        write_results(result, path)
        rows = read_results(path)
        assert len(rows) == 2
        for row in rows:
            s = result.stats(row["receiver"], row["snr_db"])
            assert row["errors"] == s.errors
            assert row["symbols"] == s.symbols
            assert row["trials"] == s.trials
            assert row["seed"] == cfg.seed

    def test_repeated_runs_are_byte_identical(self, tmp_path):
        cfg = small_config()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_results(run_monte_carlo(cfg, ("mfbp", "zf"), 6), p1)
        write_results(run_monte_carlo(cfg, ("mfbp", "zf"), 6), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_snapshot_sidecar_restores_config(self, tmp_path):
        from xlmimo.config import load_config
        cfg = small_config()
        path = tmp_path / "out.csv"
        write_results(run_monte_carlo(cfg, ("zf",), 3), path)
        assert load_config(tmp_path / "out.config") == cfg

    def test_io_errors_carry_path(self, tmp_path):
        cfg = small_config()
        res = self._result(cfg, {})
        with pytest.raises(OSError, match="no/such/dir"):
            write_results(res, tmp_path / "no/such/dir/out.csv")
