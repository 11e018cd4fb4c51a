"""Monte Carlo symbol-error-rate engine with reproducible parallelism.

Trials are grouped into covariance batches: user geometry (angles,
visibility regions, covariances) is redrawn every `cov_refresh` trials and
shared by all SNR points of the batch. Every random draw comes from a
stream keyed by (seed, purpose, indices), so error counts are identical for
any worker count and any subset of requested receivers.
"""

from __future__ import annotations

import logging
import multiprocessing
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import central_vmp, single_user_bound, zf_detect
from .channel import draw_user_specs, generate_realization
from .config import SystemConfig, write_config
from .model import Constellation
from .receiver import consensus_partner, mfbp_detect

log = logging.getLogger(__name__)

RECEIVERS = ("mfbp", "zf", "cvmp", "bound")

# stream tags for counter-based seed derivation
_COV_STREAM = 1
_TRIAL_STREAM = 2
_BOUND_STREAM = 3

CSV_HEADER = "receiver,snr_db,ser,stderr,errors,symbols,trials,seed"


@dataclass
class PointStats:
    """Counters for one (receiver, snr) cell; a mergeable monoid."""

    errors: int = 0
    symbols: int = 0
    trials: int = 0
    failures: int = 0
    consensus_agree: int = 0
    consensus_pairs: int = 0

    def merge(self, other: "PointStats") -> None:
        self.errors += other.errors
        self.symbols += other.symbols
        self.trials += other.trials
        self.failures += other.failures
        self.consensus_agree += other.consensus_agree
        self.consensus_pairs += other.consensus_pairs

    @property
    def ser(self) -> float:
        return self.errors / self.symbols if self.symbols else float("nan")

    @property
    def stderr(self) -> float:
        if not self.symbols:
            return float("nan")
        p = self.ser
        return float(np.sqrt(p * (1.0 - p) / self.symbols))

    @property
    def consensus(self) -> float:
        if not self.consensus_pairs:
            return float("nan")
        return self.consensus_agree / self.consensus_pairs


class SerAccumulator:
    """Per-(receiver, snr) counters keyed by name and SNR point."""

    def __init__(self):
        self.points: dict = {}

    def cell(self, receiver: str, snr_db: float) -> PointStats:
        return self.points.setdefault((receiver, float(snr_db)), PointStats())

    def merge(self, other: "SerAccumulator") -> None:
        for key, stats in other.points.items():
            self.points.setdefault(key, PointStats()).merge(stats)


@dataclass
class ExperimentResult:
    config: SystemConfig
    receivers: tuple
    points: dict                      # (receiver, snr_db) -> PointStats
    seed: int
    n_trials: int
    wall_clock: float
    lr_rows: list = field(default_factory=list)

    def stats(self, receiver: str, snr_db: float) -> PointStats:
        return self.points[(receiver, float(snr_db))]

    @property
    def total_failures(self) -> int:
        return sum(s.failures for s in self.points.values())


def _trial_rng(seed: int, stream: int, *idx: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, *idx]))


def _run_batch(config: SystemConfig, receivers: tuple, n_trials: int,
               batch: int, record_lr: bool):
    """All trials of one covariance batch, across every SNR point."""
    constellation = Constellation.qpsk()
    S = constellation.size
    start = batch * config.cov_refresh
    stop = min(start + config.cov_refresh, n_trials)
    specs = draw_user_specs(config, _trial_rng(config.seed, _COV_STREAM, batch))
    acc = SerAccumulator()
    lr_rows = []
    mid = consensus_partner(config.B)
    for si, snr_db in enumerate(config.snr_db):
        for t in range(start, stop):
            rng_t = _trial_rng(config.seed, _TRIAL_STREAM, si, t)
            x_true = rng_t.integers(0, S, config.K)
            trial = generate_realization(config, specs, x_true, snr_db,
                                         rng_t, constellation)
            for name in receivers:
                cell = acc.cell(name, snr_db)
                try:
                    if name == "mfbp":
                        res = mfbp_detect(trial.H, trial.y, trial.sigma2_n,
                                          config, constellation,
                                          record_lr=record_lr)
                        decisions = res.readout
                        cell.consensus_agree += int(np.sum(
                            res.decisions[0] == res.decisions[mid]))
                        cell.consensus_pairs += config.K
                        if record_lr:
                            for row in res.lr_records:
                                lr_rows.append((t, *row, res.lambda_trace[row[0], row[1]],
                                                res.consensus_per_sweep[row[0]]))
                    elif name == "zf":
                        decisions = zf_detect(trial.H, trial.y, constellation)
                    elif name == "cvmp":
                        decisions = central_vmp(trial.H, trial.y,
                                                trial.sigma2_n, config,
                                                constellation)
                    elif name == "bound":
                        rng_b = _trial_rng(config.seed, _BOUND_STREAM, si, t)
                        shared = trial.noise if config.bound_noise == "shared" else None
                        decisions = single_user_bound(
                            trial.H, x_true, trial.sigma2_n, rng_b,
                            constellation, noise=shared)
                    else:
                        raise ValueError(f"unknown receiver '{name}'")
                except Exception:
                    log.warning("receiver %s failed on trial %d (snr %.3g dB)",
                                name, t, snr_db, exc_info=True)
                    cell.failures += 1
                    continue
                cell.errors += int(np.sum(decisions != x_true))
                cell.symbols += config.K
                cell.trials += 1
    return acc, lr_rows


def run_monte_carlo(config: SystemConfig, receivers, n_trials: int,
                    workers: int = 1, record_lr: bool = False) -> ExperimentResult:
    """Run n_trials per SNR point for each requested receiver.

    Every receiver sees the identical realizations. Failing trials are
    logged and excluded from that receiver's counts (never silently
    dropped). Results are identical for any worker count.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    receivers = tuple(receivers)
    for name in receivers:
        if name not in RECEIVERS:
            raise ValueError(f"unknown receiver '{name}'; pick from {RECEIVERS}")
    t0 = time.perf_counter()
    n_batches = -(-n_trials // config.cov_refresh)
    args = [(config, receivers, n_trials, b, record_lr) for b in range(n_batches)]
    acc = SerAccumulator()
    lr_rows = []
    if workers > 1 and n_batches > 1:
        with multiprocessing.Pool(processes=min(workers, n_batches)) as pool:
            parts = pool.starmap(_run_batch, args)
    else:
        parts = [_run_batch(*a) for a in args]
    for part, rows in parts:
        acc.merge(part)
        lr_rows.extend(rows)
    return ExperimentResult(
        config=config, receivers=receivers, points=acc.points,
        seed=config.seed, n_trials=n_trials,
        wall_clock=time.perf_counter() - t0, lr_rows=lr_rows)


def _fmt(v: float) -> str:
    return format(v, ".6g")


def write_results(result: ExperimentResult, path) -> None:
    """Write the per-point counters as CSV, plus a config snapshot sidecar.

    Floats are fixed at 6 significant digits so identical counters produce
    byte-identical files. The snapshot goes to the same path with its
    extension replaced by .config.
    """
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for name in result.receivers:
                for snr in result.config.snr_db:
                    s = result.stats(name, snr)
                    fh.write(",".join([
                        name, _fmt(snr), _fmt(s.ser), _fmt(s.stderr),
                        str(s.errors), str(s.symbols), str(s.trials),
                        str(result.seed)]) + "\n")
        write_config(result.config, _sidecar_path(path))
    except OSError as exc:
        raise OSError(f"failed writing results to {path}: {exc}") from exc


def _sidecar_path(path) -> str:
    base, _ = os.path.splitext(str(path))
    return base + ".config"


def read_results(path) -> list:
    """Parse a results CSV back into row dicts with exact counters."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            vals = line.strip().split(",")
            rows.append({
                "receiver": vals[0],
                "snr_db": float(vals[1]),
                "ser": float(vals[2]),
                "stderr": float(vals[3]),
                "errors": int(vals[4]),
                "symbols": int(vals[5]),
                "trials": int(vals[6]),
                "seed": int(vals[7]),
            })
    return rows


LR_TRACE_HEADER = "trial,sweep,lpu,user,lr,sic_fired,lambda_bar,consensus_frac"


def write_lr_trace(rows, path) -> None:
    """Per-(trial, sweep, lpu, user) SIC diagnostics; opt-in, can get large."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(LR_TRACE_HEADER + "\n")
        for trial, sweep, lpu, user, lr, fired, lam, cons in rows:
            fh.write(f"{trial},{sweep},{lpu},{user},{_fmt(lr)},"
                     f"{int(fired)},{_fmt(lam)},{_fmt(cons)}\n")
