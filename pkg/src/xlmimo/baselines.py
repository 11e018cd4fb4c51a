"""Centralized reference receivers: zero-forcing, central VMP and the
matched-filter single-user bound."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .config import SystemConfig
from .model import EPS_NORM, Constellation
from .receiver import ChainResult, mfbp_detect


def zf_detect(H: np.ndarray, y: np.ndarray, constellation: Constellation,
              info: dict | None = None) -> np.ndarray:
    """Zero-forcing: least-squares solve, then nearest-symbol mapping.

    Uses a stable least-squares solver rather than forming the inverse. If
    the Gram matrix is rank deficient (possible under extreme visibility
    masking) the solve is retried with a small ridge and flagged through
    `info` when provided.
    """
    H = np.asarray(H, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    M, K = H.shape
    if K > M:
        raise ValueError(f"zero-forcing needs K <= M, got K={K}, M={M}")
    x, _, rank, _ = np.linalg.lstsq(H, y, rcond=None)
    if rank < K:
        G = H.conj().T @ H
        ridge = 1e-10 * float(np.real(np.trace(G))) / K + 1e-300
        x = np.linalg.solve(G + ridge * np.eye(K), H.conj().T @ y)
        if info is not None:
            info["regularized"] = True
    return constellation.nearest(x)


def central_vmp_config(config: SystemConfig) -> SystemConfig:
    """The derived single-block configuration central VMP runs under.

    One sub-array covering the whole array, SIC disabled, and an iteration
    budget matching the decentralized receiver's total J*T message updates
    (overridable via j_central).
    """
    return replace(config, B=1, gamma_thr=float("inf"),
                   J=config.central_iterations, T=1, j_central=0,
                   readout_lpu=1)


def central_vmp(H: np.ndarray, y: np.ndarray, sigma2_n: float,
                config: SystemConfig,
                constellation: Constellation | None = None) -> np.ndarray:
    """Centralized mean-field detection on the full array."""
    return central_vmp_result(H, y, sigma2_n, config, constellation).readout


def central_vmp_result(H: np.ndarray, y: np.ndarray, sigma2_n: float,
                       config: SystemConfig,
                       constellation: Constellation | None = None) -> ChainResult:
    return mfbp_detect(H, y, sigma2_n, central_vmp_config(config), constellation)


def single_user_bound(H: np.ndarray, x_true: np.ndarray, sigma2_n: float,
                      rng: np.random.Generator, constellation: Constellation,
                      noise: np.ndarray | None = None,
                      info: dict | None = None) -> np.ndarray:
    """Genie matched-filter bound: every interferer ideally cancelled.

    Each user is detected alone on y_k = h_k x_k + n by matched-filter
    combining. By default the caller passes the trial's noise vector so the
    bound shares the trial randomness; with noise=None a fresh vector is
    drawn from rng. A user whose channel is all zero is an erasure: it gets
    a random symbol and is flagged through `info`.
    """
    H = np.asarray(H, dtype=np.complex128)
    M, K = H.shape
    x_true = np.asarray(x_true, dtype=np.int64)
    if noise is None:
        noise = np.sqrt(sigma2_n / 2.0) * (
            rng.standard_normal(M) + 1j * rng.standard_normal(M))
    g = np.sum(np.abs(H) ** 2, axis=0)
    vis = g >= EPS_NORM
    safe_g = np.where(vis, g, 1.0)
    x_sym = constellation.symbols[x_true]
    # per-user single-user observation, matched-filter combined
    est = (np.sum(H.conj() * (H * x_sym[None, :] + noise[:, None]), axis=0)
           / safe_g)
    decisions = constellation.nearest(est)
    if not np.all(vis):
        erased = np.flatnonzero(~vis)
        decisions[erased] = rng.integers(0, constellation.size, erased.size)
        if info is not None:
            info["erasures"] = info.get("erasures", 0) + erased.size
    return decisions
