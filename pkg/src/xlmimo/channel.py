"""Spatially non-stationary channel generator.

Each user sees the array only through a visibility region (VR): a contiguous
window of antennas. Inside the VR the channel is correlated according to a
one-ring scattering model; outside it the channel is exactly zero. Rows and
columns of the covariance outside the VR are therefore zero, the diagonal
inside it is one.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .channel_quadrature import ring_correlation
from .config import SystemConfig
from .model import ChannelModelError, Constellation


def ula_positions(M: int, spacing: float = 0.5) -> np.ndarray:
    """2-D coordinates (in wavelengths) of a uniform linear array on the x axis."""
    pos = np.zeros((M, 2))
    pos[:, 0] = np.arange(M) * spacing
    return pos


@dataclass(frozen=True)
class UserChannelSpec:
    """Per-user geometry and second-order statistics.

    `factor` is a cached matrix A with A A^H = R, used to draw channel
    vectors; it is supported on the VR rows only.
    """

    theta: float
    vr_center: int          # 0-indexed antenna
    vr_length: int          # drawn window length before edge truncation
    vr_mask: np.ndarray     # bool (M,)
    R: np.ndarray           # complex (M, M)
    factor: np.ndarray      # complex (M, r)


@dataclass(frozen=True)
class ChannelRealization:
    """One trial: channel matrix, noise and the composed received signal."""

    H: np.ndarray           # complex (M, K)
    sigma2_n: float
    y: np.ndarray           # complex (M,)
    x_true: np.ndarray      # int (K,) constellation indices
    noise: np.ndarray       # complex (M,)


def sample_vr(rng: np.random.Generator, M: int, mu_l: float, sigma2_l: float,
              vr_length_scale: float, mode: str = "log"):
    """Draw a visibility region: uniform center, lognormal length.

    The raw lognormal draw is a fraction-of-array multiplier: the window
    length is clamp(round(X * vr_length_scale * M), 1, M). In "log" mode
    (mu_l, sigma2_l) parametrize the underlying normal; in "linear" mode they
    are the mean and variance of the length distribution itself. The window
    is centered on the drawn antenna and truncated (not wrapped) at the array
    edges.
    """
    center = int(rng.integers(0, M))
    if mode == "log":
        mu, sigma = mu_l, np.sqrt(sigma2_l)
    elif mode == "linear":
        sigma2 = np.log1p(sigma2_l / mu_l**2)
        mu, sigma = np.log(mu_l) - sigma2 / 2.0, np.sqrt(sigma2)
    else:
        raise ValueError(f"unknown vr_length_mode '{mode}'")
    raw = rng.lognormal(mean=mu, sigma=sigma)
    length = int(np.clip(round(raw * vr_length_scale * M), 1, M))
    mask = vr_window_mask(M, center, length)
    return center, length, mask


def vr_window_mask(M: int, center: int, length: int) -> np.ndarray:
    # keep exactly `length` antennas: the window is clipped into the array
    # (slid inward at the edges), never wrapped
    start = min(max(center - (length - 1) // 2, 0), M - length)
    mask = np.zeros(M, dtype=bool)
    mask[start:start + length] = True
    return mask


def _quadrature_nodes(delta: float, max_dist: float) -> int:
    # Phase of the ring integrand varies by at most 2*delta * 2*pi*max_dist
    # over the integration interval; Gauss-Legendre needs node count on the
    # order of that variation to resolve the oscillations.
    variation = 2.0 * delta * 2.0 * np.pi * max_dist
    return max(64, int(np.ceil(0.75 * variation)) + 32)


def build_covariance(theta: float, vr_mask: np.ndarray, delta: float,
                     positions: np.ndarray, nodes: int | None = None) -> np.ndarray:
    """One-ring covariance restricted to a visibility region.

    Entry (p, q) is the average over arrival angles alpha in
    [theta - delta, theta + delta] of exp(-2j*pi * e(alpha) . (u_p - u_q))
    with e the unit wave direction and positions in wavelengths; it is zero
    whenever p or q lies outside the VR. The angular average is evaluated by
    Gauss-Legendre quadrature whose order grows with the largest in-VR
    antenna separation, keeping every entry within 1e-8 of the exact
    integral. Positive quadrature weights make the result PSD by
    construction.
    """
    positions = np.asarray(positions, dtype=np.float64)
    M = positions.shape[0]
    vr_mask = np.asarray(vr_mask, dtype=bool)
    if vr_mask.shape != (M,):
        raise ValueError("vr_mask length must match the antenna count")
    R = np.zeros((M, M), dtype=np.complex128)
    idx = np.flatnonzero(vr_mask)
    n = idx.size
    if n == 0:
        return R
    sub = positions[idx]
    iu, ju = np.triu_indices(n, k=1)
    diffs = sub[iu] - sub[ju]
    if nodes is None:
        max_dist = float(np.max(np.hypot(diffs[:, 0], diffs[:, 1]))) if diffs.size else 0.0
        nodes = _quadrature_nodes(delta, max_dist)
    if diffs.size:
        uniq, inverse = np.unique(diffs, axis=0, return_inverse=True)
        vals = ring_correlation(uniq, theta, delta, nodes)[inverse]
        block = np.eye(n, dtype=np.complex128)
        block[iu, ju] = vals
        block[ju, iu] = np.conj(vals)
    else:
        block = np.eye(1, dtype=np.complex128)
    R[np.ix_(idx, idx)] = block
    return R


def channel_factor(R: np.ndarray, user: int | None = None) -> np.ndarray:
    """Matrix A with A A^H = R via eigendecomposition of the VR block.

    The covariance is rank deficient by construction (zero rows outside the
    VR), so a Cholesky factorization would fail; eigenvalues below -1e-9 are
    rejected, small negative ones are truncated to zero.
    """
    R = np.asarray(R, dtype=np.complex128)
    M = R.shape[0]
    diag = np.real(np.diag(R))
    who = f" for user {user}" if user is not None else ""
    if diag.min() < -1e-9:
        raise ChannelModelError(
            f"covariance{who} has negative diagonal {diag.min():.3e}")
    support = np.flatnonzero(diag > 0)
    off_support = np.setdiff1d(np.arange(M), support)
    if off_support.size and np.max(np.abs(R[off_support, :])) > 1e-9:
        raise ChannelModelError(
            f"covariance{who} has mass on zero-diagonal rows (not PSD)")
    if support.size == 0:
        return np.zeros((M, 0), dtype=np.complex128)
    sub = R[np.ix_(support, support)]
    sub = 0.5 * (sub + sub.conj().T)
    try:
        w, U = np.linalg.eigh(sub)
    except np.linalg.LinAlgError as exc:
        raise ChannelModelError(f"eigendecomposition failed{who}") from exc
    if w.min() < -1e-9:
        raise ChannelModelError(
            f"covariance{who} is not PSD (min eigenvalue {w.min():.3e})")
    keep = w > 0
    A = np.zeros((M, int(keep.sum())), dtype=np.complex128)
    A[support] = U[:, keep] * np.sqrt(w[keep])
    return A


def draw_from_factor(factor: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    r = factor.shape[1]
    w = (rng.standard_normal(r) + 1j * rng.standard_normal(r)) / np.sqrt(2.0)
    return factor @ w


def sample_channel(R: np.ndarray, rng: np.random.Generator,
                   user: int | None = None) -> np.ndarray:
    """Draw h ~ CN(0, R); entries outside the covariance support are zero."""
    return draw_from_factor(channel_factor(R, user=user), rng)


def draw_user_specs(config: SystemConfig, rng: np.random.Generator,
                    positions: np.ndarray | None = None) -> list:
    """Fresh angles, visibility regions and covariances for all K users."""
    if positions is None:
        positions = ula_positions(config.M, config.antenna_spacing)
    specs = []
    for k in range(config.K):
        theta = rng.uniform(-np.pi / 2, np.pi / 2)
        center, length, mask = sample_vr(
            rng, config.M, config.mu_l, config.sigma2_l,
            config.vr_length_scale, mode=config.vr_length_mode)
        R = build_covariance(theta, mask, config.delta, positions)
        masked = R.copy()
        specs.append(UserChannelSpec(
            theta=theta, vr_center=center, vr_length=length, vr_mask=mask,
            R=masked, factor=channel_factor(masked, user=k)))
    return specs


def snr_db_to_noise_variance(snr_db: float) -> float:
    """SNR is 1/sigma2_n under unit received power."""
    return 10.0 ** (-snr_db / 10.0)


def generate_realization(config: SystemConfig, specs: list, x_true: np.ndarray,
                         snr_db: float, rng: np.random.Generator,
                         constellation: Constellation | None = None) -> ChannelRealization:
    """Compose y = H x + n for one trial.

    Draw order is fixed (per-user channel vectors in user order, then the
    noise vector) so a given rng stream reproduces the trial bit for bit.
    x_true holds constellation indices.
    """
    if constellation is None:
        constellation = Constellation.qpsk()
    x_true = np.asarray(x_true, dtype=np.int64)
    if x_true.shape != (config.K,):
        raise ValueError(f"x_true must have shape ({config.K},)")
    H = np.empty((config.M, config.K), dtype=np.complex128)
    for k, spec in enumerate(specs):
        h = draw_from_factor(spec.factor, rng)
        h[~spec.vr_mask] = 0.0
        H[:, k] = h
    sigma2_n = snr_db_to_noise_variance(snr_db)
    noise = np.sqrt(sigma2_n / 2.0) * (
        rng.standard_normal(config.M) + 1j * rng.standard_normal(config.M))
    x_sym = constellation.symbols[x_true]
    y = H @ x_sym + noise
    return ChannelRealization(H=H, sigma2_n=sigma2_n, y=y, x_true=x_true,
                              noise=noise)


_MAGIC = b"XLMM"


def dump_matrix(path, A: np.ndarray) -> None:
    """Write a complex matrix for debugging.

    Binary layout (any extension except .txt): 4-byte magic "XLMM", then
    little-endian uint64 rows and cols, then row-major complex entries as
    (real, imag) pairs of little-endian float64. A ".txt" path gets a
    textual "rows cols" header line followed by one "re im" pair per line.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.complex128))
    rows, cols = A.shape
    if str(path).endswith(".txt"):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{rows} {cols}\n")
            for v in A.reshape(-1):
                fh.write(f"{float(v.real)!r} {float(v.imag)!r}\n")
        return
    flat = np.empty(rows * cols * 2, dtype="<f8")
    flat[0::2] = A.real.reshape(-1)
    flat[1::2] = A.imag.reshape(-1)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", rows, cols))
        fh.write(flat.tobytes())


def load_matrix(path) -> np.ndarray:
    if str(path).endswith(".txt"):
        with open(path, encoding="utf-8") as fh:
            rows, cols = (int(t) for t in fh.readline().split())
            data = [complex(float(a), float(b))
                    for a, b in (line.split() for line in fh)]
        return np.array(data, dtype=np.complex128).reshape(rows, cols)
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a matrix dump")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        flat = np.frombuffer(fh.read(), dtype="<f8")
    return (flat[0::2] + 1j * flat[1::2]).reshape(rows, cols)
