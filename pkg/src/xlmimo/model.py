"""Core domain types and the discrete-belief algebra.

Beliefs over the symbol alphabet are plain 1-D numpy arrays (pmf over the
constellation points). Batches of beliefs are (K, S) arrays with one row per
user. All products and quotients of beliefs are done in log domain with
max-subtraction before exponentiation, so chains of near-zero probabilities
do not underflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Column with squared norm below this is treated as invisible to a sub-array.
EPS_NORM = 1e-12

# Log-domain headroom added to a capped quotient entry (division by zero in
# belief quotients saturates instead of producing inf).
LOG_DIV_CAP = 50.0


class UnderflowError(ArithmeticError):
    """A pmf collapsed to all zeros; caller decides the fallback."""


class ConfigError(ValueError):
    """Malformed configuration file or inconsistent parameter set."""


class ChannelModelError(RuntimeError):
    """Numerical failure while building or sampling a channel."""


@dataclass(frozen=True)
class Constellation:
    """Finite complex symbol alphabet with unit average energy.

    The default QPSK alphabet is Gray-mapped and ordered counterclockwise
    starting in the first quadrant:

        index 0: (+1+1j)/sqrt(2)   bits 00
        index 1: (-1+1j)/sqrt(2)   bits 01
        index 2: (-1-1j)/sqrt(2)   bits 11
        index 3: (+1-1j)/sqrt(2)   bits 10

    This order is fixed so CSV outputs are comparable across runs.
    """

    symbols: np.ndarray

    def __post_init__(self):
        syms = np.asarray(self.symbols, dtype=np.complex128)
        if syms.ndim != 1 or syms.size < 2:
            raise ValueError("constellation needs at least two symbols")
        if abs(np.mean(np.abs(syms) ** 2) - 1.0) > 1e-12:
            raise ValueError("constellation must have unit average symbol energy")
        if len(np.unique(syms)) != syms.size:
            raise ValueError("constellation symbols must be pairwise distinct")
        object.__setattr__(self, "symbols", syms)
        object.__setattr__(self, "_abs2", np.abs(syms) ** 2)

    @property
    def size(self) -> int:
        return self.symbols.size

    @property
    def energies(self) -> np.ndarray:
        """|a_i|^2 for every symbol."""
        return self._abs2

    @classmethod
    def qpsk(cls) -> "Constellation":
        base = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0)
        return cls(base)

    def nearest(self, values: np.ndarray) -> np.ndarray:
        """Indices of the nearest symbols (ties -> lowest index)."""
        values = np.atleast_1d(np.asarray(values, dtype=np.complex128))
        d2 = np.abs(values[:, None] - self.symbols[None, :]) ** 2
        return np.argmin(d2, axis=1)


def normalize(belief: np.ndarray) -> np.ndarray:
    """Scale a nonnegative weight vector to a pmf.

    Raises UnderflowError when every entry is zero (or the total is not
    finite); callers typically fall back to a uniform pmf.
    """
    belief = np.asarray(belief, dtype=np.float64)
    total = belief.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise UnderflowError("cannot normalize belief with non-positive mass")
    return belief / total


def normalize_log_rows(logp: np.ndarray) -> np.ndarray:
    """Exponentiate rows of log weights into pmfs, shifting by the row max.

    Rows whose entries are all -inf raise UnderflowError so the caller can
    apply its documented fallback.
    """
    logp = np.asarray(logp, dtype=np.float64)
    single = logp.ndim == 1
    rows = logp[None, :] if single else logp
    mx = np.max(rows, axis=1, keepdims=True)
    if not np.all(np.isfinite(mx)):
        raise UnderflowError("log-domain belief row has no finite entry")
    p = np.exp(rows - mx)
    p /= p.sum(axis=1, keepdims=True)
    return p[0] if single else p


def gaussian_to_belief(mean: complex, variance: float,
                       constellation: Constellation) -> np.ndarray:
    """Restrict a circular Gaussian density to the symbol alphabet.

    pmf[i] is proportional to exp(-|a_i - mean|^2 / variance). Computed in
    log domain with max-subtraction, so vanishing variance degrades cleanly
    to a delta on the nearest symbol.
    """
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    logp = -np.abs(constellation.symbols - mean) ** 2 / variance
    return normalize_log_rows(logp)


def belief_mean_var(q: np.ndarray, constellation: Constellation):
    """Mean and variance of the symbol under each belief row.

    q may be a single pmf or a (K, S) batch; returns arrays of matching
    leading shape. Variance is clipped at zero against roundoff.
    """
    q = np.asarray(q, dtype=np.float64)
    mean = q @ constellation.symbols
    var = q @ constellation.energies - np.abs(mean) ** 2
    return mean, np.maximum(var, 0.0)


def is_valid_pmf(q: np.ndarray, tol: float = 1e-9) -> bool:
    q = np.asarray(q)
    return bool(np.all(q >= -tol) and abs(q.sum() - 1.0) <= tol)


def delta_belief(index: int, size: int) -> np.ndarray:
    q = np.zeros(size)
    q[index] = 1.0
    return q


@dataclass(frozen=True)
class SubArrayIndexing:
    """Contiguous antenna ranges of the B sub-arrays, left to right."""

    M: int
    B: int
    slices: tuple = field(init=False)

    def __post_init__(self):
        if self.B < 1 or self.M < 1:
            raise ValueError("M and B must be positive")
        if self.M % self.B != 0:
            raise ValueError(f"B={self.B} must divide M={self.M}")
        mb = self.M // self.B
        object.__setattr__(
            self, "slices",
            tuple(slice(b * mb, (b + 1) * mb) for b in range(self.B)))

    @property
    def block_size(self) -> int:
        return self.M // self.B


def partition(H: np.ndarray, y: np.ndarray, idx: SubArrayIndexing):
    """Row-block views (H_b, y_b) per sub-array; concatenation restores H, y."""
    H = np.asarray(H)
    y = np.asarray(y)
    if H.shape[0] != idx.M or y.shape[0] != idx.M:
        raise ValueError(
            f"expected {idx.M} rows, got H {H.shape[0]} and y {y.shape[0]}")
    return [(H[s], y[s]) for s in idx.slices]
