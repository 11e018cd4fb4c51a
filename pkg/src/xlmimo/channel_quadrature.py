"""Angular average of the ring-scattering phase term.

Kept separate from the channel builder so the quadrature can be tested
directly against a brute-force integrator.
"""

from __future__ import annotations

import numpy as np


def ring_phase(diffs: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Phase -2*pi * e(alpha) . d for displacement rows d and angles alpha.

    diffs: (N, 2) displacements in wavelengths; alpha: (Q,) absolute arrival
    angles. Returns (N, Q).
    """
    e = np.stack([np.cos(alpha), np.sin(alpha)])          # (2, Q)
    return -2.0 * np.pi * (np.asarray(diffs) @ e)         # (N, Q)


def ring_correlation(diffs: np.ndarray, theta: float, delta: float,
                     nodes: int) -> np.ndarray:
    """(1/2*delta) * integral over [-delta, delta] of exp(j*phase(alpha+theta)).

    Gauss-Legendre with `nodes` points; exact up to quadrature error, and a
    nonnegative combination of rank-one terms, so assembled covariances stay
    PSD.
    """
    t, w = np.polynomial.legendre.leggauss(nodes)
    alpha = theta + delta * t                              # (Q,)
    phases = ring_phase(diffs, alpha)                      # (N, Q)
    # the delta from rescaling [-1,1] cancels against the 1/(2*delta) average
    return np.exp(1j * phases) @ (0.5 * w)
