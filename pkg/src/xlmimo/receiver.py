"""Decentralized chain receiver: per-LPU mean-field symbol estimation,
belief-propagation exchange between adjacent sub-arrays, and local
successive interference cancellation.

Each of the B local processing units (LPUs) owns one contiguous sub-array.
A visit to an LPU runs a fixed number of mean-field iterations that jointly
refine the local symbol beliefs and a local noise-precision estimate, then
scans for users confident enough (likelihood ratio above a threshold) to be
hard-decided and cancelled from the local residual. Neighboring LPUs
exchange discrete beliefs through equality constraints on the shared user
symbols; the constraint makes message transport the identity, so the
transmitted message is simply the local belief divided by what arrived from
that side. Hard decisions travel the chain as delta beliefs and are adopted
by the neighbors.

The default schedule visits LPUs left to right within a sweep (information
propagates rightward within one sweep, leftward one hop per sweep). The
flooding schedule updates every LPU from the previous sweep's messages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .model import (
    EPS_NORM,
    LOG_DIV_CAP,
    Constellation,
    SubArrayIndexing,
    belief_mean_var,
    delta_belief,
    partition,
)

EPS_Z = 1e-12        # clamp on the residual-energy statistic
VAR_FLOOR = 1e-30    # keeps Gaussian-to-pmf restriction finite at zero variance

UNDECIDED = -1


@dataclass
class LpuState:
    """Mutable per-sub-array detection state.

    `active` marks users not yet hard-decided (the local working set);
    `decisions` stores constellation indices, UNDECIDED until the user is
    either SIC-cancelled or force-decided in the final sweep. Only
    SIC-cancelled users have their belief pinned to a delta.
    """

    b: int
    H_local: np.ndarray          # (M_b, K), columns of cancelled users stay
    y_residual: np.ndarray       # (M_b,)
    active: np.ndarray           # bool (K,)
    decisions: np.ndarray        # int (K,)
    q: np.ndarray                # (K, S) beliefs
    lambda_bar: float            # noise-precision estimate
    col_norm2: np.ndarray        # (K,) squared column norms of H_local
    visible: np.ndarray          # bool (K,) col_norm2 >= EPS_NORM

    @property
    def block_size(self) -> int:
        return self.H_local.shape[0]


@dataclass
class LinkMessages:
    """Beliefs in flight on the B-1 links of the LPU chain.

    rightward[l] travels from LPU l to LPU l+1, leftward[l] from LPU l+1 to
    LPU l. All start uniform.
    """

    rightward: list
    leftward: list

    @classmethod
    def uniform(cls, B: int, K: int, S: int) -> "LinkMessages":
        make = lambda: [np.full((K, S), 1.0 / S) for _ in range(B - 1)]
        return cls(rightward=make(), leftward=make())

    def copy(self) -> "LinkMessages":
        return LinkMessages(rightward=[m.copy() for m in self.rightward],
                            leftward=[m.copy() for m in self.leftward])

    def incoming(self, b: int, B: int):
        """(from_left, from_right) for LPU b; None at the chain ends."""
        left = self.rightward[b - 1] if b > 0 else None
        right = self.leftward[b] if b < B - 1 else None
        return left, right


@dataclass
class ChainResult:
    decisions: np.ndarray            # (B, K) per-LPU constellation indices
    readout: np.ndarray              # (K,) decisions of the read-out LPU
    beliefs: np.ndarray              # (B, K, S) final beliefs
    lambda_trace: np.ndarray         # (T, B)
    sic_counts: np.ndarray           # (T, B)
    consensus_per_sweep: np.ndarray  # (T,) belief-argmax agreement
    consensus_final: float           # decision agreement, LPU 1 vs mid LPU
    consensus_lpu: int               # 0-indexed partner used for consensus
    warnings: dict
    lr_records: list | None = None   # (sweep, lpu, user, lr, fired) rows


class MessageTrace:
    """Optional recorder of every message and belief the receiver produces.

    Keys: ("active"|"q0"|"in_left"|"in_right"|"out_left"|"out_right", j, b)
    and ("lambda"|"mf_mean"|"mf_var"|"q", j, b, i). Arrays are copies.
    """

    def __init__(self):
        self.records = {}

    def put(self, key, value):
        if isinstance(value, np.ndarray):
            value = value.copy()
        self.records[key] = value


def _safe_log(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(p)


def _rows_to_pmf(logq: np.ndarray) -> np.ndarray:
    mx = np.max(logq, axis=1, keepdims=True)
    p = np.exp(logq - mx)
    p /= p.sum(axis=1, keepdims=True)
    return p


def make_lpu(b: int, H_b: np.ndarray, y_b: np.ndarray, K: int, S: int,
             sigma2_n: float, lambda_init: str) -> LpuState:
    H_b = np.array(H_b, dtype=np.complex128)
    y_b = np.array(y_b, dtype=np.complex128)
    col_norm2 = np.sum(np.abs(H_b) ** 2, axis=0)
    if lambda_init == "true":
        lam0 = 1.0 / max(sigma2_n, EPS_Z)
    else:
        lam0 = H_b.shape[0] / max(float(np.vdot(y_b, y_b).real), EPS_Z)
    return LpuState(
        b=b, H_local=H_b, y_residual=y_b,
        active=np.ones(K, dtype=bool),
        decisions=np.full(K, UNDECIDED, dtype=np.int64),
        q=np.full((K, S), 1.0 / S),
        lambda_bar=lam0,
        col_norm2=col_norm2,
        visible=col_norm2 >= EPS_NORM)


def mrc_initialize(lpu: LpuState, constellation: Constellation,
                   sigma2_n: float) -> None:
    """Matched-filter restart of the still-active beliefs.

    For each active user: estimate = h^H y / |h|^2; the variance charges the
    residual cross-correlation with the other active columns (unit symbol
    power) plus the channel noise, scaled by the combining gain. The
    Gaussian is then restricted to the alphabet. Users invisible to this
    sub-array get a uniform belief and are decided by their neighbors.
    """
    act = np.flatnonzero(lpu.active)
    if act.size == 0:
        return
    Ha = lpu.H_local[:, act]
    g = lpu.col_norm2[act]
    vis = lpu.visible[act]
    safe_g = np.where(vis, g, 1.0)
    xhat = (Ha.conj().T @ lpu.y_residual) / safe_g
    G = Ha.conj().T @ Ha
    cross = np.sum(np.abs(G) ** 2, axis=1) - np.real(np.diag(G)) ** 2
    var = (cross / safe_g + sigma2_n) / safe_g
    d2 = np.abs(constellation.symbols[None, :] - xhat[:, None]) ** 2
    logq = -d2 / np.maximum(var, VAR_FLOOR)[:, None]
    logq[~vis] = 0.0
    lpu.q[act] = _rows_to_pmf(logq)


def _stats(lpu: LpuState, act: np.ndarray, constellation: Constellation):
    return belief_mean_var(lpu.q[act], constellation)


def _noise_precision_from_stats(lpu: LpuState, act: np.ndarray,
                                means: np.ndarray, variances: np.ndarray) -> float:
    fit = lpu.y_residual - lpu.H_local[:, act] @ means
    Z = float(np.vdot(fit, fit).real) + float(variances @ lpu.col_norm2[act])
    return lpu.block_size / max(Z, EPS_Z)


def update_noise_precision(lpu: LpuState, constellation: Constellation) -> float:
    """Refresh the Gamma-mean noise-precision estimate M_b / Z.

    Z is the squared norm of the reconstruction residual under the current
    belief means plus the belief variances weighted by the column energies,
    summed over active users only (cancelled users are already out of the
    residual). Z is clamped below at EPS_Z.
    """
    act = np.flatnonzero(lpu.active)
    means, variances = _stats(lpu, act, constellation)
    lpu.lambda_bar = _noise_precision_from_stats(lpu, act, means, variances)
    return lpu.lambda_bar


def _observation_messages(lpu: LpuState, act: np.ndarray, means: np.ndarray,
                          lam: float):
    """Gaussian message parameters from the local observation factor.

    mean_k = h_k^H (y - sum_{k' != k} mean_{k'} h_{k'}) / |h_k|^2,
    var_k = 1 / (lambda * |h_k|^2), for active users; invisible users carry
    no observation evidence (flat message).
    """
    Ha = lpu.H_local[:, act]
    g = lpu.col_norm2[act]
    vis = lpu.visible[act]
    safe_g = np.where(vis, g, 1.0)
    resid = lpu.y_residual - Ha @ means
    proj = (Ha.conj().T @ resid) / safe_g + means
    msg_var = 1.0 / (lam * safe_g)
    return proj, msg_var, vis


def vmp_symbol_message(lpu: LpuState, k: int, constellation: Constellation):
    """Observation-factor message for one active user.

    Returns (mean, variance), or None when the user's local column is
    invisible (flat contribution).
    """
    if not lpu.active[k]:
        raise ValueError(f"user {k} is not active at LPU {lpu.b}")
    act = np.flatnonzero(lpu.active)
    means, _ = _stats(lpu, act, constellation)
    proj, msg_var, vis = _observation_messages(lpu, act, means, lpu.lambda_bar)
    pos = int(np.searchsorted(act, k))
    if not vis[pos]:
        return None
    return complex(proj[pos]), float(msg_var[pos])


def _combine_rows(loglik: np.ndarray, log_left, log_right, warnings: dict) -> np.ndarray:
    """Belief update: observation evidence times the neighbor messages.

    Rows whose product vanishes (conflicting deltas from the two sides) fall
    back to the observation evidence alone; a row with no evidence at all
    goes uniform. Both fallbacks bump the conflict counter.
    """
    logq = loglik.copy()
    if log_left is not None:
        logq = logq + log_left
    if log_right is not None:
        logq = logq + log_right
    dead = ~np.isfinite(np.max(logq, axis=1))
    if dead.any():
        warnings["belief_conflicts"] += int(dead.sum())
        logq[dead] = loglik[dead]
        still = ~np.isfinite(np.max(logq, axis=1))
        if still.any():
            logq[still] = 0.0
    return _rows_to_pmf(logq)


def combine_belief(msg_mf, msg_left, msg_right, constellation: Constellation,
                   warnings: dict | None = None) -> np.ndarray:
    """One user's belief from the observation message and neighbor beliefs.

    msg_mf is (mean, variance) or None for a flat observation contribution;
    msg_left / msg_right are pmfs or None at the chain ends (the uniform
    prior on the first LPU drops out under normalization).
    """
    if warnings is None:
        warnings = {"belief_conflicts": 0}
    if msg_mf is None:
        loglik = np.zeros((1, constellation.size))
    else:
        mean, variance = msg_mf
        d2 = np.abs(constellation.symbols - mean) ** 2
        loglik = (-d2 / max(variance, VAR_FLOOR))[None, :]
    log_l = None if msg_left is None else _safe_log(np.asarray(msg_left))[None, :]
    log_r = None if msg_right is None else _safe_log(np.asarray(msg_right))[None, :]
    return _combine_rows(loglik, log_l, log_r, warnings)[0]


def _quotient_rows(q: np.ndarray, incoming: np.ndarray, warnings: dict) -> np.ndarray:
    """Entrywise belief division q / incoming, normalized per row.

    0/0 counts as zero; a positive belief over a vanished incoming entry
    saturates at a large finite log value (and bumps a counter) instead of
    overflowing.
    """
    with np.errstate(invalid="ignore"):
        diff = _safe_log(q) - _safe_log(incoming)
    diff[np.isnan(diff)] = -np.inf
    capped = np.isposinf(diff)
    if capped.any():
        warnings["bp_division_caps"] += int(capped.sum())
        finite = np.where(np.isfinite(diff), diff, -np.inf)
        row_max = np.max(finite, axis=1)
        row_max[~np.isfinite(row_max)] = 0.0
        fill = np.broadcast_to(row_max[:, None] + LOG_DIV_CAP, diff.shape)
        diff[capped] = fill[capped]
    return _rows_to_pmf(diff)


def bp_outgoing(q: np.ndarray, incoming_from_that_side: np.ndarray,
                warnings: dict | None = None) -> np.ndarray:
    """Belief sent across a link: local belief divided by what that side sent.

    The equality factor on the link forwards messages unchanged, so this
    quotient is exactly what the neighbor receives.
    """
    if warnings is None:
        warnings = {"bp_division_caps": 0}
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    m = np.atleast_2d(np.asarray(incoming_from_that_side, dtype=np.float64))
    out = _quotient_rows(q, m, warnings)
    return out[0] if out.shape[0] == 1 else out


def lr_metric(q: np.ndarray) -> float:
    """Ratio of the largest to the second-largest symbol probability."""
    q = np.asarray(q, dtype=np.float64)
    top2 = np.partition(q, q.size - 2)[-2:]
    if top2[0] == 0.0:
        return math.inf
    return float(top2[1] / top2[0])


def _lr_rows(q: np.ndarray) -> np.ndarray:
    top2 = np.partition(q, q.shape[1] - 2, axis=1)[:, -2:]
    with np.errstate(divide="ignore"):
        return np.where(top2[:, 0] > 0.0, top2[:, 1] / np.maximum(top2[:, 0], 1e-300),
                        np.inf)


def sic_detect_and_cancel(lpu: LpuState, k: int, constellation: Constellation,
                          gamma_thr: float) -> int:
    """Hard-decide user k, subtract its contribution, pin its belief.

    Caller must have established the likelihood-ratio condition; calling
    without it is a contract violation. Ties in the argmax go to the lowest
    symbol index. The cancelled column stays in H_local but leaves the
    active set, so it no longer enters interference sums.
    """
    if not lpu.active[k]:
        raise ValueError(f"user {k} already decided at LPU {lpu.b}")
    if not lr_metric(lpu.q[k]) >= gamma_thr:
        raise ValueError(
            f"SIC called for user {k} at LPU {lpu.b} without the LR condition")
    s = int(np.argmax(lpu.q[k]))
    lpu.decisions[k] = s
    lpu.active[k] = False
    lpu.y_residual = lpu.y_residual - constellation.symbols[s] * lpu.H_local[:, k]
    lpu.q[k] = delta_belief(s, constellation.size)
    return s


def _force_detect(lpu: LpuState, k: int) -> None:
    # Final-sweep fallback: record the argmax without cancelling or pinning.
    lpu.decisions[k] = int(np.argmax(lpu.q[k]))
    lpu.active[k] = False


def _visit_lpu(lpu: LpuState, left_in, right_in, j: int, last_sweep: bool,
               config: SystemConfig, constellation: Constellation,
               sigma2_n: float, warnings: dict, trace: MessageTrace | None,
               lr_records: list | None):
    """One LPU turn: matched-filter restart, J mean-field iterations with
    the neighbor messages folded in, the SIC scan, and the outgoing beliefs.

    Returns (out_left, out_right); either is None at a chain end.
    """
    if trace is not None:
        trace.put(("active", j, lpu.b), np.flatnonzero(lpu.active))
        trace.put(("in_left", j, lpu.b), left_in)
        trace.put(("in_right", j, lpu.b), right_in)

    mrc_initialize(lpu, constellation, sigma2_n)
    if trace is not None:
        trace.put(("q0", j, lpu.b), lpu.q)

    act = np.flatnonzero(lpu.active)
    log_left = None if left_in is None else _safe_log(left_in[act])
    log_right = None if right_in is None else _safe_log(right_in[act])
    for i in range(config.J):
        means, variances = _stats(lpu, act, constellation)
        lam = _noise_precision_from_stats(lpu, act, means, variances)
        lpu.lambda_bar = lam
        if act.size:
            proj, msg_var, vis = _observation_messages(lpu, act, means, lam)
            d2 = np.abs(constellation.symbols[None, :] - proj[:, None]) ** 2
            loglik = -d2 / np.maximum(msg_var, VAR_FLOOR)[:, None]
            loglik[~vis] = 0.0
            lpu.q[act] = _combine_rows(loglik, log_left, log_right, warnings)
        if trace is not None:
            trace.put(("lambda", j, lpu.b, i), lam)
            if act.size:
                trace.put(("mf_mean", j, lpu.b, i), proj)
                trace.put(("mf_var", j, lpu.b, i), msg_var)
            trace.put(("q", j, lpu.b, i), lpu.q)

    sic_fired = 0
    if act.size:
        gammas = _lr_rows(lpu.q[act])
        for pos, k in enumerate(act):
            fired = gammas[pos] >= config.gamma_thr
            if fired:
                sic_detect_and_cancel(lpu, int(k), constellation, config.gamma_thr)
                sic_fired += 1
            elif last_sweep:
                _force_detect(lpu, int(k))
            if lr_records is not None:
                lr_records.append((j, lpu.b, int(k), float(gammas[pos]), bool(fired)))

    out_left = None if lpu.b == 0 else _quotient_rows(lpu.q, left_in, warnings)
    out_right = None if right_in is None else _quotient_rows(lpu.q, right_in, warnings)
    if trace is not None:
        trace.put(("out_left", j, lpu.b), out_left)
        trace.put(("out_right", j, lpu.b), out_right)
    return out_left, out_right, sic_fired


def consensus_partner(B: int) -> int:
    """0-indexed partner LPU for consensus diagnostics (the mid-chain LPU)."""
    return (B + 1) // 2 - 1


def mfbp_detect(H: np.ndarray, y: np.ndarray, sigma2_n: float,
                config: SystemConfig, constellation: Constellation | None = None,
                trace: MessageTrace | None = None,
                record_lr: bool = False) -> ChainResult:
    """Run the full decentralized detection over the LPU chain.

    Outer sweeps j = 1..T visit every LPU; each visit restarts the active
    beliefs by matched filtering, runs J mean-field iterations with the
    current neighbor messages held fixed, fires local SIC for users whose
    likelihood ratio clears the threshold, and finally exports beliefs to
    both neighbors. Users still undecided in the last sweep are decided by
    belief argmax without cancellation. Decisions can be read from any LPU;
    all B decision vectors are returned along with per-sweep diagnostics.
    """
    if constellation is None:
        constellation = Constellation.qpsk()
    H = np.asarray(H, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    M, K = H.shape
    idx = SubArrayIndexing(M=M, B=config.B)
    S = constellation.size
    blocks = partition(H, y, idx)
    lpus = [make_lpu(b, Hb, yb, K, S, sigma2_n, config.lambda_init)
            for b, (Hb, yb) in enumerate(blocks)]
    links = LinkMessages.uniform(config.B, K, S)
    warnings = {
        "belief_conflicts": 0,
        "bp_division_caps": 0,
        "invisible_pairs": int(sum((~lpu.visible).sum() for lpu in lpus)),
    }
    lr_records = [] if record_lr else None

    B, T = config.B, config.T
    mid = consensus_partner(B)
    lambda_trace = np.zeros((T, B))
    sic_counts = np.zeros((T, B), dtype=np.int64)
    consensus_sweep = np.zeros(T)

    for j in range(T):
        last = j == T - 1
        if config.schedule == "flooding":
            staged = links.copy()
        for b in range(B):
            left_in, right_in = links.incoming(b, B)
            out_left, out_right, fired = _visit_lpu(
                lpus[b], left_in, right_in, j, last, config, constellation,
                sigma2_n, warnings, trace, lr_records)
            target = staged if config.schedule == "flooding" else links
            if out_right is not None:
                target.rightward[b] = out_right
            if out_left is not None:
                target.leftward[b - 1] = out_left
            sic_counts[j, b] = fired
            lambda_trace[j, b] = lpus[b].lambda_bar
        if config.schedule == "flooding":
            links = staged
        consensus_sweep[j] = float(np.mean(
            np.argmax(lpus[0].q, axis=1) == np.argmax(lpus[mid].q, axis=1)))

    decisions = np.stack([lpu.decisions for lpu in lpus])
    beliefs = np.stack([lpu.q for lpu in lpus])
    consensus_final = float(np.mean(decisions[0] == decisions[mid]))
    return ChainResult(
        decisions=decisions,
        readout=decisions[config.readout_lpu - 1].copy(),
        beliefs=beliefs,
        lambda_trace=lambda_trace,
        sic_counts=sic_counts,
        consensus_per_sweep=consensus_sweep,
        consensus_final=consensus_final,
        consensus_lpu=mid,
        warnings=warnings,
        lr_records=lr_records)
