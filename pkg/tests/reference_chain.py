"""Test-only straight-line re-derivation of the chain receiver.

Everything here is written with explicit per-user loops and scalar
arithmetic, independent of the package internals, so the vectorized
receiver can be checked message by message against it. SIC is assumed off
(threshold at infinity); the forced final-sweep argmax decisions do not
alter beliefs or messages.
"""

import numpy as np


def _norm_exp(logp):
    p = np.exp(np.asarray(logp, float) - max(logp))
    return p / p.sum()


def _mrc_beliefs(H, y, sigma2_n, syms):
    Mb, K = H.shape
    q0 = np.zeros((K, len(syms)))
    for k in range(K):
        hk = H[:, k]
        g = float(np.real(np.vdot(hk, hk)))
        xhat = complex(np.vdot(hk, y)) / g
        cross = 0.0
        for kp in range(K):
            if kp != k:
                cross += abs(complex(np.vdot(hk, H[:, kp]))) ** 2
        var = (cross / g + sigma2_n) / g
        q0[k] = _norm_exp([-abs(a - xhat) ** 2 / var for a in syms])
    return q0


def _lambda_bar(H, y, means, variances):
    Mb, K = H.shape
    fit = y.copy()
    for k in range(K):
        fit = fit - H[:, k] * means[k]
    Z = float(np.real(np.vdot(fit, fit)))
    for k in range(K):
        Z += variances[k] * float(np.real(np.vdot(H[:, k], H[:, k])))
    return Mb / Z


def _gaussian_message(H, y, means, lam, k):
    hk = H[:, k]
    g = float(np.real(np.vdot(hk, hk)))
    cleaned = y.copy()
    for kp in range(H.shape[1]):
        if kp != k:
            cleaned = cleaned - means[kp] * H[:, kp]
    mean = complex(np.vdot(hk, cleaned)) / g
    return mean, 1.0 / (lam * g)


def _combine(mean, var, left_pmf, right_pmf, syms):
    logp = []
    for i, a in enumerate(syms):
        v = -abs(a - mean) ** 2 / var
        if left_pmf is not None:
            v += np.log(left_pmf[i]) if left_pmf[i] > 0 else -np.inf
        if right_pmf is not None:
            v += np.log(right_pmf[i]) if right_pmf[i] > 0 else -np.inf
        logp.append(v)
    return _norm_exp(logp)


def _quotient(q_row, in_row):
    logp = []
    for i in range(len(q_row)):
        lq = np.log(q_row[i]) if q_row[i] > 0 else -np.inf
        lm = np.log(in_row[i]) if in_row[i] > 0 else -np.inf
        d = lq - lm
        logp.append(-np.inf if np.isnan(d) else d)
    return _norm_exp(logp)


def run_reference(H, y, sigma2_n, B, J, T, syms):
    """Sequential sweeps with SIC off; returns (trace dict, per-LPU decisions).

    Trace keys match the receiver's MessageTrace records.
    """
    M, K = H.shape
    Mb = M // B
    S = len(syms)
    blocks = [(H[b * Mb:(b + 1) * Mb], y[b * Mb:(b + 1) * Mb])
              for b in range(B)]
    q = [np.full((K, S), 1.0 / S) for _ in range(B)]
    rightward = [np.full((K, S), 1.0 / S) for _ in range(B - 1)]
    leftward = [np.full((K, S), 1.0 / S) for _ in range(B - 1)]
    decisions = [np.full(K, -1, dtype=int) for _ in range(B)]
    trace = {}

    for j in range(T):
        for b in range(B):
            Hb, yb = blocks[b]
            left_in = rightward[b - 1] if b > 0 else None
            right_in = leftward[b] if b < B - 1 else None
            trace[("active", j, b)] = np.arange(K)
            trace[("in_left", j, b)] = None if left_in is None else left_in.copy()
            trace[("in_right", j, b)] = None if right_in is None else right_in.copy()

            q[b] = _mrc_beliefs(Hb, yb, sigma2_n, syms)
            trace[("q0", j, b)] = q[b].copy()

            for i in range(J):
                means = [sum(q[b][k][s] * syms[s] for s in range(S))
                         for k in range(K)]
                variances = [sum(q[b][k][s] * abs(syms[s]) ** 2 for s in range(S))
                             - abs(means[k]) ** 2 for k in range(K)]
                lam = _lambda_bar(Hb, yb, means, variances)
                proj = np.zeros(K, complex)
                mvar = np.zeros(K)
                new_q = np.zeros((K, S))
                for k in range(K):
                    proj[k], mvar[k] = _gaussian_message(Hb, yb, means, lam, k)
                    new_q[k] = _combine(
                        proj[k], mvar[k],
                        None if left_in is None else left_in[k],
                        None if right_in is None else right_in[k], syms)
                q[b] = new_q
                trace[("lambda", j, b, i)] = lam
                trace[("mf_mean", j, b, i)] = proj.copy()
                trace[("mf_var", j, b, i)] = mvar.copy()
                trace[("q", j, b, i)] = q[b].copy()

            if j == T - 1:
                for k in range(K):
                    decisions[b][k] = int(np.argmax(q[b][k]))

            out_left = None
            out_right = None
            if b > 0:
                out_left = np.vstack([_quotient(q[b][k], left_in[k])
                                      for k in range(K)])
                leftward[b - 1] = out_left
            if b < B - 1:
                out_right = np.vstack([_quotient(q[b][k], right_in[k])
                                       for k in range(K)])
                rightward[b] = out_right
            trace[("out_left", j, b)] = None if out_left is None else out_left.copy()
            trace[("out_right", j, b)] = None if out_right is None else out_right.copy()

    return trace, np.vstack(decisions)
