"""Pure-Python implementations of the hot kernels.

Signatures and return values match the compiled ``_kernels`` module so that
``orpf.kernels`` can pick either one at import time.
"""

import numpy as np

OK = 0
NOT_CONVERGED = 1
ZERO_VOLTAGE = 2
DIVERGED = 3


def zbus_fixed_point(X, s, eta, u_pcc, U_N, tol, max_iter):
    """Picard iteration u <- X i(u) + u_pcc 1 from a flat start.

    Returns ``(u, iterations, status, change)``; ``status`` is one of the
    module constants.
    """
    n = X.shape[0]
    u = np.full(n, u_pcc, dtype=complex)
    if n == 1:
        return u, 1, OK, 0.0
    s_load = s[1:]
    eta_load = eta[1:]
    change = np.inf
    for it in range(1, max_iter + 1):
        ul = u[1:]
        mag = np.abs(ul)
        if np.any((mag == 0.0) & (s_load != 0)):
            return u, it, ZERO_VOLTAGE, change
        with np.errstate(divide="ignore", invalid="ignore"):
            i_load = np.conj(s_load * (mag / U_N) ** eta_load / ul)
        i_load[s_load == 0] = 0.0
        # column 0 of X is zero, so the PCC current never enters u
        u_new = X[:, 1:] @ i_load + u_pcc
        if not np.all(np.isfinite(u_new)) or np.max(np.abs(u_new)) > 1e3 * U_N:
            return u_new, it, DIVERGED, np.inf
        change = float(np.max(np.abs(u_new - u)) / U_N)
        u = u_new
        if change < tol:
            return u, it, OK, change
    return u, max_iter, NOT_CONVERGED, change


def gossip_model_ensemble(M, g_fixed, q_opt, q_init, members, offsets,
                          blocks, block_offsets, schedule):
    """Model-mode runs driven by a precomputed cluster schedule.

    ``schedule`` is ``runs x T``; row ``k`` of the result holds
    J(q(t)) - J_opt for t = 0..T of run ``k``.
    """
    runs, T = schedule.shape
    out = np.empty((runs, T + 1))
    clusters = []
    for r in range(len(offsets) - 1):
        idx = members[offsets[r]:offsets[r + 1]]
        c = len(idx)
        P = blocks[block_offsets[r]:block_offsets[r] + c * c].reshape(c, c)
        clusters.append((idx, M[idx], g_fixed[idx], P))
    for k in range(runs):
        q = q_init.copy()
        x = q - q_opt
        out[k, 0] = 0.5 * x @ M @ x
        for t in range(T):
            idx, M_rows, g_r, P = clusters[schedule[k, t]]
            grad = M_rows @ q + g_r
            q[idx] -= P @ grad
            x = q - q_opt
            out[k, t + 1] = 0.5 * x @ M @ x
    return out
