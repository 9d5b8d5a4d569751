"""NumPy implementations of the decoding kernels.

All functions take masked scores: entries at or below ``NEG / 2`` are treated
as forbidden. Forward-backward runs in rescaled probability space so the
per-step work is a BLAS matrix-vector product.
"""
import numpy as np

NEG = -1e30


def viterbi(em, trans, start, end):
    """Best path; ties go to the lexicographically smallest tag sequence.

    Suffix maxima are computed right to left, then the path is read off left
    to right taking the lowest index among equal candidates.
    """
    T, K = em.shape
    best = np.empty((T, K))
    best[T - 1] = em[T - 1] + end
    for t in range(T - 2, -1, -1):
        best[t] = em[t] + (trans + best[t + 1][None, :]).max(axis=1)
    path = np.empty(T, dtype=np.intp)
    path[0] = np.argmax(start + best[0])
    for t in range(1, T):
        path[t] = np.argmax(trans[path[t - 1]] + best[t])
    return path


def _prep(em, trans, start, end):
    mt = trans.max()
    M = np.exp(trans - mt)
    me = em.max(axis=1)
    E = np.exp(em - me[:, None])
    ms = start.max()
    S = np.exp(start - ms)
    mx = end.max()
    X = np.exp(end - mx)
    return mt, M, me, E, ms, S, mx, X


def _forward(em, trans, start, end):
    T, K = em.shape
    mt, M, me, E, ms, S, mx, X = _prep(em, trans, start, end)
    alpha = np.empty((T, K))
    la = np.empty(T)
    a = S * E[0]
    z = a.sum()
    if z <= 0.0:
        return None
    alpha[0] = a / z
    la[0] = ms + me[0] + np.log(z)
    for t in range(1, T):
        a = (alpha[t - 1] @ M) * E[t]
        z = a.sum()
        if z <= 0.0:
            return None
        alpha[t] = a / z
        la[t] = la[t - 1] + mt + me[t] + np.log(z)
    zf = alpha[T - 1] @ X
    if zf <= 0.0:
        return None
    log_z = la[T - 1] + mx + np.log(zf)
    return log_z, alpha, la, (mt, M, me, E, mx, X)


def log_partition(em, trans, start, end):
    out = _forward(em, trans, start, end)
    return -np.inf if out is None else float(out[0])


def forward_backward(em, trans, start, end):
    """Return (log Z, node marginals (T, K), summed edge marginals (K, K))."""
    T, K = em.shape
    out = _forward(em, trans, start, end)
    if out is None:
        raise ValueError("no feasible path")
    log_z, alpha, la, (mt, M, me, E, mx, X) = out
    beta = np.empty((T, K))
    lb = np.empty(T)
    z = X.sum()
    beta[T - 1] = X / z
    lb[T - 1] = mx + np.log(z)
    for t in range(T - 2, -1, -1):
        b = M @ (E[t + 1] * beta[t + 1])
        z = b.sum()
        if z <= 0.0:
            beta[t] = 0.0
            lb[t] = 0.0
            continue
        beta[t] = b / z
        lb[t] = lb[t + 1] + mt + me[t + 1] + np.log(z)
    node = alpha * beta * np.exp(la + lb - log_z)[:, None]
    if T > 1:
        w = np.exp(la[:-1] + mt + me[1:] + lb[1:] - log_z)
        A = alpha[:-1] * w[:, None]
        Bm = E[1:] * beta[1:]
        edge = M * (A.T @ Bm)
    else:
        edge = np.zeros((K, K))
    return float(log_z), node, edge
