# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled decoding kernels; same contracts as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log
from scipy.linalg.cython_blas cimport dgemv, dgemm

cnp.import_array()

NEG = -1e30
cdef double NEG_HALF = -5e29


def viterbi(double[:, ::1] em, double[:, ::1] trans, double[::1] start, double[::1] end):
    cdef Py_ssize_t T = em.shape[0], K = em.shape[1]
    cdef Py_ssize_t t, i, j, arg
    cdef double m, v, b
    best_arr = np.empty((T, K))
    cdef double[:, ::1] best = best_arr
    path_arr = np.empty(T, dtype=np.intp)
    cdef Py_ssize_t[::1] path = path_arr
    # transposed copy: the suffix-max update then runs over contiguous rows
    cdef double[:, ::1] trT = np.ascontiguousarray(np.asarray(trans).T)
    cdef double[::1] acc = np.empty(K)
    with nogil:
        for j in range(K):
            best[T - 1, j] = em[T - 1, j] + end[j]
        for t in range(T - 2, -1, -1):
            b = best[t + 1, 0]
            for i in range(K):
                acc[i] = trT[0, i] + b
            for j in range(1, K):
                b = best[t + 1, j]
                if b <= NEG_HALF:
                    continue
                for i in range(K):
                    v = trT[j, i] + b
                    acc[i] = v if v > acc[i] else acc[i]
            for i in range(K):
                best[t, i] = em[t, i] + acc[i]
        arg = 0
        m = start[0] + best[0, 0]
        for j in range(1, K):
            v = start[j] + best[0, j]
            if v > m:
                m = v
                arg = j
        path[0] = arg
        for t in range(1, T):
            i = path[t - 1]
            arg = 0
            m = trans[i, 0] + best[t, 0]
            for j in range(1, K):
                v = trans[i, j] + best[t, j]
                if v > m:
                    m = v
                    arg = j
            path[t] = arg
    return path_arr


cdef double _max1(double[::1] x) nogil:
    cdef Py_ssize_t i
    cdef double m = x[0]
    for i in range(1, x.shape[0]):
        if x[i] > m:
            m = x[i]
    return m


cdef class _Scaled:
    """Exponentiated, max-shifted copies of the score arrays."""
    cdef public object M, E, S, X, me
    cdef public double mt, ms, mx

    def __init__(self, double[:, ::1] em, double[:, ::1] trans, double[::1] start, double[::1] end):
        cdef Py_ssize_t T = em.shape[0], K = em.shape[1], t, i, j
        cdef double m
        self.M = np.empty((K, K))
        self.E = np.empty((T, K))
        self.S = np.empty(K)
        self.X = np.empty(K)
        self.me = np.empty(T)
        cdef double[:, ::1] M = self.M
        cdef double[:, ::1] E = self.E
        cdef double[::1] S = self.S
        cdef double[::1] X = self.X
        cdef double[::1] me = self.me
        with nogil:
            m = trans[0, 0]
            for i in range(K):
                for j in range(K):
                    if trans[i, j] > m:
                        m = trans[i, j]
            for i in range(K):
                for j in range(K):
                    # forbidden entries underflow to exactly 0 anyway
                    M[i, j] = exp(trans[i, j] - m) if trans[i, j] > NEG_HALF else 0.0
            self.mt = m
            for t in range(T):
                m = _max1(em[t])
                me[t] = m
                for j in range(K):
                    E[t, j] = exp(em[t, j] - m) if em[t, j] > NEG_HALF else 0.0
            m = _max1(start)
            self.ms = m
            for j in range(K):
                S[j] = exp(start[j] - m)
            m = _max1(end)
            self.mx = m
            for j in range(K):
                X[j] = exp(end[j] - m)


cdef bint _forward(_Scaled sc, double[:, ::1] alpha, double[::1] la, double* log_z):
    cdef double[:, ::1] M = sc.M
    cdef double[:, ::1] E = sc.E
    cdef double[::1] S = sc.S
    cdef double[::1] X = sc.X
    cdef double[::1] me = sc.me
    cdef int T = E.shape[0], K = E.shape[1], t, j, inc = 1
    cdef double z, one = 1.0, zero = 0.0
    cdef char transN = b'N'
    with nogil:
        z = 0.0
        for j in range(K):
            alpha[0, j] = S[j] * E[0, j]
            z += alpha[0, j]
        if z <= 0.0:
            return False
        for j in range(K):
            alpha[0, j] /= z
        la[0] = sc.ms + me[0] + log(z)
        for t in range(1, T):
            # alpha[t] = M^T alpha[t-1]: row-major M is column-major M^T
            dgemv(&transN, &K, &K, &one, &M[0, 0], &K, &alpha[t - 1, 0], &inc,
                  &zero, &alpha[t, 0], &inc)
            z = 0.0
            for j in range(K):
                alpha[t, j] *= E[t, j]
                z += alpha[t, j]
            if z <= 0.0:
                return False
            for j in range(K):
                alpha[t, j] /= z
            la[t] = la[t - 1] + sc.mt + me[t] + log(z)
        z = 0.0
        for j in range(K):
            z += alpha[T - 1, j] * X[j]
        if z <= 0.0:
            return False
        log_z[0] = la[T - 1] + sc.mx + log(z)
    return True


def log_partition(double[:, ::1] em, double[:, ::1] trans, double[::1] start, double[::1] end):
    cdef Py_ssize_t T = em.shape[0], K = em.shape[1]
    sc = _Scaled(em, trans, start, end)
    alpha = np.empty((T, K))
    la = np.empty(T)
    cdef double log_z = 0.0
    if not _forward(sc, alpha, la, &log_z):
        return -np.inf
    return log_z


def forward_backward(double[:, ::1] em, double[:, ::1] trans, double[::1] start, double[::1] end):
    cdef int T = em.shape[0], K = em.shape[1], t, j, inc = 1, Tm1
    sc = _Scaled(em, trans, start, end)
    alpha_arr = np.empty((T, K))
    beta_arr = np.empty((T, K))
    la_arr = np.empty(T)
    lb_arr = np.empty(T)
    tmp_arr = np.empty(K)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double[::1] la = la_arr
    cdef double[::1] lb = lb_arr
    cdef double[::1] tmp = tmp_arr
    cdef double log_z = 0.0, z, one = 1.0, zero = 0.0, w
    cdef char transT = b'T', transN = b'N'
    if not _forward(sc, alpha, la, &log_z):
        raise ValueError("no feasible path")
    cdef double[:, ::1] M = sc.M
    cdef double[:, ::1] E = sc.E
    cdef double[::1] X = sc.X
    cdef double[::1] me = sc.me
    node_arr = np.empty((T, K))
    cdef double[:, ::1] node = node_arr
    edge_arr = np.zeros((K, K))
    cdef double[:, ::1] edge = edge_arr
    A_arr = np.empty((max(T - 1, 1), K))
    B_arr = np.empty((max(T - 1, 1), K))
    cdef double[:, ::1] A = A_arr
    cdef double[:, ::1] Bm = B_arr
    with nogil:
        z = 0.0
        for j in range(K):
            z += X[j]
        for j in range(K):
            beta[T - 1, j] = X[j] / z
        lb[T - 1] = sc.mx + log(z)
        for t in range(T - 2, -1, -1):
            for j in range(K):
                tmp[j] = E[t + 1, j] * beta[t + 1, j]
            # beta[t] = M tmp
            dgemv(&transT, &K, &K, &one, &M[0, 0], &K, &tmp[0], &inc,
                  &zero, &beta[t, 0], &inc)
            z = 0.0
            for j in range(K):
                z += beta[t, j]
            if z <= 0.0:
                for j in range(K):
                    beta[t, j] = 0.0
                lb[t] = 0.0
                continue
            for j in range(K):
                beta[t, j] /= z
            lb[t] = lb[t + 1] + sc.mt + me[t + 1] + log(z)
        for t in range(T):
            w = exp(la[t] + lb[t] - log_z)
            for j in range(K):
                node[t, j] = alpha[t, j] * beta[t, j] * w
        if T > 1:
            Tm1 = T - 1
            for t in range(Tm1):
                w = exp(la[t] + sc.mt + me[t + 1] + lb[t + 1] - log_z)
                for j in range(K):
                    A[t, j] = alpha[t, j] * w
                    Bm[t, j] = E[t + 1, j] * beta[t + 1, j]
            # edge (row-major) = A^T Bm  <=>  column-major edge^T = Bm^T A
            dgemm(&transN, &transT, &K, &K, &Tm1, &one, &Bm[0, 0], &K, &A[0, 0], &K,
                  &zero, &edge[0, 0], &K)
            for t in range(K):
                for j in range(K):
                    edge[t, j] *= M[t, j]
    return float(log_z), node_arr, edge_arr
