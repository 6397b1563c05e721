# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled hot loops.

Every routine has a numpy twin with the same signature in ``_fallback.py``.
Both Jacobi solvers apply the same rotations in the same order; only the
convergence test sums in a different order.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, exp

cnp.import_array()


class KernelConvergenceError(ArithmeticError):
    pass


def jacobi_eigh(A, double tol=1e-14, int max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Returns ``(w, V, sweeps)`` with unsorted eigenvalues ``w`` and the
    eigenvectors in the columns of ``V``.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a_arr = np.array(A, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = a_arr.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t p, q, k
    cdef double fro = 0.0, off, apq, app, aqq, theta, t, c, s, x, y
    cdef int sweep = 0

    with nogil:
        for p in range(n):
            for q in range(n):
                fro = fro + a[p, q] * a[p, q]
        fro = sqrt(fro)
        while True:
            off = 0.0
            for p in range(n - 1):
                for q in range(p + 1, n):
                    off = off + a[p, q] * a[p, q]
            off = sqrt(off)
            if off <= tol * fro or off == 0.0:
                break
            if sweep >= max_sweeps:
                break
            sweep = sweep + 1
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if fabs(apq) <= 1e-300:
                        continue
                    app = a[p, p]
                    aqq = a[q, q]
                    theta = (aqq - app) / (2.0 * apq)
                    if fabs(theta) > 1e150:
                        t = 0.5 / theta
                    elif theta >= 0.0:
                        t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                    else:
                        t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(n):
                        x = a[k, p]
                        y = a[k, q]
                        a[k, p] = c * x - s * y
                        a[k, q] = s * x + c * y
                    for k in range(n):
                        x = a[p, k]
                        y = a[q, k]
                        a[p, k] = c * x - s * y
                        a[q, k] = s * x + c * y
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(n):
                        x = v[k, p]
                        y = v[k, q]
                        v[k, p] = c * x - s * y
                        v[k, q] = s * x + c * y
    if sweep >= max_sweeps and off > tol * fro:
        raise KernelConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {off:.3e})")
    w = np.array([a_arr[k, k] for k in range(n)], dtype=np.float64)
    return w, v_arr, sweep


def power_iteration(A, v0, double tol=1e-10, int max_iter=10000):
    """Dominant eigenpair by power iteration.

    Returns ``(lam, v, iterations, residual)``; the caller decides what a
    residual above ``tol`` means.
    """
    cdef const double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v_arr = np.array(v0, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_arr = np.empty_like(v_arr)
    cdef double[::1] v = v_arr
    cdef double[::1] w = w_arr
    cdef Py_ssize_t n = a.shape[0], i, j
    cdef double norm = 0.0, lam = 0.0, res = 0.0, acc, d
    cdef int it = 0

    with nogil:
        for i in range(n):
            norm = norm + v[i] * v[i]
        norm = sqrt(norm)
        if norm > 0.0:
            for i in range(n):
                v[i] = v[i] / norm
            while it < max_iter:
                it = it + 1
                for i in range(n):
                    acc = 0.0
                    for j in range(n):
                        acc = acc + a[i, j] * v[j]
                    w[i] = acc
                lam = 0.0
                for i in range(n):
                    lam = lam + v[i] * w[i]
                res = 0.0
                for i in range(n):
                    d = w[i] - lam * v[i]
                    res = res + d * d
                res = sqrt(res)
                norm = 0.0
                for i in range(n):
                    norm = norm + w[i] * w[i]
                norm = sqrt(norm)
                if norm == 0.0:
                    break
                if res <= tol:
                    break
                for i in range(n):
                    v[i] = w[i] / norm
    if norm == 0.0:
        return 0.0, v_arr, it, 0.0
    return lam, v_arr, it, res


def ema_filter(x, double beta, Py_ssize_t cutoff):
    """Truncated exponential kernel: ``out[t] = sum_{s=0}^{cutoff} x[t-s] e^{-beta s}``.

    Entries with ``t < cutoff`` are left as NaN.
    """
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], t, s
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.full(n, np.nan)
    cdef double[::1] out = out_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_arr = np.empty(cutoff + 1)
    cdef double[::1] wts = w_arr
    cdef double acc
    for s in range(cutoff + 1):
        wts[s] = exp(-beta * s)
    with nogil:
        for t in range(cutoff, n):
            acc = 0.0
            for s in range(cutoff + 1):
                acc = acc + xv[t - s] * wts[s]
            out[t] = acc
    return out_arr


def weighted_gram(R, w):
    """``G[i, j] = sum_t w[t] R[i, t] R[j, t]``.

    Delegates to BLAS through numpy: a blocked dgemm beats any ordered scalar
    loop here, so both backends share this path.
    """
    r = np.ascontiguousarray(R, dtype=np.float64)
    wv = np.ascontiguousarray(w, dtype=np.float64)
    if wv.shape[0] != r.shape[1]:
        raise ValueError("weight length does not match the time axis")
    g = (r * wv) @ r.T
    return (g + g.T) / 2.0
