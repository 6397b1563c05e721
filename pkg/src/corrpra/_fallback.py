"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and return conventions. Results agree with the compiled
versions to rounding, not necessarily bit for bit (numpy reductions use
pairwise summation).
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class KernelConvergenceError(ArithmeticError):
    pass


def jacobi_eigh(A, tol=1e-14, max_sweeps=100):
    a = np.array(A, dtype=np.float64, order="C", copy=True)
    n = a.shape[0]
    v = np.eye(n)
    fro = math.sqrt(float(np.sum(a * a)))
    iu = np.triu_indices(n, 1)
    sweep = 0
    while True:
        off = math.sqrt(float(np.sum(a[iu] ** 2)))
        if off <= tol * fro or off == 0.0:
            break
        if sweep >= max_sweeps:
            raise KernelConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {off:.3e})"
            )
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                elif theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                x = a[:, p].copy()
                y = a[:, q].copy()
                a[:, p] = c * x - s * y
                a[:, q] = s * x + c * y
                x = a[p, :].copy()
                y = a[q, :].copy()
                a[p, :] = c * x - s * y
                a[q, :] = s * x + c * y
                a[p, q] = 0.0
                a[q, p] = 0.0
                x = v[:, p].copy()
                y = v[:, q].copy()
                v[:, p] = c * x - s * y
                v[:, q] = s * x + c * y
    return np.diag(a).copy(), v, sweep


def power_iteration(A, v0, tol=1e-10, max_iter=10000):
    a = np.ascontiguousarray(A, dtype=np.float64)
    v = np.array(v0, dtype=np.float64, copy=True)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return 0.0, v, 0, 0.0
    v /= norm
    lam = res = 0.0
    it = 0
    while it < max_iter:
        it += 1
        w = a @ v
        lam = float(v @ w)
        res = float(np.linalg.norm(w - lam * v))
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0, v, it, 0.0
        if res <= tol:
            break
        v = w / norm
    return lam, v, it, res


def ema_filter(x, beta, cutoff):
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.full(x.shape[0], np.nan)
    if x.shape[0] <= cutoff:
        return out
    wts = np.exp(-beta * np.arange(cutoff + 1))
    out[cutoff:] = sliding_window_view(x, cutoff + 1) @ wts[::-1]
    return out


def weighted_gram(R, w):
    r = np.ascontiguousarray(R, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.shape[0] != r.shape[1]:
        raise ValueError("weight length does not match the time axis")
    g = (r * w) @ r.T
    return (g + g.T) / 2.0
