"""Symmetric eigen-decomposition with sign-fixed eigenvectors, overlaps and angles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import DimensionMismatch, NoConvergence, NonFinite, NotSquare, ZeroVector

_TIE_TOL = 1e-10


@dataclass(frozen=True)
class Spectrum:
    """Descending eigenvalues with eigenvectors in matching columns.

    Every column has a nonnegative inner product with ``reference``
    (columns orthogonal to it have their first nonzero entry positive).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    reference: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def top(self) -> tuple[float, np.ndarray]:
        return float(self.eigenvalues[0]), self.eigenvectors[:, 0]

    @property
    def bottom(self) -> tuple[float, np.ndarray]:
        return float(self.eigenvalues[-1]), self.eigenvectors[:, -1]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T

    def to_json(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
        }


class TopPair(NamedTuple):
    eigenvalue: float
    eigenvector: np.ndarray
    iterations: int


def _as_square(A) -> np.ndarray:
    a = np.asarray(A, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix has NaN or infinite entries")
    return a


def sign_align(v, reference=None) -> np.ndarray:
    """Return ``v`` or ``-v``, whichever has a positive inner product with ``reference``.

    An exactly orthogonal ``v`` (or no reference) is flipped so that its first
    nonzero component is positive.
    """
    v = np.asarray(v, dtype=np.float64)
    nz = np.flatnonzero(v)
    if nz.size == 0:
        raise ZeroVector("cannot sign-align the zero vector")
    if reference is not None:
        reference = np.asarray(reference, dtype=np.float64)
        if reference.shape != v.shape:
            raise DimensionMismatch(f"{v.shape} vs {reference.shape}")
        # fsum keeps exactly orthogonal inputs at exactly zero
        d = math.fsum(v * reference)
        if d > 0:
            return v.copy()
        if d < 0:
            return -v
    return v.copy() if v[nz[0]] > 0 else -v


def eig_symmetric(A, reference=None) -> Spectrum:
    """Full eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    The input is symmetrized as ``(A + A.T) / 2`` first. Eigenvalues come back
    in descending order; within a cluster of eigenvalues closer than 1e-10 the
    eigenvector columns are ordered by their (aligned) first component, an
    arbitrary but deterministic choice of basis for the eigenspace.
    """
    a = _as_square(A)
    a = (a + a.T) / 2.0
    n = a.shape[0]
    if reference is not None:
        reference = np.asarray(reference, dtype=np.float64)
        if reference.shape != (n,):
            raise DimensionMismatch(f"reference of shape {reference.shape} for a {n}x{n} matrix")
    try:
        w, v, _ = kernels.jacobi_eigh(a)
    except kernels.KernelConvergenceError as exc:
        raise NoConvergence(str(exc)) from exc

    vecs = np.empty_like(v)
    for j in range(n):
        vecs[:, j] = sign_align(v[:, j], reference)

    order = sorted(range(n), key=lambda j: -w[j])
    # reorder near-degenerate clusters by the first component
    i = 0
    while i < n:
        k = i + 1
        while k < n and w[order[i]] - w[order[k]] <= _TIE_TOL:
            k += 1
        if k - i > 1:
            order[i:k] = sorted(order[i:k], key=lambda j: -vecs[0, j])
        i = k
    # values stay strictly sorted; inside a cluster they differ by at most the tie tolerance
    values = np.sort(w)[::-1].copy()
    return Spectrum(eigenvalues=values, eigenvectors=vecs[:, order].copy(), reference=reference)


def top_eigenpair(A, tol=1e-10, max_iter=10_000, start=None, reference=None) -> TopPair:
    """Dominant eigenpair by power iteration.

    Assumes the top eigenvalue strictly dominates every other eigenvalue in
    magnitude (true for correlation matrices with a market mode). ``start``
    warm-starts the iteration; the default start is ``reference`` or the
    all-ones vector.
    """
    a = _as_square(A)
    a = (a + a.T) / 2.0
    n = a.shape[0]
    if start is None:
        start = reference if reference is not None else np.ones(n)
    start = np.asarray(start, dtype=np.float64)
    if start.shape != (n,):
        raise DimensionMismatch(f"start vector of shape {start.shape} for a {n}x{n} matrix")
    lam, v, it, res = kernels.power_iteration(a, start, tol, max_iter)
    if res > tol:
        raise NoConvergence(f"power iteration stopped after {it} steps with residual {res:.3e}")
    if not np.any(v):
        raise NoConvergence("power iteration collapsed to the zero vector")
    return TopPair(float(lam), sign_align(v, reference), int(it))


def _unit_pair(u, v) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"{u.shape} vs {v.shape}")
    for x in (u, v):
        if abs(float(np.linalg.norm(x)) - 1.0) > 1e-8:
            raise DimensionMismatch("overlap/angle expect unit vectors")
    return u, v


def overlap(u, v) -> float:
    u, v = _unit_pair(u, v)
    return float(np.clip(u @ v, -1.0, 1.0))


def angle(u, v) -> float:
    """``arccos`` of the signed inner product, in ``[0, pi]``."""
    return math.acos(overlap(u, v))


def uniform_mode(signs) -> np.ndarray:
    s = np.asarray(signs, dtype=np.float64)
    return s / math.sqrt(s.shape[0])
