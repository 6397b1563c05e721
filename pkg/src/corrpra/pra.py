"""Principal regression of instantaneous correlations on lagged indicators.

Each pair ``(i, j)`` is regressed as ``r_i(t) r_j(t) = C_ij + sum_F D^F_ij x_F(t - tau) + eps``.
Only the moment matrices ``sum_t r_i r_j`` and ``sum_t r_i r_j x(t - tau)``
are accumulated; the T x N^2 design matrix is never formed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import (
    CollinearFactors,
    DimensionMismatch,
    IndexOutOfRange,
    InputError,
    SampleTooSmall,
    ZeroVariance,
)
from .indicators import Indicator
from .panel import ReturnsPanel
from .spectra import Spectrum, eig_symmetric

GRAM_COND_LIMIT = 1e8


@dataclass(frozen=True)
class PraConfig:
    """``intercept_divisor`` is ``"n-1"`` (matches the unbiased standardization) or ``"n"``."""

    tau: int = 1
    intercept_divisor: str = "n-1"

    def __post_init__(self):
        if int(self.tau) != self.tau or self.tau < 1:
            raise InputError(f"lag must be an integer >= 1, got {self.tau}")
        if self.intercept_divisor not in ("n-1", "n"):
            raise InputError(f"intercept_divisor must be 'n-1' or 'n', got {self.intercept_divisor!r}")

    def divisor(self, count: int) -> int:
        return count - 1 if self.intercept_divisor == "n-1" else count

    def to_json(self) -> dict:
        return {"tau": self.tau, "intercept_divisor": self.intercept_divisor}


@dataclass(frozen=True)
class PraFit:
    intercept: np.ndarray
    sensitivities: dict[str, np.ndarray]
    factors: list[dict]
    sample_start: int
    sample_count: int
    residual_power: float
    c_spectrum: Spectrum
    d_spectra: dict[str, Spectrum]
    config: PraConfig = field(default_factory=PraConfig)

    @property
    def factor_names(self) -> list[str]:
        return list(self.sensitivities)

    @property
    def sensitivity(self) -> np.ndarray:
        if len(self.sensitivities) != 1:
            raise InputError("fit has several factors; index sensitivities by name")
        return next(iter(self.sensitivities.values()))

    @property
    def market_mode(self) -> np.ndarray:
        return self.c_spectrum.eigenvectors[:, 0]

    def extremes(self, name: str | None = None) -> dict:
        """Extreme eigenvalues of a sensitivity matrix and their signed overlaps with ``v1(C)``."""
        name = self.factor_names[0] if name is None else name
        d = self.d_spectra[name]
        v1 = self.market_mode
        return {
            "lambda_min": float(d.eigenvalues[-1]),
            "lambda_max": float(d.eigenvalues[0]),
            "overlap_min": float(v1 @ d.eigenvectors[:, -1]),
            "overlap_max": float(v1 @ d.eigenvectors[:, 0]),
        }

    def to_json(self, asset_ids: Sequence[str] | None = None) -> dict:
        out = {
            "config": self.config.to_json(),
            "factors": self.factors,
            "sample_start": self.sample_start,
            "sample_count": self.sample_count,
            "residual_power": self.residual_power,
            "C": self.intercept.tolist(),
            "spectrum_C": self.c_spectrum.to_json(),
            "D": {k: v.tolist() for k, v in self.sensitivities.items()},
            "spectrum_D": {k: v.to_json() for k, v in self.d_spectra.items()},
            "extremes": {k: self.extremes(k) for k in self.sensitivities},
        }
        if asset_ids is not None:
            out["asset_ids"] = list(asset_ids)
        return out


def instantaneous_correlation(panel: ReturnsPanel, t: int) -> np.ndarray:
    if not -panel.n_dates <= t < panel.n_dates:
        raise IndexOutOfRange(f"date index {t} outside [0, {panel.n_dates})")
    r = panel.returns[:, t]
    return np.outer(r, r)


def unconditional_correlation(
    panel: ReturnsPanel, config: PraConfig | None = None, start: int = 0, stop: int | None = None
) -> np.ndarray:
    """Average outer product of the returns over ``[start, stop)`` with the configured divisor."""
    config = config or PraConfig()
    r = panel.returns[:, start:stop]
    count = r.shape[1]
    if count < 2:
        raise SampleTooSmall("need at least two dates")
    return kernels.weighted_gram(r, np.ones(count)) / config.divisor(count)


def avg_signed_correlation(rho, signs) -> float:
    """Mean of ``s_i s_j rho_ij`` over the off-diagonal pairs."""
    rho = np.asarray(rho, dtype=np.float64)
    s = np.asarray(signs, dtype=np.float64)
    n = s.shape[0]
    if rho.shape != (n, n):
        raise DimensionMismatch(f"matrix {rho.shape} vs {n} signs")
    if n < 2:
        raise DimensionMismatch("need at least two assets")
    signed = rho * np.outer(s, s)
    return float((signed.sum() - np.trace(signed)) / (n * (n - 1)))


def signed_average_series(panel: ReturnsPanel) -> np.ndarray:
    """``avg_signed_correlation`` of every instantaneous correlation matrix, vectorized."""
    r = panel.returns
    n = panel.n_assets
    proj = panel.sign_vector @ r
    return (proj * proj - (r * r).sum(axis=0)) / (n * (n - 1))


def aligned_start(indicators: Sequence[Indicator], tau: int) -> int:
    return max([tau] + [x.valid_from + tau for x in indicators])


def _aligned_predictors(panel: ReturnsPanel, xs: Sequence[Indicator], tau: int) -> tuple[int, np.ndarray]:
    m = panel.n_dates
    for x in xs:
        if len(x) != m:
            raise DimensionMismatch(f"indicator {x.name!r} has {len(x)} points, panel has {m} dates")
    start = aligned_start(xs, tau)
    count = m - start
    if count < 2:
        raise SampleTooSmall(f"aligned sample has {count} points")
    if count < panel.n_assets:
        warnings.warn(f"aligned sample ({count}) is shorter than the number of assets", stacklevel=3)
    z = np.empty((len(xs), count))
    for k, x in enumerate(xs):
        seg = x.values[start - tau : m - tau]
        mu = seg.mean()
        sd = math.sqrt(float(np.sum((seg - mu) ** 2)) / (count - 1))
        if not sd > 1e-14 * max(1.0, abs(mu)):
            raise ZeroVariance(f"predictor {x.name!r} is constant on the aligned sample")
        z[k] = (seg - mu) / sd
    return start, z


def _unique_names(xs: Sequence[Indicator]) -> list[str]:
    names, seen = [], {}
    for x in xs:
        base = x.name
        seen[base] = seen.get(base, 0) + 1
        names.append(base if seen[base] == 1 else f"{base}#{seen[base]}")
    return names


def _assemble(panel, xs, config, start, z, slopes, ssr_extra) -> PraFit:
    r = panel.returns[:, start:]
    count = r.shape[1]
    s1 = kernels.weighted_gram(r, np.ones(count))
    ybar = s1 / count
    sq = r * r
    sum_y2 = kernels.weighted_gram(sq, np.ones(count))
    ssr = sum_y2 - count * ybar * ybar - ssr_extra
    intercept = s1 / config.divisor(count)
    c_spec = eig_symmetric(intercept, panel.uniform_mode)
    v1 = c_spec.eigenvectors[:, 0]
    names = _unique_names(xs)
    sens = {nm: d for nm, d in zip(names, slopes)}
    return PraFit(
        intercept=intercept,
        sensitivities=sens,
        factors=[dict(x.describe(), name=nm) for nm, x in zip(names, xs)],
        sample_start=start,
        sample_count=count,
        residual_power=float(max(ssr.mean(), 0.0) / count),
        c_spectrum=c_spec,
        d_spectra={nm: eig_symmetric(d, v1) for nm, d in sens.items()},
        config=config,
    )


def sensitivity_from_predictor(r_aligned: np.ndarray, z: np.ndarray) -> np.ndarray:
    """OLS slope matrix of ``r_i r_j`` on a centered predictor ``z`` (time along axis 1 of ``r``)."""
    s2 = kernels.weighted_gram(r_aligned, z)
    d = s2 / float(z @ z)
    return (d + d.T) / 2.0


def fit_single(panel: ReturnsPanel, x: Indicator, config: PraConfig | None = None) -> PraFit:
    """Single-factor fit of every pair's instantaneous correlation on ``x(t - tau)``.

    The predictor is re-standardized on the aligned sample, so the OLS
    intercept is the sample mean of ``r_i r_j``; the reported intercept uses
    the configured divisor.
    """
    config = config or PraConfig()
    start, z = _aligned_predictors(panel, [x], config.tau)
    zz = float(z[0] @ z[0])
    d = sensitivity_from_predictor(panel.returns[:, start:], z[0])
    return _assemble(panel, [x], config, start, z, [d], d * d * zz)


def fit_multi(panel: ReturnsPanel, xs: Sequence[Indicator], config: PraConfig | None = None) -> PraFit:
    """Joint fit on several lagged factors, solving the factors' normal equations per pair."""
    config = config or PraConfig()
    if len(xs) < 2:
        raise InputError("fit_multi needs at least two factors")
    start, z = _aligned_predictors(panel, xs, config.tau)
    count = z.shape[1]
    gram = z @ z.T
    cond = np.linalg.cond(gram / (count - 1))
    if not cond < GRAM_COND_LIMIT:
        raise CollinearFactors(f"factor Gram matrix condition number {cond:.3g} >= {GRAM_COND_LIMIT:.0e}")
    r = panel.returns[:, start:]
    n = panel.n_assets
    cross = np.stack([kernels.weighted_gram(r, zk) for zk in z])
    beta = np.linalg.solve(gram, cross.reshape(len(xs), n * n)).reshape(len(xs), n, n)
    slopes = [(b + b.T) / 2.0 for b in beta]
    explained = np.einsum("fij,fg,gij->ij", beta, gram, beta)
    return _assemble(panel, xs, config, start, z, slopes, explained)


def dominant_extreme(c_spectrum: Spectrum, d_spectrum: Spectrum) -> tuple[float, float]:
    """The extreme eigenpair of D (top or bottom) with the larger ``|lambda| * overlap**2``.

    Returns ``(lambda, overlap)`` with the overlap taken against ``v1(C)``.
    """
    v1 = c_spectrum.eigenvectors[:, 0]
    cands = []
    for j in (-1, 0):
        lam = float(d_spectrum.eigenvalues[j])
        ov = float(v1 @ d_spectrum.eigenvectors[:, j])
        cands.append((abs(lam) * ov * ov, lam, ov))
    # bottom listed first so it wins ties
    best = max(cands, key=lambda c: c[0])
    return best[1], best[2]


def top_eigenvalue_effect(lambda1: float, terms: Sequence[tuple[float, float, float]]) -> float:
    """``lambda1 + sum x * lambda * overlap**2`` over ``(x, lambda, overlap)`` terms."""
    return float(lambda1 + sum(x * lam * ov * ov for x, lam, ov in terms))


def implied_top_eigenvalue(fit: PraFit, factor_values) -> float:
    """First-order top eigenvalue of the conditional correlation matrix at the given factor values."""
    names = fit.factor_names
    if isinstance(factor_values, Mapping):
        values = [float(factor_values.get(nm, 0.0)) for nm in names]
    else:
        values = [float(v) for v in np.atleast_1d(factor_values)]
        if len(values) != len(names):
            raise DimensionMismatch(f"{len(values)} factor values for {len(names)} factors")
    terms = []
    for nm, x in zip(names, values):
        lam, ov = dominant_extreme(fit.c_spectrum, fit.d_spectra[nm])
        terms.append((x, lam, ov))
    return top_eigenvalue_effect(float(fit.c_spectrum.eigenvalues[0]), terms)


def top_eigenvalue_slope(c_spectrum: Spectrum, d) -> float:
    """``<v1(C), D v1(C)>``, the first-order rate of change of ``lambda1(C + x D)``."""
    v1 = c_spectrum.eigenvectors[:, 0]
    return float(v1 @ np.asarray(d) @ v1)
