"""Figure-level analyses: decay-rate sweeps, binned conditional statistics,
conditional market-mode angles and group-averaged matrices."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateRange, DimensionMismatch, EmptyGroup, InputError, PraError
from .indicators import Indicator, ema_smooth
from .panel import ReturnsPanel
from .pra import PraConfig, PraFit, _aligned_predictors, fit_single, signed_average_series
from .significance import null_ensemble, p_values_for
from .spectra import angle, eig_symmetric

DEFAULT_DECAY_TIMES = (1, 2, 3, 5, 7, 10, 15, 20, 30, 50)
STATS = ("lambda_min", "lambda_max", "overlap_min", "overlap_max")


@dataclass(frozen=True)
class BinnedCurve:
    edges: np.ndarray
    means: np.ndarray  # NaN for empty bins
    counts: np.ndarray
    stderr: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return (self.edges[:-1] + self.edges[1:]) / 2.0

    def rows(self) -> list[dict]:
        return [
            {
                "bin": k,
                "lo": float(self.edges[k]),
                "hi": float(self.edges[k + 1]),
                "center": float(self.centers[k]),
                "count": int(self.counts[k]),
                "mean": None if self.counts[k] == 0 else float(self.means[k]),
                "stderr": None if self.counts[k] < 2 else float(self.stderr[k]),
            }
            for k in range(len(self.counts))
        ]


@dataclass(frozen=True)
class AngleCurve:
    bins: BinnedCurve  # bins over the lagged predictor; means hold the predictor's bin averages
    angles: np.ndarray
    baseline: float
    mode: str

    def rows(self) -> list[dict]:
        out = []
        for row, a in zip(self.bins.rows(), self.angles):
            row = dict(row, mode=self.mode, angle=None if math.isnan(a) else float(a), baseline=self.baseline)
            row.pop("mean")
            row.pop("stderr")
            out.append(row)
        return out


@dataclass
class SweepRecord:
    beta: float
    decay_time: float
    stats: dict = field(default_factory=dict)
    p_values: dict = field(default_factory=dict)  # null mode -> statistic -> p
    error: str | None = None


@dataclass
class SweepResult:
    records: list[SweepRecord]
    reference: dict
    base: str

    @property
    def decay_times(self) -> np.ndarray:
        return np.array([r.decay_time for r in self.records])

    def column(self, stat: str) -> np.ndarray:
        return np.array([r.stats.get(stat, np.nan) if r.error is None else np.nan for r in self.records])

    def argmax_effect(self) -> float:
        """Decay time with the most negative smallest eigenvalue."""
        lam = self.column("lambda_min")
        return float(self.decay_times[int(np.nanargmin(lam))])

    def to_rows(self) -> list[dict]:
        rows = []
        modes = sorted({m for r in self.records for m in r.p_values})
        for r in self.records:
            row = {"decay_time": r.decay_time, "beta": r.beta}
            for s in STATS:
                row[s] = r.stats.get(s)
            for m in modes:
                for s in STATS:
                    row[f"p_{s}_{m}"] = r.p_values.get(m, {}).get(s)
            for s in STATS:
                row[f"ref_{s}"] = self.reference.get(s)
            row["error"] = r.error or ""
            rows.append(row)
        return rows


def binned_means(condition, target, n_bins: int = 5) -> BinnedCurve:
    """Average ``target`` over equal-width bins of ``condition``.

    Bins span ``[min, max]`` of the condition; all bins are left-closed and
    the last one is also right-closed. Pairs with a NaN in either series are
    dropped.
    """
    c = np.asarray(condition, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if c.shape != y.shape or c.ndim != 1:
        raise DimensionMismatch(f"condition {c.shape} and target {y.shape} must be aligned 1-d series")
    if n_bins < 2:
        raise InputError("need at least two bins")
    keep = np.isfinite(c) & np.isfinite(y)
    c, y = c[keep], y[keep]
    if c.size == 0:
        raise InputError("no finite observations to bin")
    lo, hi = float(c.min()), float(c.max())
    if not hi > lo:
        raise DegenerateRange("condition series has zero range")
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.minimum(((c - lo) / (hi - lo) * n_bins).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=y, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        sq = np.bincount(idx, weights=(y - means[idx]) ** 2, minlength=n_bins)
        stderr = np.where(counts > 1, np.sqrt(sq / np.maximum(counts - 1, 1) / np.maximum(counts, 1)), np.nan)
    return BinnedCurve(edges=edges, means=means, counts=counts, stderr=stderr)


def signed_correlation_curve(
    panel: ReturnsPanel, x: Indicator, config: PraConfig | None = None, n_bins: int = 5
) -> BinnedCurve:
    """Average signed correlation of each day binned by the lagged, re-standardized predictor."""
    config = config or PraConfig()
    start, z = _aligned_predictors(panel, [x], config.tau)
    return binned_means(z[0], signed_average_series(panel)[start:], n_bins)


def model_implied_angle(fit: PraFit, value: float, reference, name: str | None = None) -> float:
    """Angle between ``reference`` and the top eigenvector of ``C + value * D``."""
    name = fit.factor_names[0] if name is None else name
    m = fit.intercept + value * fit.sensitivities[name]
    return angle(reference, eig_symmetric(m, reference).eigenvectors[:, 0])


def conditional_angle_curve(
    panel: ReturnsPanel,
    x: Indicator,
    config: PraConfig | None = None,
    n_bins: int = 5,
    mode: str = "empirical",
) -> AngleCurve:
    """Angle to the uniform mode of the market mode conditional on the lagged predictor.

    ``"empirical"`` averages the instantaneous correlation matrices inside
    each predictor bin and takes the top eigenvector of each average;
    ``"model"`` uses the fitted ``C + D * center`` at each bin center.
    """
    config = config or PraConfig()
    if mode not in ("empirical", "model"):
        raise InputError(f"unknown angle mode {mode!r}")
    e0 = panel.uniform_mode
    start, z = _aligned_predictors(panel, [x], config.tau)
    z = z[0]
    bins = binned_means(z, z, n_bins)
    fit = fit_single(panel, x, config)
    baseline = angle(e0, fit.market_mode)
    angles = np.full(n_bins, np.nan)
    if mode == "model":
        for k, c in enumerate(bins.centers):
            angles[k] = model_implied_angle(fit, float(c), e0)
    else:
        r = panel.returns[:, start:]
        idx = np.minimum(((z - bins.edges[0]) / (bins.edges[-1] - bins.edges[0]) * n_bins).astype(int), n_bins - 1)
        for k in range(n_bins):
            sel = np.flatnonzero(idx == k)
            if sel.size == 0:
                continue
            block = np.ascontiguousarray(r[:, sel])
            avg = kernels.weighted_gram(block, np.ones(sel.size)) / sel.size
            angles[k] = angle(e0, eig_symmetric(avg, e0).eigenvectors[:, 0])
    return AngleCurve(bins=bins, angles=angles, baseline=baseline, mode=mode)


def group_average_matrix(M, groups: Sequence[str], order: Sequence[str] | None = None) -> tuple[np.ndarray, list[str]]:
    """Block means of ``M`` by asset group, excluding the diagonal inside diagonal blocks.

    Diagonal blocks of singleton groups have no off-diagonal entries and come
    out NaN.
    """
    m = np.asarray(M, dtype=np.float64)
    n = m.shape[0]
    if m.shape != (n, n):
        raise DimensionMismatch(f"expected a square matrix, got {m.shape}")
    groups = list(groups)
    if len(groups) != n:
        raise DimensionMismatch(f"{len(groups)} group labels for {n} assets")
    if order is None:
        order = list(dict.fromkeys(groups))
    members = {g: np.array([i for i, h in enumerate(groups) if h == g], dtype=int) for g in order}
    for g, idx in members.items():
        if idx.size == 0:
            raise EmptyGroup(f"group {g!r} has no assets")
    out = np.full((len(order), len(order)), np.nan)
    for a, ga in enumerate(order):
        for b, gb in enumerate(order):
            block = m[np.ix_(members[ga], members[gb])]
            if a == b:
                k = block.shape[0]
                if k > 1:
                    out[a, b] = (block.sum() - np.trace(block)) / (k * (k - 1))
            else:
                out[a, b] = block.mean()
    return out, list(order)


def beta_sweep(
    panel: ReturnsPanel,
    base: Indicator | Callable[[float], Indicator],
    beta_grid: Sequence[float] | None = None,
    config: PraConfig | None = None,
    null_trials: int = 0,
    seed: int = 0,
    threads: int | None = None,
    null_modes: Sequence[str] = ("iid", "iid_ema"),
) -> SweepResult:
    """Fit the smoothed predictor for each decay rate and collect extreme-eigenpair statistics.

    ``base`` is either an unsmoothed indicator (smoothed here with
    :func:`ema_smooth`) or a constructor mapping a decay rate to an indicator,
    as for the eigen-factor. ``beta_grid`` holds decay rates; the default is
    decay times of 1 to 50 days. The reference entry is the unsmoothed
    (``beta = inf``) fit. ``null_trials = 0`` skips p-values.
    """
    config = config or PraConfig()
    make = (lambda b: ema_smooth(base, b)) if isinstance(base, Indicator) else base
    if beta_grid is None:
        beta_grid = [1.0 / d for d in DEFAULT_DECAY_TIMES]
    if len(beta_grid) == 0:
        raise InputError("empty decay-rate grid")
    grid = sorted({float(b) for b in beta_grid}, key=lambda b: 0.0 if math.isinf(b) else 1.0 / b)
    base_name = base.name if isinstance(base, Indicator) else getattr(base, "__name__", "custom")

    ref_fit = fit_single(panel, make(math.inf), config)
    reference = ref_fit.extremes()

    records = []
    for b in grid:
        rec = SweepRecord(beta=b, decay_time=0.0 if math.isinf(b) else 1.0 / b)
        try:
            ind = make(b)
            fit = fit_single(panel, ind, config)
            rec.stats = fit.extremes()
            for mode in null_modes if null_trials else ():
                if mode == "iid_ema" and math.isinf(b):
                    continue  # no smoothing to mimic
                null = null_ensemble(
                    panel,
                    config,
                    null_trials,
                    seed,
                    mode=mode,
                    beta=b if mode == "iid_ema" else None,
                    indicator=ind,
                    threads=threads,
                )
                rec.p_values[mode] = p_values_for(null, rec.stats)
        except PraError as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
        records.append(rec)
    return SweepResult(records=records, reference=reference, base=base_name)


def write_rows_csv(path, rows: Sequence[dict]) -> None:
    """Flat CSV with the union of row keys as header, in first-seen order."""
    header: list[str] = []
    for r in rows:
        for k in r:
            if k not in header:
                header.append(k)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(r.get(k)) for k in header])


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)
