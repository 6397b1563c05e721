"""Scalar predictors: signed market index, sector sub-indexes, EMA smoothing and the eigen-factor.

Every :class:`Indicator` carries a full-length series aligned with the panel
dates. Positions before ``valid_from`` are NaN.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import EmptySector, InputError, SeriesTooShort, ZeroVariance
from .panel import ReturnsPanel, Sector
from .spectra import top_eigenpair

LN100 = math.log(100.0)


def ema_cutoff(beta: float) -> int:
    """Smallest integer ``T_k`` with ``exp(-beta * T_k) <= 0.01``; 0 for ``beta = inf``."""
    if beta <= 0 or math.isnan(beta):
        raise InputError(f"decay rate must be positive, got {beta}")
    if math.isinf(beta):
        return 0
    tk = math.ceil(LN100 / beta)
    while math.exp(-beta * tk) > 0.01:
        tk += 1
    return tk


@dataclass(frozen=True)
class Indicator:
    values: np.ndarray
    valid_from: int = 0
    kind: str = "synthetic"
    beta: float | None = None
    cutoff: int | None = None
    window: int | None = None
    sector: str | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if not 0 <= self.valid_from <= v.shape[0]:
            raise InputError(f"valid_from={self.valid_from} outside a series of length {v.shape[0]}")

    def __len__(self) -> int:
        return self.values.shape[0]

    def __neg__(self) -> "Indicator":
        return replace(self, values=-self.values)

    @property
    def valid(self) -> np.ndarray:
        return self.values[self.valid_from:]

    @property
    def name(self) -> str:
        """Short label used in file names and reports."""
        if self.kind == "market":
            base = "market"
        elif self.kind == "sector":
            base = f"{self.sector}"
        elif self.kind == "eigenfactor":
            base = "eigen"
        else:
            base = self.kind
        if self.beta is not None and not math.isinf(self.beta):
            return f"{base}_{self.beta:g}"
        return base

    def describe(self) -> dict:
        out = {"kind": self.kind, "name": self.name, "valid_from": self.valid_from}
        if self.beta is not None:
            out["beta"] = None if math.isinf(self.beta) else self.beta
            out["cutoff"] = self.cutoff
        if self.window is not None:
            out["window"] = self.window
        if self.sector is not None:
            out["sector"] = self.sector
        return out

    def to_csv(self, path, dates) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "value", "valid"])
            for t, (d, x) in enumerate(zip(dates, self.values)):
                ok = t >= self.valid_from
                w.writerow([d, repr(float(x)) if ok else "", int(ok)])


def standardize_indicator(x: Indicator, start: int | None = None, stop: int | None = None) -> Indicator:
    """Rescale ``x`` to mean 0 and sample standard deviation 1 over ``[start, stop)``.

    The default range is the valid part of the series. Values outside the
    range get the same affine map; positions before ``valid_from`` stay NaN.
    """
    start = x.valid_from if start is None else start
    stop = len(x) if stop is None else stop
    if start < x.valid_from:
        raise InputError("standardization range starts before the indicator is valid")
    seg = x.values[start:stop]
    if seg.shape[0] < 2:
        raise InputError("standardization needs at least two points")
    mu = float(seg.mean())
    sd = float(np.sqrt(np.sum((seg - mu) ** 2) / (seg.shape[0] - 1)))
    if not sd > 1e-14 * max(1.0, abs(mu)):
        raise ZeroVariance(f"indicator {x.name!r} is constant over [{start}, {stop})")
    return replace(x, values=(x.values - mu) / sd)


def market_index(panel: ReturnsPanel) -> Indicator:
    """Signed equal-weight index: bonds enter with weight -1, other sectors +1."""
    raw = panel.sign_vector @ panel.returns / panel.n_assets
    return standardize_indicator(Indicator(raw, 0, "market"))


def sector_index(panel: ReturnsPanel, sector) -> Indicator:
    """Unsigned equal-weight average of one sector's returns."""
    sector = Sector.parse(sector)
    members = panel.sector_members(sector)
    if members.size == 0:
        raise EmptySector(f"panel has no {sector.value} assets")
    raw = panel.returns[members].mean(axis=0)
    return standardize_indicator(Indicator(raw, 0, "sector", sector=sector.value))


def ema_smooth(x: Indicator, beta: float) -> Indicator:
    """Truncated exponential moving sum over ``T_k + 1`` taps, then re-standardized.

    ``beta = inf`` gives ``T_k = 0`` and returns ``x`` unchanged in value.
    """
    tk = ema_cutoff(beta)
    valid = x.valid
    if valid.shape[0] <= tk + 1:
        raise SeriesTooShort(f"series of {valid.shape[0]} valid points is too short for cutoff {tk}")
    kind = {"market": "ema", "synthetic": "synthetic_ema", "null": "null_ema"}.get(x.kind, x.kind)
    if tk == 0:
        # zero-width kernel: the input is already standardized over its valid range
        return replace(x, kind=kind, beta=float(beta), cutoff=0)
    out = np.full(len(x), np.nan)
    out[x.valid_from:] = kernels.ema_filter(valid, float(beta), tk)
    smoothed = Indicator(
        out,
        x.valid_from + tk,
        kind,
        beta=float(beta),
        cutoff=tk,
        window=x.window,
        sector=x.sector,
    )
    return standardize_indicator(smoothed)


def local_projections(panel: ReturnsPanel, window: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Daily projections of returns on the trailing-window top eigenvector.

    For every ``t >= window`` the matrix ``C_K(t)`` is the second-moment matrix
    of the returns on ``[t - window, t - 1]`` with window means removed
    (divisor ``window - 1``). Its top eigenvector, aligned to the uniform
    mode, gives ``pi(t) = <r(t), v1(C_K(t))>``. Returns ``(pi, vectors)``;
    entries before ``window`` are NaN.
    """
    n, m = panel.returns.shape
    k = 3 * n if window is None else int(window)
    if k < 2:
        raise InputError("eigen-factor window must be at least 2 days")
    if m <= k:
        raise SeriesTooShort(f"panel of {m} dates is too short for a {k}-day window")
    r = panel.returns
    e0 = panel.uniform_mode
    pi = np.full(m, np.nan)
    vecs = np.full((m, n), np.nan)
    v = e0
    for t in range(k, m):
        block = r[:, t - k:t]
        xc = block - block.mean(axis=1, keepdims=True)
        ck = xc @ xc.T / (k - 1)
        pair = top_eigenpair(ck, start=v, reference=e0)
        v = pair.eigenvector
        vecs[t] = v
        pi[t] = float(r[:, t] @ v)
    return pi, vecs


def eigen_factor(panel: ReturnsPanel, beta: float, window: int | None = None) -> Indicator:
    """Exponentially smoothed projection on the local market mode.

    ``window`` defaults to three times the number of assets.
    """
    k = 3 * panel.n_assets if window is None else int(window)
    tk = ema_cutoff(beta)
    if panel.n_dates <= k + tk + 1:
        raise SeriesTooShort(f"need more than {k + tk + 1} dates, panel has {panel.n_dates}")
    return ema_smooth(eigen_projection(panel, k), beta)


def eigen_projection(panel: ReturnsPanel, window: int | None = None) -> Indicator:
    """Unsmoothed, standardized eigen-factor (the daily projections), valid from ``window`` on.

    Smoothing it with :func:`ema_smooth` gives :func:`eigen_factor`; sweeps
    over decay rates reuse one projection series this way.
    """
    k = 3 * panel.n_assets if window is None else int(window)
    pi, _ = local_projections(panel, k)
    return standardize_indicator(Indicator(pi, k, "eigenfactor", window=k))


def lagged(x: Indicator, tau: int) -> np.ndarray:
    """Series shifted forward by ``tau``: entry ``t`` holds ``x(t - tau)``."""
    out = np.full(len(x), np.nan)
    if tau < len(x):
        out[tau:] = x.values[: len(x) - tau]
    return out


def from_array(values, kind: str = "synthetic", valid_from: int = 0, standardize: bool = True) -> Indicator:
    ind = Indicator(np.asarray(values, dtype=np.float64), valid_from, kind)
    return standardize_indicator(ind) if standardize else ind
