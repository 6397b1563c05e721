"""Monte Carlo null hypothesis for sensitivity-matrix spectra.

Each trial refits the single-factor model with a random predictor that is
independent of the returns and records the ranked eigenvalues of the
resulting sensitivity matrix together with the overlaps of its extreme
eigenvectors with the market mode.
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from ._rng import substream
from .errors import EmptyNull, InputError, PraError, ZeroVariance
from .indicators import Indicator, ema_cutoff
from .panel import ReturnsPanel
from .pra import PraConfig, sensitivity_from_predictor, unconditional_correlation
from .spectra import eig_symmetric

logger = logging.getLogger(__name__)

NULL_MODES = ("iid", "iid_ema", "circular")
_BLOCK = 32
QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


class Statistic(str, Enum):
    MIN_EIGENVALUE = "min_eigenvalue"
    MAX_EIGENVALUE = "max_eigenvalue"
    ABS_OVERLAP = "abs_overlap"  # |<v1(C), v_N(D)>|
    ABS_OVERLAP_MAX = "abs_overlap_max"  # |<v1(C), v_1(D)>|


@dataclass(frozen=True)
class NullDistribution:
    n_trials: int
    seed: int
    mode: str
    eigenvalues: np.ndarray  # (successful trials, N), each row descending
    abs_overlap_min: np.ndarray
    abs_overlap_max: np.ndarray
    trial_index: np.ndarray
    beta: float | None = None
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_ok(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def mean_spectrum(self) -> np.ndarray:
        return null_mean_spectrum(self)

    def samples(self, statistic) -> np.ndarray:
        statistic = Statistic(statistic)
        if statistic is Statistic.MIN_EIGENVALUE:
            return self.eigenvalues[:, -1]
        if statistic is Statistic.MAX_EIGENVALUE:
            return self.eigenvalues[:, 0]
        if statistic is Statistic.ABS_OVERLAP:
            return self.abs_overlap_min
        return self.abs_overlap_max

    def to_json(self, include_trials: bool = True) -> dict:
        out = {
            "n_trials": self.n_trials,
            "n_failed": len(self.failures),
            "seed": self.seed,
            "mode": self.mode,
            "beta": None if self.beta is None or math.isinf(self.beta) else self.beta,
            "mean_spectrum": null_mean_spectrum(self).tolist() if self.n_ok else [],
            "quantiles": {
                s.value: {str(q): float(np.quantile(self.samples(s), q)) for q in QUANTILES}
                for s in Statistic
            }
            if self.n_ok
            else {},
        }
        if include_trials:
            out["trials"] = {
                "index": self.trial_index.tolist(),
                "eigenvalues": self.eigenvalues.tolist(),
                "abs_overlap_min": self.abs_overlap_min.tolist(),
                "abs_overlap_max": self.abs_overlap_max.tolist(),
            }
        if self.failures:
            out["failures"] = [{"trial": k, "error": msg} for k, msg in self.failures]
        return out


def _standardized(seg: np.ndarray) -> np.ndarray:
    mu = seg.mean()
    sd = math.sqrt(float(np.sum((seg - mu) ** 2)) / (seg.shape[0] - 1))
    if not sd > 1e-14 * max(1.0, abs(mu)):
        raise ZeroVariance("random predictor is constant on the aligned sample")
    return (seg - mu) / sd


def null_ensemble(
    panel: ReturnsPanel,
    config: PraConfig | None = None,
    n_trials: int = 1000,
    seed: int = 0,
    *,
    mode: str = "iid",
    beta: float | None = None,
    indicator: Indicator | None = None,
    threads: int | None = None,
) -> NullDistribution:
    """Spectra of sensitivity matrices fitted on random predictors.

    ``mode`` selects the predictor: ``"iid"`` standard normal, ``"iid_ema"``
    standard normal smoothed with decay ``beta``, or ``"circular"`` a random
    circular shift of ``indicator``'s valid values. When ``indicator`` is
    given the aligned sample matches the one its own fit would use.
    """
    config = config or PraConfig()
    if mode not in NULL_MODES:
        raise InputError(f"unknown null mode {mode!r}; expected one of {NULL_MODES}")
    if n_trials < 100:
        raise InputError(f"n_trials must be at least 100, got {n_trials}")
    if mode == "iid_ema" and beta is None:
        raise InputError("iid_ema null needs a decay rate")
    if mode == "circular" and indicator is None:
        raise InputError("circular null needs the indicator to shift")

    tau = config.tau
    m = panel.n_dates
    tk = ema_cutoff(beta) if mode == "iid_ema" else 0
    valid_from = indicator.valid_from if indicator is not None else 0
    start = max(tau, valid_from + tau, tk + tau)
    count = m - start
    if count < 3:
        raise InputError(f"aligned sample of {count} points is too short for a null ensemble")
    if n_trials < 1000:
        warnings.warn(f"null ensemble with {n_trials} < 1000 trials", stacklevel=2)

    r = np.ascontiguousarray(panel.returns[:, start:])
    c = unconditional_correlation(panel, config, start=start)
    v1 = eig_symmetric(c, panel.uniform_mode).eigenvectors[:, 0]
    base = indicator.valid if mode == "circular" else None

    def trial(k: int):
        g = substream(seed, "null", k)
        if mode == "circular":
            x = np.full(m, np.nan)
            x[valid_from:] = np.roll(base, int(g.integers(1, base.shape[0])))
        else:
            x = g.standard_normal(m)
            if mode == "iid_ema":
                x = kernels.ema_filter(x, float(beta), tk)
        z = _standardized(x[start - tau : m - tau])
        spec = eig_symmetric(sensitivity_from_predictor(r, z), v1)
        vecs = spec.eigenvectors
        return spec.eigenvalues, abs(float(v1 @ vecs[:, -1])), abs(float(v1 @ vecs[:, 0]))

    def run_block(lo: int):
        out = []
        for k in range(lo, min(lo + _BLOCK, n_trials)):
            try:
                out.append((k, trial(k), None))
            except PraError as exc:
                out.append((k, None, f"{type(exc).__name__}: {exc}"))
        return out

    workers = max(1, int(threads or os.cpu_count() or 1))
    blocks = range(0, n_trials, _BLOCK)
    if workers == 1:
        results = [run_block(lo) for lo in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_block, blocks))

    eig, omin, omax, idx, failures = [], [], [], [], []
    for block in results:
        for k, res, err in block:
            if err is not None:
                failures.append((k, err))
                continue
            idx.append(k)
            eig.append(res[0])
            omin.append(res[1])
            omax.append(res[2])
    if failures:
        logger.warning("%d of %d null trials failed", len(failures), n_trials)
    n = panel.n_assets
    return NullDistribution(
        n_trials=n_trials,
        seed=seed,
        mode=mode,
        eigenvalues=np.array(eig).reshape(-1, n),
        abs_overlap_min=np.array(omin),
        abs_overlap_max=np.array(omax),
        trial_index=np.array(idx, dtype=int),
        beta=beta,
        failures=failures,
    )


def p_value(null: NullDistribution, statistic, observed: float) -> float:
    """Add-one Monte Carlo p-value of an observed statistic.

    Lower tail for the smallest eigenvalue, upper tail for the largest
    eigenvalue and for absolute overlaps.
    """
    statistic = Statistic(statistic)
    if null.n_ok == 0:
        raise EmptyNull("null distribution has no successful trials")
    sample = null.samples(statistic)
    if statistic is Statistic.MIN_EIGENVALUE:
        hits = int(np.count_nonzero(sample <= observed))
    elif statistic is Statistic.MAX_EIGENVALUE:
        hits = int(np.count_nonzero(sample >= observed))
    else:
        hits = int(np.count_nonzero(sample >= abs(observed)))
    return (1 + hits) / (1 + sample.shape[0])


def null_mean_spectrum(null: NullDistribution) -> np.ndarray:
    if null.n_ok == 0:
        raise EmptyNull("null distribution has no successful trials")
    return null.eigenvalues.mean(axis=0)


def p_values_for(null: NullDistribution, extremes: dict) -> dict:
    """p-values for the four extreme statistics returned by ``PraFit.extremes``."""
    return {
        "lambda_min": p_value(null, Statistic.MIN_EIGENVALUE, extremes["lambda_min"]),
        "lambda_max": p_value(null, Statistic.MAX_EIGENVALUE, extremes["lambda_max"]),
        "overlap_min": p_value(null, Statistic.ABS_OVERLAP, extremes["overlap_min"]),
        "overlap_max": p_value(null, Statistic.ABS_OVERLAP_MAX, extremes["overlap_max"]),
    }
