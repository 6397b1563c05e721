"""Synthetic panels with a planted conditional-correlation effect.

Returns on day ``t`` are Gaussian with covariance
``psd_project(C* + sum_F x_F(t-1) D*_F)``, so the population regression of
``r_i(t) r_j(t)`` on the lagged drivers recovers ``C*`` and ``D*`` wherever the
projection is inactive.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ._rng import substream
from .errors import Infeasible, InputError, NotPositiveSemiDefinite
from .indicators import Indicator, ema_cutoff, standardize_indicator
from .panel import AssetMeta, ReturnsPanel, Sector, standardize_panel
from .pra import PraFit
from .spectra import eig_symmetric

PROCESSES = ("ar1", "ema", "endogenous")
_CHUNK = 4096


def _pair_key(a: str, b: str) -> str:
    a, b = sorted((a, b))
    return f"{a}-{b}"


@dataclass(frozen=True)
class SyntheticSpec:
    """Block correlation structure, planted effect and driver process.

    ``cross`` maps ``"A-B"`` sector pairs (either order) to correlations;
    missing pairs are uncorrelated. ``effect_direction`` is ``"market_mode"``
    (``D* = -a v1 v1^T``) or an explicit N x N matrix scaled by ``a``.
    ``process`` is ``"ar1"`` (uses ``phi``), ``"ema"`` (EMA with decay
    ``beta`` of i.i.d. innovations) or ``"endogenous"`` (EMA with decay
    ``beta`` of the panel's own signed index).
    """

    sector_sizes: dict[str, int]
    within: dict[str, float]
    cross: dict[str, float] = field(default_factory=dict)
    effect_amplitude: float = 0.0
    effect_direction: str | list = "market_mode"
    process: str = "ar1"
    phi: float = 0.9
    beta: float = 0.1
    psd_floor: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        sizes = {Sector.parse(k).value: int(v) for k, v in self.sector_sizes.items()}
        if any(v < 1 for v in sizes.values()):
            raise InputError("sector sizes must be positive")
        object.__setattr__(self, "sector_sizes", sizes)
        within = {Sector.parse(k).value: float(v) for k, v in self.within.items()}
        object.__setattr__(self, "within", within)
        cross = {}
        for k, v in self.cross.items():
            a, b = k if isinstance(k, tuple) else k.split("-")
            cross[_pair_key(Sector.parse(a).value, Sector.parse(b).value)] = float(v)
        object.__setattr__(self, "cross", cross)
        if self.effect_amplitude < 0:
            raise InputError("effect amplitude must be nonnegative")
        if self.process not in PROCESSES:
            raise InputError(f"unknown driver process {self.process!r}; expected one of {PROCESSES}")
        if not abs(self.phi) < 1:
            raise InputError("AR(1) coefficient must satisfy |phi| < 1")
        if isinstance(self.effect_direction, str) and self.effect_direction != "market_mode":
            raise InputError(f"unknown effect direction {self.effect_direction!r}")

    @classmethod
    def four_sector(cls, size: int = 5, within: float = 0.4, cross: float = 0.1, **kw) -> "SyntheticSpec":
        """Four equal sectors; cross-sector correlation is ``-|cross|`` for pairs involving YLD."""
        secs = [s.value for s in Sector]
        pairs = {}
        for i, a in enumerate(secs):
            for b in secs[i + 1:]:
                pairs[_pair_key(a, b)] = -abs(cross) if "YLD" in (a, b) else abs(cross)
        return cls({s: size for s in secs}, {s: within for s in secs}, pairs, **kw)

    @property
    def n_assets(self) -> int:
        return sum(self.sector_sizes.values())

    def assets(self) -> list[AssetMeta]:
        return [AssetMeta(f"{s}{k:02d}", s, "synthetic") for s, n in self.sector_sizes.items() for k in range(n)]

    def to_json(self) -> dict:
        out = asdict(self)
        if not isinstance(self.effect_direction, str):
            out["effect_direction"] = np.asarray(self.effect_direction).tolist()
        return out

    @classmethod
    def from_json(cls, doc) -> "SyntheticSpec":
        if not isinstance(doc, dict):
            doc = json.loads(doc)
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise InputError(f"unknown synthetic spec fields: {sorted(extra)}")
        return cls(**doc)


@dataclass(frozen=True)
class SyntheticPanel:
    panel: ReturnsPanel
    indicator: Indicator
    c_star: np.ndarray
    d_star: np.ndarray
    spec: SyntheticSpec
    projection_fraction: float
    base: Indicator | None = None
    approximate: bool = False

    def truth_json(self) -> dict:
        return {
            "C_star": self.c_star.tolist(),
            "D_star": self.d_star.tolist(),
            "spec": self.spec.to_json(),
            "seed": self.spec.seed,
            "projection_fraction": self.projection_fraction,
            "approximate": self.approximate,
        }


def build_block_correlation(spec: SyntheticSpec) -> np.ndarray:
    labels = [s for s, n in spec.sector_sizes.items() for _ in range(n)]
    n = len(labels)
    c = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = labels[i], labels[j]
            rho = spec.within.get(a, 0.0) if a == b else spec.cross.get(_pair_key(a, b), 0.0)
            if not abs(rho) < 1:
                raise NotPositiveSemiDefinite(f"correlation {rho} between {a} and {b} is not inside (-1, 1)")
            c[i, j] = c[j, i] = rho
    lam_min = float(eig_symmetric(c).eigenvalues[-1])
    if lam_min < -1e-12:
        raise NotPositiveSemiDefinite(f"block correlation matrix has eigenvalue {lam_min:.4g}")
    return c


def psd_project(A, floor: float = 1e-8) -> np.ndarray:
    """Raise eigenvalues below ``floor`` to ``floor`` and rebuild the matrix."""
    spec = eig_symmetric(A)
    w = np.maximum(spec.eigenvalues, floor)
    v = spec.eigenvectors
    out = (v * w) @ v.T
    return (out + out.T) / 2.0


def _ar1(phi: float, n: int, g: np.random.Generator) -> np.ndarray:
    eta = g.standard_normal(n)
    x = np.empty(n)
    x[0] = eta[0]
    scale = math.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + scale * eta[t]
    return x


def ar1_indicator(phi: float, T: int, seed: int) -> Indicator:
    """Stationary unit-variance AR(1) series, standardized."""
    if not abs(phi) < 1:
        raise InputError("AR(1) coefficient must satisfy |phi| < 1")
    x = _ar1(phi, T, substream(seed, "ar1"))
    return standardize_indicator(Indicator(x, 0, "synthetic"))


def correlated_ar1(phi: float, corr: float, T: int, seed: int, k: int = 2) -> np.ndarray:
    """``k`` AR(1) series whose innovations (hence stationary values) have pairwise correlation ``corr``."""
    if not -1.0 / (k - 1) < corr < 1:
        raise InputError("innovation correlation outside the valid range")
    g = substream(seed, "ar1_multi")
    chol = np.linalg.cholesky(np.full((k, k), corr) + (1 - corr) * np.eye(k))
    eta = chol @ g.standard_normal((k, T))
    x = np.empty((k, T))
    x[:, 0] = eta[:, 0]
    scale = math.sqrt(1.0 - phi * phi)
    for t in range(1, T):
        x[:, t] = phi * x[:, t - 1] + scale * eta[:, t]
    return x


def _unit(x: np.ndarray) -> np.ndarray:
    return (x - x.mean()) / x.std(ddof=1)


def _dates(T: int) -> list[str]:
    days = np.busday_offset(np.datetime64("2000-01-03"), np.arange(T), roll="forward")
    return [str(d) for d in days]


def _check_feasible(active: int, T: int):
    if active >= 0.5 * T:
        raise Infeasible(f"PSD projection active on {active} of {T} dates; reduce the effect amplitude")


def simulate_returns(c_star, effects: Sequence[np.ndarray], drivers_prev: np.ndarray, z: np.ndarray, floor: float):
    """Draw one Gaussian return vector per date.

    ``drivers_prev[F, t]`` is the driver value conditioning day ``t`` and
    ``z`` holds T x N standard normals. Returns ``(r, active)`` with ``r``
    N x T and the boolean per-date projection flags.
    """
    c_star = np.asarray(c_star, dtype=np.float64)
    effects = np.asarray(effects, dtype=np.float64).reshape(-1, *c_star.shape)
    drivers_prev = np.asarray(drivers_prev, dtype=np.float64).reshape(len(effects), -1)
    T, n = z.shape
    r = np.empty((n, T))
    active = np.zeros(T, dtype=bool)
    for lo in range(0, T, _CHUNK):
        hi = min(lo + _CHUNK, T)
        sigma = c_star[None] + np.einsum("ft,fij->tij", drivers_prev[:, lo:hi], effects)
        w, v = np.linalg.eigh(sigma)
        active[lo:hi] = w[:, 0] < floor
        w = np.sqrt(np.maximum(w, floor))
        proj = np.einsum("tji,tj->ti", v, z[lo:hi])
        r[:, lo:hi] = np.einsum("tij,tj->it", v, w * proj)
    return r, active


def _market_mode_effect(c_star: np.ndarray, signs: np.ndarray) -> np.ndarray:
    v1 = eig_symmetric(c_star, signs / math.sqrt(len(signs))).eigenvectors[:, 0]
    return -np.outer(v1, v1)


def planted_effect(spec: SyntheticSpec, c_star: np.ndarray | None = None) -> np.ndarray:
    c_star = build_block_correlation(spec) if c_star is None else c_star
    if isinstance(spec.effect_direction, str):
        signs = np.array([a.sign for a in spec.assets()], dtype=np.float64)
        direction = _market_mode_effect(c_star, signs)
    else:
        direction = np.asarray(spec.effect_direction, dtype=np.float64)
        if direction.shape != c_star.shape:
            raise InputError(f"custom effect has shape {direction.shape}, expected {c_star.shape}")
        direction = (direction + direction.T) / 2.0
    return spec.effect_amplitude * direction


def generate_panel(spec: SyntheticSpec, T: int) -> SyntheticPanel:
    n = spec.n_assets
    if T < 10 * n:
        raise InputError(f"need T >= 10 N = {10 * n}, got {T}")
    assets = spec.assets()
    c_star = build_block_correlation(spec)
    d_star = planted_effect(spec, c_star)
    z = substream(spec.seed, "synth_returns").standard_normal((T, n))
    base = None

    if spec.process == "endogenous":
        r, x, active = _simulate_endogenous(spec, c_star, d_star, z, assets)
        indicator = standardize_indicator(Indicator(x, 0, "synthetic"))
        approximate = True
    else:
        g = substream(spec.seed, "synth_driver")
        if spec.process == "ar1":
            x_full = _unit(_ar1(spec.phi, T + 1, g))
        else:
            tk = ema_cutoff(spec.beta)
            eta = g.standard_normal(T + 1 + tk)
            wts = np.exp(-spec.beta * np.arange(tk + 1))
            x_full = _unit(np.convolve(eta, wts, mode="valid"))
            base = Indicator(eta[tk + 1:], 0, "synthetic")
        r, active = simulate_returns(c_star, [d_star], x_full[None, :T], z, spec.psd_floor)
        indicator = standardize_indicator(Indicator(x_full[1:], 0, "synthetic"))
        approximate = False

    _check_feasible(int(active.sum()), T)
    panel = standardize_panel(r, assets, _dates(T))
    return SyntheticPanel(
        panel=panel,
        indicator=indicator,
        c_star=c_star,
        d_star=d_star,
        spec=spec,
        projection_fraction=float(active.mean()),
        base=base,
        approximate=approximate,
    )


def _simulate_endogenous(spec, c_star, d_star, z, assets):
    """Driver is the EMA of the panel's own signed index, fed back one day later."""
    T, n = z.shape
    s = np.array([a.sign for a in assets], dtype=np.float64)
    tk = ema_cutoff(spec.beta)
    wts = np.exp(-spec.beta * np.arange(tk + 1))
    # stationary scale of the smoothed index under C*, used to keep the driver near unit variance
    scale = math.sqrt(float(s @ c_star @ s) / n**2 * float(np.sum(wts**2)))
    hist = np.zeros(tk + 1)
    r = np.empty((n, T))
    x = np.empty(T)
    active = np.zeros(T, dtype=bool)
    x_prev = 0.0
    for t in range(T):
        sigma = c_star + x_prev * d_star
        w, v = np.linalg.eigh(sigma)
        active[t] = w[0] < spec.psd_floor
        w = np.sqrt(np.maximum(w, spec.psd_floor))
        r[:, t] = v @ (w * (v.T @ z[t]))
        hist = np.roll(hist, 1)
        hist[0] = float(s @ r[:, t]) / n
        x[t] = float(hist @ wts) / scale
        x_prev = x[t]
    return r, x, active


def generate_factor_panel(
    c_star, effects: Sequence[np.ndarray], drivers: np.ndarray, assets: Sequence[AssetMeta], seed: int, floor: float = 1e-8
) -> tuple[ReturnsPanel, list[Indicator], float]:
    """Panel driven by several factors at once.

    ``drivers`` has shape (K, T + 1); column ``t`` conditions day ``t`` and the
    returned indicators hold columns ``1 .. T`` so that lag one lines up.
    """
    drivers = np.asarray(drivers, dtype=np.float64)
    T = drivers.shape[1] - 1
    z = substream(seed, "synth_returns").standard_normal((T, len(assets)))
    r, active = simulate_returns(c_star, effects, drivers[:, :T], z, floor)
    _check_feasible(int(active.sum()), T)
    panel = standardize_panel(r, list(assets), _dates(T))
    inds = [standardize_indicator(Indicator(d[1:], 0, "synthetic")) for d in drivers]
    return panel, inds, float(active.mean())


def recovery_score(fit: PraFit, c_star, d_star, name: str | None = None) -> dict:
    """Relative Frobenius error of a fitted sensitivity matrix and its spectral agreement with the truth."""
    name = fit.factor_names[0] if name is None else name
    d_hat = fit.sensitivities[name]
    d_star = np.asarray(d_star)
    rel = float(np.linalg.norm(d_hat - d_star) / np.linalg.norm(d_star)) if np.any(d_star) else float("nan")
    spec = fit.d_spectra[name]
    v1_true = eig_symmetric(c_star, fit.c_spectrum.reference).eigenvectors[:, 0]
    return {
        "factor": name,
        "rel_frobenius_error": rel,
        "lambda_min": float(spec.eigenvalues[-1]),
        "lambda_max": float(spec.eigenvalues[0]),
        "sign_lambda_min": int(np.sign(spec.eigenvalues[-1])),
        "abs_overlap_true_mode_vN": abs(float(v1_true @ spec.eigenvectors[:, -1])),
        "abs_overlap_true_mode_v1": abs(float(v1_true @ spec.eigenvectors[:, 0])),
    }
