"""Price ingestion, volatility-adjusted returns and the standardized returns panel."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    DimensionMismatch,
    DuplicateRow,
    InputError,
    MissingCell,
    UnknownAsset,
    UnknownSector,
    ZeroVariance,
)

DEGENERATE_VOL = 1e-12


class Sector(str, Enum):
    IDX = "IDX"
    CMD = "CMD"
    YLD = "YLD"
    FXR = "FXR"

    @classmethod
    def parse(cls, value) -> "Sector":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise UnknownSector(f"unknown sector {value!r}; expected one of IDX, CMD, YLD, FXR") from None


SECTOR_ORDER = {s: i for i, s in enumerate(Sector)}


@dataclass(frozen=True)
class AssetMeta:
    asset_id: str
    sector: Sector
    market: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sector", Sector.parse(self.sector))

    @property
    def sign(self) -> int:
        # bonds carry the negative weight in the signed index
        return -1 if self.sector is Sector.YLD else 1


def _check_unique(assets: Sequence[AssetMeta]):
    seen = set()
    for a in assets:
        if a.asset_id in seen:
            raise DuplicateRow(f"asset {a.asset_id!r} appears twice")
        seen.add(a.asset_id)


@dataclass(frozen=True)
class PricePanel:
    assets: list[AssetMeta]
    dates: list[str]
    prices: np.ndarray

    def __post_init__(self):
        _check_unique(self.assets)
        if self.prices.shape != (len(self.assets), len(self.dates)):
            raise DimensionMismatch(
                f"prices shape {self.prices.shape} vs {len(self.assets)} assets x {len(self.dates)} dates"
            )
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise InputError("dates must be strictly increasing")

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def n_dates(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class RawReturns:
    """Clipped, volatility-adjusted returns; column ``t`` is the move into ``dates[t]``.

    The first ``burn_in`` columns lack a full trailing volatility window and
    hold zeros. ``degenerate`` flags entries whose trailing volatility was
    below 1e-12 (those entries are also zero).
    """

    values: np.ndarray
    dates: list[str]
    burn_in: int
    degenerate: np.ndarray


@dataclass(frozen=True)
class ReturnsPanel:
    assets: list[AssetMeta]
    dates: list[str]
    returns: np.ndarray
    sign_vector: np.ndarray = field(init=False)
    uniform_mode: np.ndarray = field(init=False)

    def __post_init__(self):
        _check_unique(self.assets)
        r = np.ascontiguousarray(self.returns, dtype=np.float64)
        if r.ndim != 2 or r.shape[0] != len(self.assets):
            raise DimensionMismatch(f"returns shape {r.shape} for {len(self.assets)} assets")
        if len(self.dates) != r.shape[1]:
            raise DimensionMismatch(f"{len(self.dates)} dates for {r.shape[1]} return columns")
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)
        s = np.array([a.sign for a in self.assets], dtype=np.float64)
        s.setflags(write=False)
        object.__setattr__(self, "sign_vector", s)
        e0 = s / math.sqrt(s.shape[0])
        e0.setflags(write=False)
        object.__setattr__(self, "uniform_mode", e0)

    @property
    def n_assets(self) -> int:
        return self.returns.shape[0]

    @property
    def n_dates(self) -> int:
        return self.returns.shape[1]

    @property
    def asset_ids(self) -> list[str]:
        return [a.asset_id for a in self.assets]

    def sector_members(self, sector) -> np.ndarray:
        sector = Sector.parse(sector)
        return np.array([i for i, a in enumerate(self.assets) if a.sector is sector], dtype=int)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", *self.asset_ids])
            for t, d in enumerate(self.dates):
                w.writerow([d, *(repr(float(x)) for x in self.returns[:, t])])
        sidecar = {
            "assets": [{"asset_id": a.asset_id, "sector": a.sector.value, "market": a.market} for a in self.assets],
            "sign_vector": self.sign_vector.astype(int).tolist(),
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "ReturnsPanel":
        path = Path(path)
        sidecar = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        assets = [AssetMeta(a["asset_id"], a["sector"], a.get("market", "")) for a in sidecar["assets"]]
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if header[1:] != [a.asset_id for a in assets]:
            raise InputError("panel CSV columns do not match the sidecar asset list")
        dates = [r[0] for r in body]
        values = np.array([[float(x) for x in r[1:]] for r in body], dtype=np.float64).T
        return cls(assets=assets, dates=dates, returns=values.reshape(len(assets), len(dates)))


def load_price_csv(prices_path, meta_path) -> PricePanel:
    """Read long-format prices (``date,asset_id,price``) and asset metadata.

    Assets come out ordered by sector (IDX, CMD, YLD, FXR) then asset id;
    dates are sorted as strings, so ISO-8601 is expected.
    """
    assets: dict[str, AssetMeta] = {}
    with Path(meta_path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            aid = row["asset_id"].strip()
            if aid in assets:
                raise DuplicateRow(f"meta lists asset {aid!r} twice")
            assets[aid] = AssetMeta(aid, Sector.parse(row["sector"]), (row.get("market") or "").strip())

    cells: dict[tuple[str, str], float] = {}
    with Path(prices_path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["date"].strip(), row["asset_id"].strip())
            if key[1] not in assets:
                raise UnknownAsset(f"price row for asset {key[1]!r} missing from metadata")
            if key in cells:
                raise DuplicateRow(f"duplicate price for {key[1]!r} on {key[0]}")
            try:
                cells[key] = float(row["price"])
            except ValueError:
                raise InputError(f"bad price {row['price']!r} for {key[1]!r} on {key[0]}") from None

    ordered = sorted(assets.values(), key=lambda a: (SECTOR_ORDER[a.sector], a.asset_id))
    dates = sorted({d for d, _ in cells})
    prices = np.empty((len(ordered), len(dates)))
    for i, a in enumerate(ordered):
        for t, d in enumerate(dates):
            try:
                prices[i, t] = cells[(d, a.asset_id)]
            except KeyError:
                raise MissingCell(f"no price for {a.asset_id!r} on {d}") from None
    if not np.all(np.isfinite(prices)):
        raise InputError("non-finite prices")
    return PricePanel(assets=ordered, dates=dates, prices=prices)


def vol_adjusted_returns(panel: PricePanel, vol_window: int = 30, clip: float = 5.0) -> RawReturns:
    """Price differences divided by their trailing standard deviation, then clipped.

    The volatility for the move into day ``t`` is the sample standard
    deviation (ddof=1) of the ``vol_window`` previous price differences, so it
    uses nothing from day ``t`` itself.
    """
    if vol_window < 2:
        raise InputError("vol_window must be at least 2")
    if clip <= 0:
        raise InputError("clip must be positive")
    if panel.n_dates < vol_window + 2:
        raise InputError(f"need at least vol_window + 2 = {vol_window + 2} dates, got {panel.n_dates}")
    diffs = np.diff(panel.prices, axis=1)
    n, m = diffs.shape
    out = np.zeros((n, m))
    degenerate = np.zeros((n, m), dtype=bool)
    # window j covers diffs j .. j+w-1 and scales diff j+w
    sigma = sliding_window_view(diffs, vol_window, axis=1)[:, : m - vol_window].std(axis=2, ddof=1)
    bad = sigma < DEGENERATE_VOL
    scaled = np.divide(diffs[:, vol_window:], sigma, out=np.zeros_like(sigma), where=~bad)
    out[:, vol_window:] = np.clip(scaled, -clip, clip)
    degenerate[:, vol_window:] = bad
    return RawReturns(values=out, dates=list(panel.dates[1:]), burn_in=vol_window, degenerate=degenerate)


def _standardize_rows(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=1, keepdims=True)
    c = x - mu
    sd = np.sqrt((c * c).sum(axis=1, keepdims=True) / (x.shape[1] - 1))
    bad = np.flatnonzero(sd.ravel() <= 1e-14 * np.maximum(1.0, np.abs(mu.ravel())))
    if bad.size:
        raise ZeroVariance(f"constant return series in row(s) {bad.tolist()}")
    return c / sd


def standardize_panel(raw, meta: Sequence[AssetMeta], dates: Sequence[str] | None = None) -> ReturnsPanel:
    """Center and scale each asset's retained series to unit sample standard deviation.

    ``raw`` is a :class:`RawReturns` (burn-in columns are dropped) or a plain
    N x T array.
    """
    if isinstance(raw, RawReturns):
        values = raw.values[:, raw.burn_in:]
        dates = raw.dates[raw.burn_in:] if dates is None else list(dates)
    else:
        values = np.asarray(raw, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionMismatch("raw returns must be a 2-d array")
        if dates is None:
            dates = [f"t{t:06d}" for t in range(values.shape[1])]
    if values.shape[0] != len(meta):
        raise DimensionMismatch(f"{values.shape[0]} return rows for {len(meta)} assets")
    if values.shape[1] < 2:
        raise InputError("need at least two return dates to standardize")
    return ReturnsPanel(assets=list(meta), dates=list(dates), returns=_standardize_rows(values))


def build_panel(prices_path, meta_path, vol_window: int = 30, clip: float = 5.0) -> ReturnsPanel:
    prices = load_price_csv(prices_path, meta_path)
    raw = vol_adjusted_returns(prices, vol_window=vol_window, clip=clip)
    return standardize_panel(raw, prices.assets)
