from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from corrpra.errors import DimensionMismatch, DuplicateRow, InputError, MissingCell, UnknownAsset, UnknownSector, ZeroVariance
from corrpra.panel import (
    AssetMeta,
    PricePanel,
    ReturnsPanel,
    Sector,
    build_panel,
    load_price_csv,
    standardize_panel,
    vol_adjusted_returns,
)

from .conftest import make_assets


def write_csvs(tmp_path, prices: dict, meta: list[tuple[str, str, str]], skip=()):
    dates = [f"2020-01-{d:02d}" for d in range(1, 1 + len(next(iter(prices.values()))))]
    lines = ["date,asset_id,price"]
    for aid, series in prices.items():
        for d, p in zip(dates, series):
            if (d, aid) not in skip:
                lines.append(f"{d},{aid},{float(p)!r}")
    (tmp_path / "prices.csv").write_text("\n".join(lines) + "\n")
    (tmp_path / "meta.csv").write_text("asset_id,sector,market\n" + "\n".join(",".join(m) for m in meta) + "\n")
    return tmp_path / "prices.csv", tmp_path / "meta.csv"


def test_load_minimal(tmp_path):
    p, m = write_csvs(tmp_path, {"B": [1.0, 2.0, 3.0], "A": [4.0, 5.0, 6.0]}, [("A", "YLD", "US"), ("B", "IDX", "US")])
    pp = load_price_csv(p, m)
    assert (pp.n_assets, pp.n_dates) == (2, 3)
    # IDX sorts before YLD
    assert [a.asset_id for a in pp.assets] == ["B", "A"]
    np.testing.assert_array_equal(pp.prices[0], [1.0, 2.0, 3.0])


def test_load_missing_cell(tmp_path):
    p, m = write_csvs(
        tmp_path, {"A": [1.0, 2.0, 3.0], "B": [1.0, 2.0, 3.0]}, [("A", "IDX", ""), ("B", "CMD", "")], skip={("2020-01-02", "B")}
    )
    with pytest.raises(MissingCell):
        load_price_csv(p, m)


def test_load_unknown_sector(tmp_path):
    p, m = write_csvs(tmp_path, {"A": [1.0, 2.0]}, [("A", "EQTY", "")])
    with pytest.raises(UnknownSector):
        load_price_csv(p, m)


def test_load_duplicate_and_unknown_asset(tmp_path):
    p, m = write_csvs(tmp_path, {"A": [1.0, 2.0]}, [("A", "IDX", "")])
    p.write_text(p.read_text() + "2020-01-01,A,9.0\n")
    with pytest.raises(DuplicateRow):
        load_price_csv(p, m)
    p, m = write_csvs(tmp_path, {"A": [1.0, 2.0]}, [("A", "IDX", "")])
    p.write_text(p.read_text() + "2020-01-01,Z,9.0\n")
    with pytest.raises(UnknownAsset):
        load_price_csv(p, m)


def test_sector_parse():
    assert Sector.parse(" yld ") is Sector.YLD
    with pytest.raises(UnknownSector):
        Sector.parse("EQTY")


def test_price_panel_validation():
    with pytest.raises(InputError):
        PricePanel(make_assets(1), ["b", "a"], np.ones((1, 2)))
    with pytest.raises(DimensionMismatch):
        PricePanel(make_assets(2), ["a"], np.ones((1, 1)))


def ramp_panel(diffs: np.ndarray) -> PricePanel:
    prices = np.concatenate([[100.0], 100.0 + np.cumsum(diffs)])
    return PricePanel([AssetMeta("X", "IDX")], [f"d{t:04d}" for t in range(prices.size)], prices[None, :])


def test_linear_ramp_is_degenerate():
    raw = vol_adjusted_returns(ramp_panel(np.ones(40)), vol_window=30)
    assert np.all(raw.degenerate[0, 30:])
    assert np.all(raw.values == 0.0)


def test_alternating_diffs():
    diffs = np.array([1.0, -1.0] * 25)
    raw = vol_adjusted_returns(ramp_panel(diffs), vol_window=30)
    sigma = math.sqrt(30 / 29)  # fifteen +1 and fifteen -1 around mean zero
    assert sigma == pytest.approx(1.017, abs=1e-3)
    np.testing.assert_allclose(np.abs(raw.values[0, 30:]), 1.0 / sigma, atol=1e-12)
    assert not raw.degenerate.any()


def test_clip_saturation():
    g = np.random.default_rng(0)
    diffs = g.standard_normal(40)
    diffs[35] = 100.0 * diffs[5:35].std(ddof=1)
    raw = vol_adjusted_returns(ramp_panel(diffs), vol_window=30, clip=5.0)
    assert raw.values[0, 35] == 5.0
    assert np.max(np.abs(raw.values)) <= 5.0


def test_volatility_is_causal():
    g = np.random.default_rng(1)
    diffs = g.standard_normal(60)
    raw = vol_adjusted_returns(ramp_panel(diffs), vol_window=10, clip=1e9)
    t = 25  # column t is diff t
    assert raw.values[0, t] == pytest.approx(diffs[t] / diffs[t - 10 : t].std(ddof=1), rel=1e-12)


def test_vol_window_checks():
    with pytest.raises(InputError):
        vol_adjusted_returns(ramp_panel(np.ones(5)), vol_window=1)
    with pytest.raises(InputError):
        vol_adjusted_returns(ramp_panel(np.ones(5)), vol_window=30)


def test_standardize_examples():
    p = standardize_panel(np.array([[1.0, 2.0, 3.0]]), make_assets(1))
    np.testing.assert_allclose(p.returns[0], [-1.0, 0.0, 1.0], atol=1e-15)
    again = standardize_panel(p.returns, p.assets)
    np.testing.assert_allclose(again.returns, p.returns, atol=1e-12)
    with pytest.raises(ZeroVariance):
        standardize_panel(np.array([[2.0, 2.0, 2.0]]), make_assets(1))


def test_sign_vector_and_uniform_mode():
    p = standardize_panel(np.random.default_rng(0).standard_normal((4, 10)), make_assets(4))
    np.testing.assert_array_equal(p.sign_vector, [1, 1, -1, 1])
    assert p.uniform_mode @ p.uniform_mode == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        p.returns[0, 0] = 1.0


def test_returns_panel_validation():
    with pytest.raises(DuplicateRow):
        ReturnsPanel([AssetMeta("A", "IDX"), AssetMeta("A", "CMD")], ["d"], np.zeros((2, 1)))
    with pytest.raises(DimensionMismatch):
        ReturnsPanel(make_assets(2), ["d"], np.zeros((2, 2)))


def test_build_panel_and_csv_round_trip(tmp_path):
    g = np.random.default_rng(3)
    prices = {f"X{k}": list(100 + np.cumsum(g.standard_normal(80))) for k in range(3)}
    p, m = write_csvs(tmp_path, prices, [("X0", "IDX", "a"), ("X1", "YLD", "b"), ("X2", "FXR", "c")])
    panel = build_panel(p, m, vol_window=30)
    assert panel.n_dates == 80 - 1 - 30
    np.testing.assert_allclose(panel.returns.mean(axis=1), 0.0, atol=1e-10)
    np.testing.assert_allclose(panel.returns.std(axis=1, ddof=1), 1.0, atol=1e-10)
    out = tmp_path / "panel.csv"
    panel.to_csv(out)
    back = ReturnsPanel.from_csv(out)
    np.testing.assert_array_equal(back.returns, panel.returns)
    assert back.dates == panel.dates
    assert back.assets == panel.assets


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 12), elements=st.floats(-50, 50, allow_nan=False)))
def test_property_standardize(raw):
    try:
        p = standardize_panel(raw, make_assets(3))
    except ZeroVariance:
        return
    np.testing.assert_allclose(p.returns.mean(axis=1), 0.0, atol=1e-10)
    np.testing.assert_allclose(p.returns.std(axis=1, ddof=1), 1.0, atol=1e-10)
    again = standardize_panel(p.returns, p.assets)
    np.testing.assert_allclose(again.returns, p.returns, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 45, elements=st.floats(-1e3, 1e3, allow_nan=False)), st.floats(0.5, 10))
def test_property_clip_bound(diffs, clip):
    raw = vol_adjusted_returns(ramp_panel(diffs), vol_window=10, clip=clip)
    assert np.max(np.abs(raw.values)) <= clip
    assert raw.values.shape[1] == diffs.size
