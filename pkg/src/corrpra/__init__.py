"""Principal regression analysis of instantaneous asset correlations on lagged indicators."""

from .errors import InputError, NumericalError, PraError
from .indicators import (
    Indicator,
    eigen_factor,
    ema_cutoff,
    ema_smooth,
    market_index,
    sector_index,
    standardize_indicator,
)
from .kernels import BACKEND
from .panel import AssetMeta, PricePanel, ReturnsPanel, Sector, load_price_csv, standardize_panel, vol_adjusted_returns
from .pra import PraConfig, PraFit, fit_multi, fit_single, implied_top_eigenvalue, unconditional_correlation
from .spectra import Spectrum, angle, eig_symmetric, overlap, sign_align, top_eigenpair

__version__ = "0.1.0"
