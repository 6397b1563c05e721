from __future__ import annotations

import numpy as np
import pytest

from corrpra.kernels import available_backends
from corrpra.panel import AssetMeta, standardize_panel

BACKENDS = available_backends()


def make_assets(n: int, sectors=("IDX", "CMD", "YLD", "FXR")) -> list[AssetMeta]:
    return [AssetMeta(f"A{k:02d}", sectors[k % len(sectors)]) for k in range(n)]


def random_panel(n: int = 6, t: int = 400, seed: int = 0, mix: float = 0.3):
    """Standardized Gaussian panel with a common factor of weight ``mix``."""
    g = np.random.default_rng(seed)
    common = g.standard_normal(t)
    raw = mix * common + g.standard_normal((n, t))
    return standardize_panel(raw, make_assets(n))


def random_symmetric(n: int, seed: int) -> np.ndarray:
    g = np.random.default_rng(seed)
    a = g.standard_normal((n, n))
    return (a + a.T) / 2.0


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]


@pytest.fixture
def panel():
    return random_panel()


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
