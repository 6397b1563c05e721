from __future__ import annotations

import numpy as np
import pytest

from corrpra import kernels
from corrpra.kernels import available_backends

from .conftest import random_symmetric


def test_backend_is_named():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in available_backends()


@pytest.mark.parametrize("n", [1, 2, 5, 17])
def test_jacobi_reconstructs(backend, n):
    a = random_symmetric(n, n)
    w, v, sweeps = backend.jacobi_eigh(a)
    assert np.max(np.abs((v * w) @ v.T - a)) < 1e-12
    assert np.max(np.abs(v.T @ v - np.eye(n))) < 1e-12
    np.testing.assert_allclose(np.sort(w), np.linalg.eigvalsh(a), atol=1e-12)
    assert sweeps <= 20


def test_jacobi_diagonal_needs_no_sweeps(backend):
    w, v, sweeps = backend.jacobi_eigh(np.diag([3.0, 1.0, 2.0]))
    assert sweeps == 0
    np.testing.assert_array_equal(w, [3.0, 1.0, 2.0])
    np.testing.assert_array_equal(v, np.eye(3))


def test_jacobi_does_not_modify_input(backend):
    a = random_symmetric(4, 3)
    before = a.copy()
    backend.jacobi_eigh(a)
    np.testing.assert_array_equal(a, before)


def test_jacobi_reports_nonconvergence(backend):
    with pytest.raises(backend.KernelConvergenceError):
        backend.jacobi_eigh(random_symmetric(8, 1), max_sweeps=1)


def test_power_iteration_top_pair(backend):
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    lam, v, it, res = backend.power_iteration(a, np.array([1.0, 0.0]), 1e-12, 1000)
    assert lam == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(np.abs(v), [2**-0.5, 2**-0.5], atol=1e-12)
    assert res <= 1e-12


def test_power_iteration_zero_start(backend):
    lam, v, it, res = backend.power_iteration(np.eye(2), np.zeros(2), 1e-10, 10)
    assert lam == 0.0 and it == 0 and not np.any(v)


def test_ema_filter_definition(backend):
    x = np.arange(10.0)
    out = backend.ema_filter(x, 0.5, 3)
    assert np.all(np.isnan(out[:3]))
    w = np.exp(-0.5 * np.arange(4))
    for t in range(3, 10):
        assert out[t] == pytest.approx(sum(x[t - s] * w[s] for s in range(4)), abs=1e-12)


def test_ema_filter_short_series(backend):
    assert np.all(np.isnan(backend.ema_filter(np.ones(3), 0.1, 5)))


def test_ema_filter_read_only_input(backend):
    x = np.linspace(0, 1, 20)
    x.setflags(write=False)
    assert np.isfinite(backend.ema_filter(x, 0.3, 2)[2:]).all()


def test_weighted_gram_definition(backend):
    g = np.random.default_rng(2)
    r = g.standard_normal((4, 50))
    w = g.standard_normal(50)
    out = backend.weighted_gram(r, w)
    np.testing.assert_allclose(out, (r * w) @ r.T, atol=1e-12)
    np.testing.assert_array_equal(out, out.T)


def test_weighted_gram_length_mismatch(backend):
    with pytest.raises(ValueError):
        backend.weighted_gram(np.ones((2, 3)), np.ones(4))


@pytest.mark.skipif(len(available_backends()) < 2, reason="compiled backend not built")
class TestBackendsAgree:
    def setup_method(self):
        b = available_backends()
        self.c, self.py = b["cython"], b["python"]

    @pytest.mark.parametrize("seed", range(10))
    def test_jacobi(self, seed):
        a = random_symmetric(3 + seed, seed)
        wc, vc, sc = self.c.jacobi_eigh(a)
        wp, vp, sp = self.py.jacobi_eigh(a)
        assert sc == sp
        np.testing.assert_allclose(wc, wp, rtol=0, atol=1e-13)
        np.testing.assert_allclose(vc, vp, rtol=0, atol=1e-13)

    def test_power_iteration(self):
        a = random_symmetric(6, 5) + 6 * np.ones((6, 6))
        out_c = self.c.power_iteration(a, np.ones(6), 1e-12, 10_000)
        out_p = self.py.power_iteration(a, np.ones(6), 1e-12, 10_000)
        assert out_c[0] == pytest.approx(out_p[0], abs=1e-11)
        np.testing.assert_allclose(out_c[1], out_p[1], atol=1e-10)

    def test_ema_and_gram(self):
        g = np.random.default_rng(0)
        x = g.standard_normal(300)
        np.testing.assert_allclose(self.c.ema_filter(x, 0.1, 47), self.py.ema_filter(x, 0.1, 47), atol=1e-12)
        r = g.standard_normal((5, 300))
        np.testing.assert_allclose(self.c.weighted_gram(r, x), self.py.weighted_gram(r, x), atol=1e-11)
