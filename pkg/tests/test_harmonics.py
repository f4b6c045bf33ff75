import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import legendre as npleg
from scipy import special

from nodalforge.harmonics import (HarmonicError, HarmonicIndex, dm_legendre, eigenvalue, eval_ynm,
                                  f_nm_roots, globe_graph, legendre_p, resolve_poles, ynm_gradient)


def test_legendre_values():
    assert legendre_p(0, 0.3) == 1.0
    assert legendre_p(3, 0.5) == pytest.approx(-0.4375, abs=1e-15)
    for n in range(21):
        assert legendre_p(n, 1.0) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(HarmonicError):
        legendre_p(2, 1.5)


@settings(max_examples=60)
@given(st.integers(0, 30), st.floats(-1, 1))
def test_legendre_matches_scipy(n, x):
    assert legendre_p(n, x) == pytest.approx(special.eval_legendre(n, x), abs=1e-11)


@pytest.mark.parametrize("n", range(1, 9))
def test_dm_legendre_matches_associated_legendre(n):
    # lpmv carries the Condon-Shortley sign and the (1-x^2)^(m/2) factor
    x = np.linspace(-0.95, 0.95, 37)
    for m in range(0, n + 1):
        ref = special.lpmv(m, n, x) * (-1) ** m / (1 - x ** 2) ** (m / 2)
        assert np.allclose(dm_legendre(n, m, x), ref, atol=1e-9 * max(1, np.max(np.abs(ref))))


def test_root_examples():
    assert f_nm_roots(2, 1) == pytest.approx([0.0], abs=1e-12)
    assert f_nm_roots(3, 1) == pytest.approx([-1 / math.sqrt(5), 1 / math.sqrt(5)], abs=1e-12)
    for m in range(1, 8):
        assert f_nm_roots(m, m) == []


@pytest.mark.parametrize("n", range(1, 16))
def test_root_counts_and_values(n):
    for m in range(1, n + 1):
        r = f_nm_roots(n, m)
        assert len(r) == n - m
        ref = np.sort(npleg.Legendre.basis(n).deriv(m).roots().real) if n > m else []
        assert np.allclose(r, ref, atol=1e-9)


def test_eval_ynm_examples():
    assert float(eval_ynm(HarmonicIndex(3, 2), 0.0, 1.0)) == 0.0
    phi = np.linspace(0, 2 * np.pi, 13)
    assert np.max(np.abs(eval_ynm(HarmonicIndex(2, 1), np.pi / 2, phi))) < 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.data())
def test_gradient_matches_finite_differences(n, data):
    m = data.draw(st.integers(1, n))
    th = data.draw(st.floats(0.2, 2.9))
    ph = data.draw(st.floats(0, 6.2))
    idx, h = HarmonicIndex(n, m), 1e-6
    gt, gp = ynm_gradient(idx, th, ph)
    ft = (eval_ynm(idx, th + h, ph) - eval_ynm(idx, th - h, ph)) / (2 * h)
    fp = (eval_ynm(idx, th, ph + h) - eval_ynm(idx, th, ph - h)) / (2 * h)
    scale = max(1.0, abs(float(eval_ynm(idx, th, ph))))
    assert gt == pytest.approx(ft, abs=1e-5 * scale * n ** 2)
    assert gp == pytest.approx(fp, abs=1e-5 * scale * n ** 2)


def test_eigenvalues():
    assert eigenvalue(3) == 12
    assert eigenvalue(10) == 110
    with pytest.raises(HarmonicError):
        eigenvalue(-1)


def test_index_validation():
    for n, m in [(2, 0), (2, 3), (0, 0)]:
        with pytest.raises(HarmonicError):
            HarmonicIndex(n, m)


@pytest.mark.parametrize("nm,crossings", [((4, 2), 8), ((6, 3), 18), ((3, 1), 4)])
def test_globe_crossings(nm, crossings):
    g = globe_graph(HarmonicIndex(*nm))
    assert len(g.graph.rot) - 2 == crossings
    assert len(g.graph.rot["N"]) == len(g.graph.rot["S"]) == 2 * nm[1]


def test_globe_rejects_n_equals_m():
    with pytest.raises(HarmonicError):
        globe_graph(HarmonicIndex(3, 3))


def test_resolve_twice_raises():
    once = resolve_poles(globe_graph(HarmonicIndex(4, 2)))
    assert "N" not in once.rot
    with pytest.raises(HarmonicError):
        resolve_poles(once)
