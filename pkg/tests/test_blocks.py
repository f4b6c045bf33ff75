import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nodalforge import blocks as bk
from nodalforge.blocks import BlockError, BlockModel, BlockType
from nodalforge.ovals import all_configs, parse_config


def test_block_f_values():
    assert bk.block_f("Pants", 0j) == pytest.approx(8 / 9, abs=1e-15)
    assert bk.block_f("Cylinder", (0.0, 1.3)) == 0.0
    assert bk.block_f("Disk", (0.0, 0.0, 1.0)) == pytest.approx(0.75, abs=1e-15)
    assert bk.block_f("Disk", (1.0, 0.0, 0.0)) == 0.0
    assert bk.block_f("Cylinder", (1.0, 0.0)) == 1.0


@pytest.mark.parametrize("bt,pt", [("Disk", (0, 0, -1)), ("Cylinder", (1.5, 0)), ("Pants", 3 + 0j),
                                   ("Pants", 1 + 0j), ("Moebius", 0)])
def test_block_f_rejects_outside_points(bt, pt):
    with pytest.raises(BlockError):
        bk.block_f(bt, pt)


def test_collar_profiles():
    # with x = 2s, f = x - x^2/4 agrees with sin x to first order at the
    # Dirichlet end; at the Neumann end f = cos(sqrt(2) y) + O(y^4)
    for s in (1e-2, 1e-3):
        x = 2 * s
        assert abs(bk.block_f("Cylinder", (s, 0)) - math.sin(x)) <= x * x
        y = s
        assert abs(bk.block_f("Cylinder", (1 - y, 0)) - math.cos(math.sqrt(2) * y)) <= y ** 4


@pytest.mark.parametrize("bt", list(BlockType))
def test_collar_levels_use_the_cylinder_model(bt):
    m = BlockModel(bt)
    for a in (0.3 * m.l_dir, 0.9 * m.l_dir):
        # f-mass of the sin-collar below level a
        assert m.mass_below(a) == pytest.approx(2 * math.pi * (1 - math.cos(math.asin(a))), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_pants_mass_is_finite_and_monotone(a, b):
    m = BlockModel(BlockType.PANTS)
    lo, hi = sorted((a, b))
    assert math.isfinite(m.mass_below(lo)) and m.mass_below(lo) <= m.mass_below(hi) + 1e-12


@pytest.mark.parametrize("bt,kind", [("Disk", "max"), ("Cylinder", "none"), ("Pants", "saddle")])
def test_classify_critical(bt, kind):
    info = bk.classify_critical(bt)
    assert info.kind == kind
    if kind == "saddle":
        assert np.allclose(info.location, (0, 0), atol=1e-4)
        e1, e2 = info.hessian_eigs
        assert e1 < 0 < e2 and abs(e1 * e2) > 1e-6
    if kind == "max":
        assert np.allclose(info.location, (0, 0, 1), atol=1e-4)


def test_flux_examples():
    t = np.linspace(0, 2 * np.pi, 2001)
    r = 0.7
    gamma = np.stack([r * np.cos(t), r * np.sin(t)], -1)
    radial = gamma / r
    assert bk.flux_integral(radial, gamma) == pytest.approx(2 * np.pi * r, rel=1e-5)
    assert bk.flux_integral(radial[::-1], gamma[::-1]) == pytest.approx(-2 * np.pi * r, rel=1e-5)
    tangent = np.stack([-np.sin(t), np.cos(t)], -1)
    assert abs(bk.flux_integral(tangent, gamma)) < 1e-12
    assert bk.flux_integral(radial, gamma, mu=2.0) == pytest.approx(4 * np.pi * r, rel=1e-5)
    with pytest.raises(BlockError):
        bk.flux_integral(radial[:-1], gamma)


def test_pants_area_density_against_grid_count():
    # area of {r1 < |z^2 - 1| < r2} by brute-force cell counting
    h = 2e-3
    xs = np.arange(-2, 2, h) + h / 2
    X, Y = np.meshgrid(xs, xs)
    R = np.abs((X + 1j * Y) ** 2 - 1)
    for r1, r2 in [(0.5, 0.8), (1.2, 2.0)]:
        count = np.count_nonzero((R > r1) & (R < r2)) * h * h
        ref, _ = integrate.quad(bk._pants_area_density_r, r1, r2)
        assert count == pytest.approx(ref, rel=5e-3)


@pytest.mark.parametrize("bt", list(BlockType))
def test_full_block_mass_balances_flux(bt):
    m = BlockModel(bt)
    s, eq = m.s_sublevel(m.l_top)
    assert eq and abs(s) <= 1e-6
    assert m.total_mass == pytest.approx(2 * np.pi, abs=1e-9)


def test_cylinder_half_level_is_strict():
    s, eq = BlockModel(BlockType.CYLINDER).s_sublevel(0.5)
    assert not eq and s < 0


@pytest.mark.parametrize("bt", list(BlockType))
def test_dirichlet_collar_is_equality(bt):
    m = BlockModel(bt)
    for a in np.linspace(0.001, m.l_dir * 0.999, 7):
        s, eq = m.s_sublevel(a)
        assert eq and abs(s) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_mass_below_is_monotone(a, b):
    m = BlockModel(BlockType.CYLINDER)
    lo, hi = sorted((a, b))
    assert m.mass_below(lo) <= m.mass_below(hi) + 1e-12


def test_pants_u0_bound_below_half_min_mass():
    m = BlockModel(BlockType.PANTS)
    assert m.u0_bound < 0.5 * m.w_min
    assert m.saddle_level == pytest.approx(8 / 9)


@pytest.mark.parametrize("bt", list(BlockType))
def test_sweep_passes(bt):
    rep = bk.admissibility_sweep(bt, samples=40, seed=3)
    assert rep.ok, rep.violations[:3]
    assert rep.strict_max < 0 and rep.equality_max_abs <= 1e-6
    assert rep.n_strict == rep.n_equal == 40


@pytest.mark.parametrize("bt", list(BlockType))
def test_dense_sublevel_sweep(bt):
    m = BlockModel(bt)
    top = m.l_u0 if bt is BlockType.DISK else m.l_neu
    for a in np.linspace(m.l_dir, top, 401)[1:-1]:
        s, eq = m.s_sublevel(a)
        assert math.isfinite(s) and s < 0 and not eq


def test_sweep_is_deterministic():
    a = bk.admissibility_sweep("Pants", samples=10, seed=1).as_dict()
    b = bk.admissibility_sweep("Pants", samples=10, seed=1).as_dict()
    assert a == b


def test_decompose_one_oval():
    dec = bk.decompose(parse_config("A"))
    assert [b.btype for b in dec.blocks] == [BlockType.DISK, BlockType.DISK]
    assert [dec.signs[b.id] for b in dec.blocks] == [1, -1]
    assert dec.dirichlet_pairs == [(0, 1, "A")]


def test_decompose_nested_pair_is_a_chain():
    dec = bk.decompose(parse_config("A(B)"))
    assert sorted(dec.counts().items()) == [("Cylinder", 2), ("Disk", 2), ("Pants", 0)]
    # chain: Disk - Cyl - Cyl - Disk through D, N, D gluings
    assert len(dec.dirichlet_pairs) == 2 and len(dec.neumann_pairs) == 1
    deg = {b.id: 0 for b in dec.blocks}
    for i, j, _ in dec.dirichlet_pairs + dec.neumann_pairs:
        deg[i] += 1
        deg[j] += 1
    ends = [b.btype for b in dec.blocks if deg[b.id] == 1]
    assert ends == [BlockType.DISK, BlockType.DISK]


@pytest.mark.parametrize("m", range(2, 7))
def test_decompose_siblings(m):
    cfg = parse_config(" ".join(f"X{i}" for i in range(m)))
    dec = bk.decompose(cfg)
    assert len(dec.blocks) == 2 * m
    outer = [b for b in dec.blocks if b.region == "outer"]
    assert sum(b.btype is BlockType.PANTS for b in outer) == m - 2
    assert not dec.check()


@pytest.mark.parametrize("n", range(1, 7))
def test_decompose_all_configs(n):
    for cfg in all_configs(n):
        dec = bk.decompose(cfg)
        assert len(dec.blocks) == 2 * n
        assert not dec.check()
        assert sorted(lab for *_, lab in dec.dirichlet_pairs) == sorted(cfg.labels)


def test_decompose_check_catches_bad_signs():
    dec = bk.decompose(parse_config("A(B)"))
    i, j, _ = dec.dirichlet_pairs[0]
    dec.signs[j] = dec.signs[i]
    assert dec.check()


def test_decompose_json_and_svg():
    cfg = parse_config("A(B C) D E")
    text = bk.decompose(cfg).to_json()
    assert text == bk.decompose(cfg).to_json()
    doc = json.loads(text)
    assert doc["format"] == 1 and len(doc["blocks"]) == 10
    assert sum(doc["counts"].values()) == 10
    assert bk.decompose(cfg).to_svg().startswith("<svg")
    with pytest.raises(BlockError):
        bk.decompose(parse_config(""))
