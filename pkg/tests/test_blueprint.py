import itertools
import random
from fractions import Fraction as Q

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodalforge import blueprint as bpm
from nodalforge.blueprint import (Blueprint, BlueprintError, Edge, FamilyMember, InfeasibleError, Node,
                                  PiecewisePoly, SetFunction, SimpleSubset, blueprint_from_levels, boundary,
                                  bump, d_c, decompose_finite_order, hidden_instance, homology_reduce,
                                  random_blueprint, random_subset, same_shape, single_segment_subsets,
                                  solve_phi)


def brute_force_h_dim(bp, samples_per_edge=3, ends=False):
    """dim V0/d(V1) with V0 on sampled points (no collapsing) and d applied
    to every segment between samples; rank by sympy."""
    sympy = pytest.importorskip("sympy")
    pts, grid = [], {}
    for eid, e in sorted(bp.edges.items()):
        ts = [e.a + (e.b - e.a) * Q(k, samples_per_edge + 1) for k in range(1, samples_per_edge + 1)]
        grid[eid] = ts
        pts += [("e", eid, t) for t in ts]
    pts += [("n", n) for n in sorted(bp.nodes)]
    idx = {p: i for i, p in enumerate(pts)}
    rows = []
    for eid, e in bp.edges.items():
        for lo, hi in itertools.combinations([e.a] + grid[eid] + [e.b], 2):
            free_lo = lo == e.a and not bp.nodes_at_left_end(eid)
            free_hi = hi == e.b and not bp.nodes_at_right_end(eid)
            if not ends and (free_lo or free_hi):
                continue
            row = [0] * len(pts)
            for x, v in boundary(bp, SimpleSubset.build(bp, [(eid, lo, hi)])).items():
                row[idx[x]] += v
            rows.append(row)
    return len(pts) - (sympy.Matrix(rows).rank() if rows else 0)


def two_origins():
    return Blueprint([Edge("L", 0, 1), Edge("R", 1, 2)], [Node("p", 1, "L", "R"), Node("q", 1, "L", "R")])


def y_shape():
    return Blueprint([Edge("A", 0, 1), Edge("B", 1, 2), Edge("C", 1, 2)],
                     [Node("p", 1, "A", "B"), Node("q", 1, "A", "C")])


# -------------------------------------------------------------- structure

def test_rejects_bad_blueprints():
    with pytest.raises(BlueprintError):
        Blueprint([Edge("e", 1, 1)])
    with pytest.raises(BlueprintError):
        Blueprint([Edge("e", 0, 1), Edge("e", 1, 2)])
    with pytest.raises(BlueprintError, match="regular point"):
        Blueprint([Edge("a", 0, 1), Edge("b", 1, 2)], [Node("p", 1, "a", "b")])
    with pytest.raises(BlueprintError):
        Blueprint([Edge("a", 0, 1), Edge("b", 2, 3)], [Node("p", 1, "a", "b")])


def test_equivalence_classes():
    bp = y_shape()
    assert bp.plus_classes() == [["p"], ["q"]]
    assert bp.minus_classes() == [["p", "q"]]
    assert len(bp.components()) == 1


def test_text_roundtrip():
    bp = y_shape()
    assert Blueprint.from_text(bp.to_text()) == bp
    with pytest.raises(BlueprintError):
        Blueprint.from_text("edge e 0")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_text_roundtrip_random(seed):
    bp = random_blueprint(random.Random(seed))
    assert Blueprint.from_text(bp.to_text()) == bp


# ------------------------------------------------------------ boundaries

def test_d_c_examples():
    bp = Blueprint([Edge("e", 0, 1)])
    c = SimpleSubset.build(bp, [("e", Q(1, 5), Q(3, 5))])
    assert d_c(bp, c, ("e", "e", Q(2, 5))) == 0
    assert d_c(bp, c, ("e", "e", Q(1, 5))) == -1      # right germ only
    assert d_c(bp, c, ("e", "e", Q(3, 5))) == 1
    assert d_c(bp, c, ("e", "e", Q(4, 5))) == 0
    with pytest.raises(BlueprintError):
        d_c(bp, c, ("e", "e", Q(0)))


def test_d_c_ignores_node_membership():
    bp = y_shape()
    pieces = [("A", Q(1, 2), 1)]
    for x in [("n", "p"), ("n", "q")]:
        assert d_c(bp, SimpleSubset.build(bp, pieces), x) == d_c(bp, SimpleSubset.build(bp, pieces, ["p", "q"]), x) == 1
    c = SimpleSubset.build(bp, [("A", Q(1, 2), 1), ("B", 1, Q(3, 2))])
    assert boundary(bp, c) == {("e", "A", Q(1, 2)): -1, ("n", "q"): 1, ("e", "B", Q(3, 2)): 1}


def test_merging_overlapping_pieces():
    bp = Blueprint([Edge("e", 0, 4)])
    c = SimpleSubset.build(bp, [("e", 1, 2), ("e", Q(3, 2), 3), ("e", -5, Q(1, 2))])
    assert c.intervals["e"] == ((0, Q(1, 2)), (1, 3))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_boundary_additive_on_disjoint_sets(seed):
    rng = random.Random(seed)
    inst = hidden_instance(rng)
    eid = rng.choice(sorted(inst.grid))
    cuts = inst.grid[eid]
    if len(cuts) < 4:
        return
    a, b, c, d = sorted(rng.sample(cuts, 4))
    c1 = SimpleSubset.build(inst.bp, [(eid, a, b)])
    c2 = SimpleSubset.build(inst.bp, [(eid, c, d)])
    both = SimpleSubset.build(inst.bp, [(eid, a, b), (eid, c, d)])
    tot = dict(boundary(inst.bp, c1))
    for x, v in boundary(inst.bp, c2).items():
        tot[x] = tot.get(x, 0) + v
    assert {x: v for x, v in tot.items() if v} == boundary(inst.bp, both)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_boundary_chains_are_relations(seed):
    rng = random.Random(seed)
    inst = hidden_instance(rng)
    h = homology_reduce(inst.bp, ends=True)
    c = random_subset(inst, rng)
    cls = [Q(0)] * h.dim
    for x, v in boundary(inst.bp, c).items():
        cls = [a + v * b for a, b in zip(cls, h.j(inst.bp, x))]
    assert all(a == 0 for a in cls)


# -------------------------------------------------------------- homology

def test_dim_h_examples():
    assert homology_reduce(Blueprint([Edge("e", 0, 1)])).dim == 1
    for k in (2, 3, 5):
        bp = Blueprint([Edge(f"e{i}", i, i + 1) for i in range(k)])
        assert homology_reduce(bp).dim == k
    assert homology_reduce(two_origins()).dim == brute_force_h_dim(two_origins())


def test_dim_h_two_origins_value():
    # generators L, R, p, q; relations p + q - L and R - p - q
    h = homology_reduce(two_origins())
    assert h.dim == 2
    assert h.j(two_origins(), ("e", "L", Q(1, 2))) == h.j(two_origins(), ("e", "R", Q(3, 2)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_dim_h_matches_brute_force(seed, ends):
    bp = random_blueprint(random.Random(seed), max_nodes=4, max_edges=7)
    assert homology_reduce(bp, ends=ends).dim == brute_force_h_dim(bp, ends=ends)


# ---------------------------------------------------------- piecewise polys

def test_piecewise_poly():
    p = PiecewisePoly.linear([(0, 1), (1, 3), (2, 2)])
    assert p(Q(1, 2)) == 2 and p(2) == 2
    assert p.open_minimum() == (Q(1), False, Q(0))
    with pytest.raises(BlueprintError):
        PiecewisePoly((0, 1, 2), ((0, 1), (5,)))
    with pytest.raises(BlueprintError):
        PiecewisePoly((0, 1), ((0, 0, 0, 0, 1),))
    with pytest.raises(BlueprintError):
        p(3)


def test_open_minimum_of_quadratic_and_cubic():
    quad = PiecewisePoly((0, 2), ((2, -2, 1),))          # (t-1)^2 + 1
    assert quad.open_minimum() == (Q(1), True, Q(1))
    cubic = PiecewisePoly((0, 2), ((1, -2, 0, 1),))       # t^3 - 2t + 1, min at sqrt(2/3)
    val, attained, where = cubic.open_minimum()
    true = 1 - 2 * (2 / 3) ** 0.5 + (2 / 3) ** 1.5
    assert attained and val <= true and float(val) == pytest.approx(true, abs=1e-9)


# ---------------------------------------------------------------- solver

def test_single_edge_between_nodes():
    """Phi(t) = t on the middle edge; free edges on either side."""
    bp = Blueprint([Edge("A1", -1, 0), Edge("A2", -1, 0), Edge("E", 0, 1), Edge("B1", 1, 2), Edge("B2", 1, 2)],
                   [Node("p1", 0, "A1", "E"), Node("p2", 0, "A2", "E"),
                    Node("q1", 1, "E", "B1"), Node("q2", 1, "E", "B2")])
    cum = {"A1": PiecewisePoly.linear([(-1, 0), (0, 1)]), "A2": PiecewisePoly.linear([(-1, 0), (0, 1)]),
           "E": PiecewisePoly.linear([(0, 0), (1, 1)]),
           "B1": PiecewisePoly.linear([(1, 0), (2, Q(-3, 2))]), "B2": PiecewisePoly.linear([(1, 0), (2, Q(-3, 2))])}
    F = SetFunction(cum)
    phi = solve_phi(bp, F)
    consts = {phi(("e", "E", t)) - t for t in (Q(1, 7), Q(1, 2), Q(9, 10))}
    assert consts == {Q(2)}
    for t1, t2 in [(Q(1, 5), Q(4, 5)), (Q(1, 3), Q(1, 2))]:
        c = SimpleSubset.build(bp, [("E", t1, t2)])
        assert F(c) == phi(("e", "E", t2)) - phi(("e", "E", t1)) == phi.pair(bp, c)
    assert phi.nodes["p1"] + phi.nodes["p2"] == 2 and phi.nodes["q1"] + phi.nodes["q2"] == 3


def test_bare_edge_is_inconsistent():
    # the whole open edge has empty boundary but F = 1
    bp = Blueprint([Edge("e", 0, 1)])
    with pytest.raises(InfeasibleError) as exc:
        solve_phi(bp, SetFunction({"e": PiecewisePoly.linear([(0, 0), (1, 1)])}))
    cert = exc.value.certificate
    assert cert["boundary"] == {} and cert["F"] != 0


def test_set_function_must_cover_edges():
    bp = Blueprint([Edge("e", 0, 1)])
    with pytest.raises(BlueprintError):
        solve_phi(bp, SetFunction({"e": PiecewisePoly.linear([(0, 0), (Q(1, 2), 1)])}))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_hidden_roundtrip(seed):
    rng = random.Random(seed)
    inst = hidden_instance(rng)
    phi = solve_phi(inst.bp, inst.F)
    for c in single_segment_subsets(inst) + [random_subset(inst, rng) for _ in range(100)]:
        assert inst.F(c) == phi.pair(inst.bp, c)
    assert all(v > 0 for v in phi.nodes.values())
    assert phi.slack > 0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_negated_instance_has_certificate(seed):
    inst = hidden_instance(random.Random(seed), negate=True)
    with pytest.raises(InfeasibleError) as exc:
        solve_phi(inst.bp, inst.F)
    cert = exc.value.certificate
    # recompute the certificate independently
    total = {}
    for w, c in cert["terms"]:
        for x, v in boundary(inst.bp, c).items():
            total[x] = total.get(x, 0) + w * v
    total = {x: v for x, v in total.items() if v}
    assert total == cert["boundary"] and total
    assert all(v > 0 for v in total.values())
    assert sum(w * inst.F(c) for w, c in cert["terms"]) == cert["F"] <= 0


def test_solver_is_deterministic():
    a = solve_phi(y_shape(), SetFunction({"A": PiecewisePoly.linear([(0, 0), (1, 3)]),
                                          "B": PiecewisePoly.linear([(1, 0), (2, -1)]),
                                          "C": PiecewisePoly.linear([(1, 0), (2, -2)])}))
    # dim H = 0 with free ends included, so phi is unique
    assert a.nodes == {"p": 1, "q": 2}
    assert a(("e", "A", Q(1, 2))) == Q(3, 2)


# ------------------------------------------------------------ level sets

def polar_mesh(radii, fn, nang=96):
    ang = np.linspace(0, 2 * np.pi, nang + 1)[:-1] + 0.013
    vals = [fn(r * np.exp(1j * a)) for r in radii for a in ang]
    tris = []
    for i in range(len(radii) - 1):
        for j in range(nang):
            p = lambda i, j: i * nang + j % nang
            tris += [(p(i, j), p(i + 1, j), p(i + 1, j + 1)), (p(i, j), p(i + 1, j + 1), p(i, j + 1))]
    return vals, tris


def test_levels_cylinder():
    # annulus 1 <= r <= 2 with f = r, i.e. a cylinder with its first coordinate
    v, t = polar_mesh(np.linspace(1, 2, 11), lambda z: abs(z))
    bp = blueprint_from_levels(v, t)
    assert len(bp.edges) == 1 and not bp.nodes


def test_levels_disk_without_pole():
    v, t = polar_mesh(np.linspace(0.1, 1, 10), lambda z: abs(z) ** 2)
    # collars keep the rounding noise on the boundary circles out of the window
    bp = blueprint_from_levels(v, t, window=(0.02, 0.98))
    assert same_shape(bp, Blueprint([Edge("e", 0, 1)]))


def test_levels_pants():
    v, t = polar_mesh(np.linspace(0.2, 1.9, 40), lambda z: -abs(z * z - 1))
    bp = blueprint_from_levels(v, t, window=(-1.95, -0.5))
    assert same_shape(bp, y_shape())
    (low,) = [e for e in bp.edges.values() if len(bp.nodes_at_right_end(e.id)) == 2]
    assert all(n.left == low.id for n in bp.nodes.values())


def test_levels_two_annuli():
    v1, t1 = polar_mesh(np.linspace(1, 2, 6), lambda z: abs(z))
    v2, t2 = polar_mesh(np.linspace(1, 2, 6), lambda z: abs(z) + 0.37)
    off = len(v1)
    bp = blueprint_from_levels(v1 + v2, t1 + [(a + off, b + off, c + off) for a, b, c in t2])
    assert len(bp.edges) == 2 and not bp.nodes and len(bp.components()) == 2


def test_levels_rejects_critical_vertex():
    # saddle of Re z^2 at the centre of a fan
    n = 8
    ang = np.arange(n) * 2 * np.pi / n + 0.1
    vals = [0.0] + [np.cos(2 * a) for a in ang]
    tris = [(0, 1 + i, 1 + (i + 1) % n) for i in range(n)]
    with pytest.raises(BlueprintError, match="critical point"):
        blueprint_from_levels(vals, tris, window=(-0.5, 0.5))


def test_levels_excluded_saddle_region():
    v, t = polar_mesh(np.linspace(0.0001, 1.9, 40), lambda z: -abs(z * z - 1))
    inner = [i for i, tri in enumerate(t) if max(tri) < 96 * 8]
    bp = blueprint_from_levels(v, t, excluded=inner, window=(-1.95, -0.5))
    assert same_shape(bp, y_shape())


# ---------------------------------------------------------- decomposition

def test_decompose_single_bump():
    bp = Blueprint([Edge("e", 0, 1)])
    chi = bump(0, 1)
    dec = decompose_finite_order(bp, {"e": chi}, {}, [FamilyMember((("e", "e"),), 0, 1, chi)])
    ts = np.linspace(0.05, 0.95, 19)
    assert np.allclose([dec.coeffs[0](t) for t in ts], 1.0)


def two_origin_family():
    return [FamilyMember((("e", "L"),), 0, 0.75, bump(0, 0.75)),
            FamilyMember((("e", "R"),), 1.25, 2, bump(1.25, 2)),
            FamilyMember((("e", "L"), ("n", "p"), ("e", "R")), 0.5, 1.5, bump(0.5, 1.5)),
            FamilyMember((("e", "L"), ("n", "q"), ("e", "R")), 0.5, 1.5, bump(0.5, 1.5))]


def test_decompose_k0_matches_node_values():
    bp = two_origins()
    phi_e = {"L": lambda t: 3 + (t - 1), "R": lambda t: 3 + (t - 1) ** 2}
    dec = decompose_finite_order(bp, phi_e, {"p": 1.0, "q": 2.0}, two_origin_family(), k=0)
    assert dec.value(bp, ("n", "p")) == pytest.approx(1.0, abs=1e-12)
    assert dec.value(bp, ("n", "q")) == pytest.approx(2.0, abs=1e-12)
    for eid, ts in (("L", np.linspace(0.02, 0.98, 25)), ("R", np.linspace(1.02, 1.98, 25))):
        assert max(abs(dec.value(bp, ("e", eid, t)) - phi_e[eid](t)) for t in ts) < 1e-12
    for m, h in zip(dec.members, dec.coeffs):
        ts = np.linspace(m.lo, m.hi, 41)[1:-1]
        assert min(float(h(t)) for t in ts) > 0
    with pytest.raises(BlueprintError, match="inconsistent"):
        decompose_finite_order(bp, phi_e, {"p": 1.0, "q": 2.0}, two_origin_family(), k=1)


def test_decompose_matching_jets():
    bp = two_origins()
    P = lambda t: 3 + (t - 1) + (t - 1) ** 2
    dec = decompose_finite_order(bp, {"L": P, "R": P}, {"p": 1.0, "q": 2.0}, two_origin_family(), k=3)
    assert np.allclose(dec.jets["p"] + dec.jets["q"], [3, 1, 1, 0], atol=1e-6)
    for d in (0.1, 0.01, 0.001):
        assert abs(dec.value(bp, ("e", "L", 1 - d)) - P(1 - d)) < 1e-12
        assert abs(dec.value(bp, ("e", "R", 1 + d)) - P(1 + d)) < 1e-12


def test_decompose_split_bumps_agree_with_merged():
    bp = Blueprint([Edge("e", 0, 1)])
    chi = bump(0, 1)
    step = lambda t: bpm._smoothstep((np.asarray(t) - 0.4) / 0.2)
    c1 = lambda t: chi(t) * (1 - step(t))
    c2 = lambda t: chi(t) * step(t)
    phi = {"e": lambda t: 1 + t * t}
    split = decompose_finite_order(bp, phi, {}, [FamilyMember((("e", "e"),), 0, 0.6, c1),
                                                 FamilyMember((("e", "e"),), 0.4, 1, c2)])
    merged = decompose_finite_order(bp, phi, {}, [FamilyMember((("e", "e"),), 0, 1, chi)])
    ts = np.linspace(0.01, 0.99, 50)
    a = [split.value(bp, ("e", "e", t)) for t in ts]
    b = [merged.value(bp, ("e", "e", t)) for t in ts]
    assert np.allclose(a, b, rtol=1e-12) and np.allclose(a, 1 + ts ** 2, rtol=1e-12)
    for t in (0.45, 0.5, 0.55):
        assert split.coeffs[0](t) == pytest.approx(merged.coeffs[0](t)) == pytest.approx(split.coeffs[1](t))


def test_decompose_cover_violations():
    bp = Blueprint([Edge("e", 0, 1)])
    with pytest.raises(BlueprintError, match="not covered"):
        decompose_finite_order(bp, {"e": lambda t: 1.0}, {}, [FamilyMember((("e", "e"),), 0, 0.5, bump(0, 0.5))])
    with pytest.raises(BlueprintError, match="not covered"):
        decompose_finite_order(two_origins(), {"L": lambda t: 3.0, "R": lambda t: 3.0}, {"p": 1.0, "q": 2.0},
                               two_origin_family()[:3], k=0)
    with pytest.raises(BlueprintError, match="embedded interval"):
        decompose_finite_order(two_origins(), {"L": lambda t: 3.0, "R": lambda t: 3.0}, {"p": 1.0, "q": 2.0},
                               [FamilyMember((("n", "p"), ("e", "R")), 0.5, 1.5, bump(0.5, 1.5))], k=0)
