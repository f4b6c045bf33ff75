import random

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from nodalforge.harmonics import HarmonicIndex, globe_graph, resolve_poles
from nodalforge.ovals import all_nestings, is_equivalent, nicely_contains, parse_config
from nodalforge.planar import (Drawing, EmbeddedGraph, PlanarError, all_pairings, chessboard_alignment,
                               chessboard_redraw, choose_pairings_containing, curves_matching, drawing_svg,
                               drawing_to_config, embed_grid_in_globe, format_drawing, grid_graph,
                               naive_drawing, octahedron, parse_drawing, perturb, reduce)

FIVE = "A(B C) D E"


def euler(g):
    return len(g.vertices) - g.num_edges + len(g.faces)


@pytest.mark.parametrize("n,v,e,cells", [(1, 4, 4, 1), (2, 9, 12, 4), (5, 36, 60, 25)])
def test_grid_counts(n, v, e, cells):
    g = grid_graph(n)
    assert len(g.vertices) == v and g.num_edges == e
    assert len(g.faces) == cells + 1
    assert euler(g) == 2


@pytest.mark.parametrize("nm", [(2, 1), (4, 2), (6, 3), (11, 4)])
def test_resolved_globe_is_connected_planar_4_regular(nm):
    g = resolve_poles(globe_graph(HarmonicIndex(*nm)))
    assert all(len(hs) == 4 for hs in g.rot.values())
    assert euler(g) == 2


def test_drawing_to_config_examples():
    assert len(drawing_to_config(Drawing(grid_graph(1), frozenset()))) == 0
    assert len(drawing_to_config(Drawing(grid_graph(1), frozenset(range(4))))) == 1
    d = naive_drawing(parse_config(FIVE))
    assert max(v[0] for v in d.graph.rot) == 5
    assert is_equivalent(drawing_to_config(d), parse_config(FIVE))


@pytest.mark.parametrize("n", range(1, 5))
def test_naive_drawing_roundtrips_every_nesting(n):
    for cfg in all_nestings(n):
        d = naive_drawing(cfg)
        assert is_equivalent(drawing_to_config(d), cfg)
        assert parse_drawing(format_drawing(d)).edge_ids == d.edge_ids


def test_figure_eight_vertex():
    g = EmbeddedGraph([("v", "v"), ("v", "v")], {"v": [0, 1, 2, 3]})
    counts = sorted(len(perturb(g, {"v": p})[0]) for p in (0, 1))
    assert counts == [1, 2]


def test_y21_pairings():
    gp = resolve_poles(globe_graph(HarmonicIndex(2, 1)))
    sizes = sorted(len(perturb(gp, p)[0]) for p in all_pairings(gp))
    assert sizes == [1, 1, 2, 2]


def strand_count_oracle(g, pairing):
    """Number of smoothed curves via an explicit corner graph in networkx."""
    h = nx.Graph()
    for e in range(g.num_edges):
        h.add_edge(("h", 2 * e), ("h", 2 * e + 1))
    for v, hs in g.rot.items():
        pairs = [(0, 1), (2, 3)] if pairing.get(v, 0) == 0 else [(1, 2), (3, 0)]
        for i, j in pairs:
            h.add_edge(("h", hs[i]), ("h", hs[j]))
    return nx.number_connected_components(h)


def test_octahedron_strand_counts_match_oracle():
    g = octahedron()
    for p in all_pairings(g):
        cfg, cycles = perturb(g, p)
        assert len(cfg) == len(cycles) == strand_count_oracle(g, p)
        assert sorted(e for c in cycles for e in c) == list(range(g.num_edges))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_globe_strand_counts_match_oracle(seed):
    g = resolve_poles(globe_graph(HarmonicIndex(6, 3)))
    rng = random.Random(seed)
    p = {v: rng.randint(0, 1) for v in g.vertices}
    assert len(perturb(g, p)[0]) == strand_count_oracle(g, p)


def test_reduce_keep_everything_is_identity():
    g = octahedron()
    for p in list(all_pairings(g))[:16]:
        x, cycles = perturb(g, p)
        labels = [f"c{i}" for i in range(len(cycles))]
        assert reduce(g, p, labels) == p


def test_reduce_rejects_bad_subsets():
    g = resolve_poles(globe_graph(HarmonicIndex(4, 2)))
    bad = [(p, {a, b}) for p in all_pairings(g)
           for a in perturb(g, p)[0].labels for b in perturb(g, p)[0].labels
           if not nicely_contains(perturb(g, p)[0], {a, b})]
    assert bad
    p, y = bad[0]
    with pytest.raises(PlanarError):
        reduce(g, p, y)
    with pytest.raises(PlanarError):
        reduce(g, p, [])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_reduce_singleton_gives_one_oval(seed):
    g = resolve_poles(globe_graph(HarmonicIndex(4, 2)))
    rng = random.Random(seed)
    p = {v: rng.randint(0, 1) for v in g.vertices}
    x, cycles = perturb(g, p)
    y = [rng.choice([f"c{i}" for i in range(len(cycles))])]
    x2, _ = perturb(g, reduce(g, p, y))
    assert len(x2) == 1


def test_chessboard_examples():
    one = parse_config("A")
    d = chessboard_redraw(one, naive_drawing(one), 4)
    assert max(v[0] for v in d.graph.rot) == 6
    good, total = chessboard_alignment(d)
    assert good == total > 0
    pair = parse_config("A(B)")
    src = naive_drawing(pair)
    assert max(v[0] for v in src.graph.rot) == 3
    d = chessboard_redraw(pair, src, 4)
    assert is_equivalent(drawing_to_config(d), pair)
    assert chessboard_alignment(d)[0] == chessboard_alignment(d)[1]
    empty = chessboard_redraw(parse_config(""), Drawing(grid_graph(1), frozenset()), 4)
    assert not empty.edge_ids
    with pytest.raises(PlanarError):
        chessboard_redraw(one, naive_drawing(one), 3)


def test_chessboard_larger_M():
    cfg = parse_config(FIVE)
    for M in (5, 6):
        d = chessboard_redraw(cfg, naive_drawing(cfg), M)
        assert is_equivalent(drawing_to_config(d), cfg)
        good, total = chessboard_alignment(d)
        assert good == total


def test_embed_examples():
    gl = globe_graph(HarmonicIndex(4, 2))
    gp = resolve_poles(gl)
    emb = embed_grid_in_globe(1, gp, gl.rows, gl.cols)
    assert sorted(emb.vertex_map.values()) == [(0, 1), (0, 2), (1, 1), (1, 2)]
    gl8 = globe_graph(HarmonicIndex(8, 4))
    emb = embed_grid_in_globe(2, resolve_poles(gl8), gl8.rows, gl8.cols)
    assert len(emb.vertex_map) == 9 and len(emb.edge_map) == 12
    with pytest.raises(PlanarError):
        embed_grid_in_globe(3, gp, gl.rows, gl.cols)


def test_choose_pairings_examples():
    gl = globe_graph(HarmonicIndex(4, 2))
    gp = resolve_poles(gl)
    assert set(choose_pairings_containing(gp, []).values()) == {0}
    emb = embed_grid_in_globe(1, gp, gl.rows, gl.cols)
    img = [emb.edge_map[e] for e in range(4)]
    p = choose_pairings_containing(gp, img)
    x, cycles = perturb(gp, p)
    y = curves_matching(cycles, [img])
    assert len(y) == 1 and nicely_contains(x, y)


def test_five_oval_config_through_globe_is_nicely_contained():
    cfg = parse_config(FIVE)
    d = chessboard_redraw(cfg, naive_drawing(cfg), 4)
    k = 4 * 5 + 2
    m = (k + 3) // 2
    gl = globe_graph(HarmonicIndex(m + k + 1, m))
    gp = resolve_poles(gl)
    emb = embed_grid_in_globe(k, gp, gl.rows, gl.cols)
    img = [emb.edge_map[e] for e in d.edge_ids]
    x, cycles = perturb(gp, choose_pairings_containing(gp, img))
    y = curves_matching(cycles, Drawing(gp, frozenset(img)).cycles())
    assert len(y) == 5 and nicely_contains(x, y)
    assert is_equivalent(x.without(set(x.labels) - set(y)), cfg)


def test_svg_is_deterministic():
    d = naive_drawing(parse_config(FIVE))
    assert drawing_svg(d) == drawing_svg(naive_drawing(parse_config(FIVE)))
    assert drawing_svg(d).startswith("<svg")
