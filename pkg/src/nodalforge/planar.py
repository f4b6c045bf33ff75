"""Planar combinatorial maps and the grid/perturbation algorithms.

Half-edge convention: edge i owns half-edges 2i (tail -> head) and 2i+1
(head -> tail).  ``rot[v]`` lists the half-edges leaving v in
counterclockwise order seen from outside the sphere.  The left face of a
half-edge h continues with the half-edge preceding twin(h) in the rotation
at its head, so the corner between rot[v][i] and rot[v][i+1] belongs to the
left face of rot[v][i].
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .ovals import (
    BLACK,
    WHITE,
    OvalConfig,
    canonical_two_coloring,
    config_from_region_tree,
    nicely_contains,
)


class PlanarError(ValueError):
    pass


class _DSU:
    def __init__(self, n: int):
        self.p = list(range(n))

    def find(self, a: int) -> int:
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a: int, b: int) -> None:
        a, b = self.find(a), self.find(b)
        if a != b:
            self.p[max(a, b)] = min(a, b)


@dataclass
class EmbeddedGraph:
    edges: list[tuple[Hashable, Hashable]]
    rot: dict[Hashable, list[int]]
    pos: dict = field(default_factory=dict)
    outer_he: int | None = None  # a half-edge whose left face is "outside"

    def __post_init__(self):
        seen = sorted(h for hs in self.rot.values() for h in hs)
        if seen != list(range(2 * len(self.edges))):
            raise PlanarError("rotation system must list every half-edge exactly once")
        for v, hs in self.rot.items():
            for h in hs:
                if self.origin(h) != v:
                    raise PlanarError(f"half-edge {h} listed at wrong vertex {v!r}")
        self._slot = {h: (v, i) for v, hs in self.rot.items() for i, h in enumerate(hs)}
        self._faces: list[list[int]] | None = None
        self._face_of: list[int] | None = None

    # -- basic structure
    @property
    def vertices(self) -> list:
        return list(self.rot)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @staticmethod
    def twin(h: int) -> int:
        return h ^ 1

    def origin(self, h: int):
        e = self.edges[h >> 1]
        return e[h & 1]

    def head(self, h: int):
        return self.origin(h ^ 1)

    def degree(self, v) -> int:
        return len(self.rot[v])

    def rot_next(self, h: int) -> int:
        v, i = self._slot[h]
        hs = self.rot[v]
        return hs[(i + 1) % len(hs)]

    def rot_prev(self, h: int) -> int:
        v, i = self._slot[h]
        hs = self.rot[v]
        return hs[(i - 1) % len(hs)]

    def face_next(self, h: int) -> int:
        return self.rot_prev(h ^ 1)

    def _trace_faces(self):
        face_of = [-1] * (2 * len(self.edges))
        faces = []
        for h0 in range(2 * len(self.edges)):
            if face_of[h0] >= 0:
                continue
            cyc, h = [], h0
            while face_of[h] < 0:
                face_of[h] = len(faces)
                cyc.append(h)
                h = self.face_next(h)
            faces.append(cyc)
        self._faces, self._face_of = faces, face_of

    @property
    def faces(self) -> list[list[int]]:
        if self._faces is None:
            self._trace_faces()
        return self._faces

    def left_face(self, h: int) -> int:
        if self._face_of is None:
            self._trace_faces()
        return self._face_of[h]

    def is_connected(self) -> bool:
        vs = self.vertices
        if not vs:
            return True
        seen = {vs[0]}
        stack = [vs[0]]
        while stack:
            v = stack.pop()
            for h in self.rot[v]:
                w = self.head(h)
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(vs)

    def euler_characteristic(self) -> int:
        return len(self.rot) - len(self.edges) + len(self.faces)

    def outer_face(self) -> int:
        return self.left_face(self.outer_he if self.outer_he is not None else 0)

    def edge_lookup(self) -> dict:
        """(u, v) -> edge id for simple edges, both orientations."""
        if getattr(self, "_lookup", None) is not None:
            return self._lookup
        out = {}
        for i, (a, b) in enumerate(self.edges):
            out.setdefault((a, b), i)
            out.setdefault((b, a), i)
        self._lookup = out
        return out


def graph_from_positions(points: dict, edges: Sequence[tuple]) -> EmbeddedGraph:
    """Embedded graph with rotations taken from 3D positions on the unit sphere
    (counterclockwise around the outward normal).  Straight-line edges only."""
    rot: dict = {v: [] for v in points}
    for i, (a, b) in enumerate(edges):
        rot[a].append(2 * i)
        rot[b].append(2 * i + 1)
    for v, hs in rot.items():
        p = np.asarray(points[v], float)
        p = p / np.linalg.norm(p)
        ref = np.array([0.0, 0.0, 1.0]) if abs(p[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        e1 = ref - p * (ref @ p)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(p, e1)

        def ang(h, p=p, e1=e1, e2=e2, v=v):
            a, b = edges[h >> 1]
            w = b if (h & 1) == 0 else a
            d = np.asarray(points[w], float) - p
            return math.atan2(d @ e2, d @ e1)

        hs.sort(key=ang)
    return EmbeddedGraph(list(edges), rot, pos=dict(points))


def octahedron() -> EmbeddedGraph:
    pts = {
        "+x": (1, 0, 0), "-x": (-1, 0, 0), "+y": (0, 1, 0),
        "-y": (0, -1, 0), "+z": (0, 0, 1), "-z": (0, 0, -1),
    }
    names = list(pts)
    edges = [
        (a, b) for i, a in enumerate(names) for b in names[i + 1:]
        if np.dot(pts[a], pts[b]) == 0
    ]
    return graph_from_positions(pts, edges)


# ---------------------------------------------------------------- grid graphs

def grid_graph(n: int) -> EmbeddedGraph:
    """n x n cells, vertices (x, y) with 0 <= x, y <= n."""
    if n < 1:
        raise PlanarError("grid size must be at least 1")
    edges = []
    for y in range(n + 1):
        for x in range(n):
            edges.append(((x, y), (x + 1, y)))
    for x in range(n + 1):
        for y in range(n):
            edges.append(((x, y), (x, y + 1)))
    rot: dict = {(x, y): [] for y in range(n + 1) for x in range(n + 1)}
    direction: dict = {}
    for i, (a, b) in enumerate(edges):
        rot[a].append(2 * i)
        rot[b].append(2 * i + 1)
        dx, dy = b[0] - a[0], b[1] - a[1]
        direction[2 * i] = math.atan2(dy, dx)
        direction[2 * i + 1] = math.atan2(-dy, -dx)
    for hs in rot.values():
        hs.sort(key=lambda h: direction[h] % (2 * math.pi))
    pos = {v: v for v in rot}
    # bottom boundary edge traversed westward has the outside on its left
    return EmbeddedGraph(edges, rot, pos=pos, outer_he=1)


def grid_cell_face(g: EmbeddedGraph, x: int, y: int) -> int:
    """Face id of the cell with lower-left corner (x, y)."""
    e = g.edge_lookup()[((x, y), (x + 1, y))]
    h = 2 * e if g.edges[e][0] == (x, y) else 2 * e + 1
    return g.left_face(h)


# ------------------------------------------------------------------- drawings

@dataclass
class Drawing:
    graph: EmbeddedGraph
    edge_ids: frozenset

    def __post_init__(self):
        self.edge_ids = frozenset(self.edge_ids)
        deg: dict = {}
        for e in self.edge_ids:
            for v in self.graph.edges[e]:
                deg[v] = deg.get(v, 0) + 1
        bad = [v for v, d in deg.items() if d != 2]
        if bad:
            raise PlanarError(f"drawing is not 2-regular at {bad[:3]}")

    def cycles(self) -> list[list[int]]:
        """Edge cycles, each starting from its smallest edge id."""
        g = self.graph
        inc: dict = {}
        for e in self.edge_ids:
            for v in g.edges[e]:
                inc.setdefault(v, []).append(e)
        left = set(self.edge_ids)
        out = []
        for e0 in sorted(self.edge_ids):
            if e0 not in left:
                continue
            cyc = [e0]
            left.discard(e0)
            v = g.edges[e0][1]
            e = e0
            while True:
                a, b = inc[v]
                e = b if a == e else a
                if e == e0:
                    break
                cyc.append(e)
                left.discard(e)
                v = g.edges[e][1] if g.edges[e][0] == v else g.edges[e][0]
            out.append(cyc)
        return out

    def vertices(self) -> set:
        return {v for e in self.edge_ids for v in self.graph.edges[e]}


def _curves_config(g: EmbeddedGraph, cycles: list[list[int]], dsu: _DSU):
    labels = [f"c{i}" for i in range(len(cycles))]
    curves = {}
    for lab, cyc in zip(labels, cycles):
        e = cyc[0]
        curves[lab] = (dsu.find(g.left_face(2 * e)), dsu.find(g.left_face(2 * e + 1)))
    root = dsu.find(g.outer_face())
    if not cycles:
        return OvalConfig(), labels
    return config_from_region_tree(curves, root), labels


def drawing_regions(d: Drawing) -> _DSU:
    g = d.graph
    dsu = _DSU(len(g.faces))
    for i in range(g.num_edges):
        if i not in d.edge_ids:
            dsu.union(g.left_face(2 * i), g.left_face(2 * i + 1))
    return dsu


def drawing_to_config(d: Drawing) -> OvalConfig:
    cfg, _ = _curves_config(d.graph, d.cycles(), drawing_regions(d))
    return cfg


def grid_drawing_from_edges(n: int, segs: Iterable[tuple]) -> Drawing:
    g = grid_graph(n)
    look = g.edge_lookup()
    ids = []
    for a, b in segs:
        a, b = tuple(a), tuple(b)
        if (a, b) not in look:
            raise PlanarError(f"{a}-{b} is not an edge of the {n}x{n} grid")
        ids.append(look[(a, b)])
    return Drawing(g, frozenset(ids))


_SEG = re.compile(r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)\s*-\s*\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)")


def parse_drawing(text: str) -> Drawing:
    n = None
    segs = []
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("#") or s.startswith("format:"):
            continue
        if s.startswith("grid"):
            n = int(s.split()[1])
            continue
        for m in _SEG.finditer(s):
            x1, y1, x2, y2 = map(int, m.groups())
            segs.append(((x1, y1), (x2, y2)))
    if n is None:
        raise PlanarError("drawing file lacks a 'grid N' line")
    return grid_drawing_from_edges(n, segs)


def format_drawing(d: Drawing) -> str:
    n = max(v[0] for v in d.graph.rot)
    lines = ["format: 1", f"grid {n}"]
    for e in sorted(d.edge_ids, key=lambda e: sorted(d.graph.edges[e])):
        a, b = sorted(d.graph.edges[e])
        lines.append(f"({a[0]},{a[1]})-({b[0]},{b[1]})")
    return "\n".join(lines) + "\n"


def _pack(boxes: list[tuple[int, int]]) -> tuple[list[tuple[int, int]], int, int]:
    """Shelf-pack boxes (w, h) with one free lattice line between neighbours.
    Returns offsets and the bounding size; the most square layout wins."""
    best = None
    widths = sorted({w for w, _ in boxes} | {sum(w for w, _ in boxes) + len(boxes) - 1})
    cand = range(max(w for w, _ in boxes), widths[-1] + 1)
    for W in cand:
        offs, x, y, row_h, used_w = [], 0, 0, 0, 0
        for w, h in boxes:
            if x > 0 and x + w > W:
                y += row_h + 1
                x, row_h = 0, 0
            offs.append((x, y))
            x += w + 1
            row_h = max(row_h, h)
            used_w = max(used_w, x - 1)
        total_h = y + row_h
        key = (max(used_w, total_h), used_w + total_h)
        if best is None or key < best[0]:
            best = (key, offs, used_w, total_h)
    return best[1], best[2], best[3]


def naive_drawing(cfg: OvalConfig) -> Drawing:
    """Draw every oval as a rectangle around its packed children."""
    if len(cfg) == 0:
        raise PlanarError("nothing to draw")

    def layout(oval) -> tuple[int, int, list]:
        if not oval.children:
            return 1, 1, [(0, 0, 1, 1)]
        parts = [landscape(layout(c)) for c in oval.children]
        offs, w, h = _pack([(p[0], p[1]) for p in parts])
        rects = [(0, 0, w + 2, h + 2)]
        for (ox, oy), p in zip(offs, parts):
            rects += [(x + ox + 1, y + oy + 1, rw, rh) for x, y, rw, rh in p[2]]
        return w + 2, h + 2, rects

    def landscape(p):
        w, h, rects = p
        if w >= h:
            return p
        return h, w, [(y, x, rh, rw) for x, y, rw, rh in rects]

    parts = [landscape(layout(r)) for r in cfg.roots]
    offs, w, h = _pack([(p[0], p[1]) for p in parts])
    n = max(w, h)
    segs = []
    for (ox, oy), p in zip(offs, parts):
        for x, y, rw, rh in p[2]:
            x, y = x + ox, y + oy
            segs += [((x + i, y), (x + i + 1, y)) for i in range(rw)]
            segs += [((x + i, y + rh), (x + i + 1, y + rh)) for i in range(rw)]
            segs += [((x, y + j), (x, y + j + 1)) for j in range(rh)]
            segs += [((x + rw, y + j), (x + rw, y + j + 1)) for j in range(rh)]
    return grid_drawing_from_edges(n, segs)


# -------------------------------------------------------------- perturbations

def _pairing_partner(g: EmbeddedGraph, pairing: dict, h: int) -> int:
    v, i = g._slot[h]
    hs = g.rot[v]
    if len(hs) != 4:
        raise PlanarError(f"vertex {v!r} has degree {len(hs)}, expected 4")
    p = pairing.get(v, 0)
    if p == 0:  # (e1 e2)(e3 e4)
        j = i ^ 1
    else:  # (e1 e4)(e2 e3)
        j = {0: 3, 3: 0, 1: 2, 2: 1}[i]
    return hs[j]


def strands(g: EmbeddedGraph, pairing: dict) -> list[list[int]]:
    """Closed curves as edge lists obtained by smoothing every vertex."""
    for v, hs in g.rot.items():
        if len(hs) != 4:
            raise PlanarError(f"vertex {v!r} has degree {len(hs)}, expected 4")
    used = [False] * g.num_edges
    out = []
    for e0 in range(g.num_edges):
        if used[e0]:
            continue
        cyc, h = [], 2 * e0
        while True:
            e = h >> 1
            if used[e]:
                break
            used[e] = True
            cyc.append(e)
            h = _pairing_partner(g, pairing, h ^ 1)
        out.append(cyc)
    return out


def _perturb_regions(g: EmbeddedGraph, pairing: dict) -> _DSU:
    dsu = _DSU(len(g.faces))
    for v, hs in g.rot.items():
        if pairing.get(v, 0) == 0:
            dsu.union(g.left_face(hs[1]), g.left_face(hs[3]))
        else:
            dsu.union(g.left_face(hs[0]), g.left_face(hs[2]))
    return dsu


def perturb(g: EmbeddedGraph, pairing: dict) -> tuple[OvalConfig, list[list[int]]]:
    cycles = strands(g, pairing)
    cfg, _ = _curves_config(g, cycles, _perturb_regions(g, pairing))
    return cfg, cycles


def all_pairings(g: EmbeddedGraph):
    vs = g.vertices
    for bits in range(1 << len(vs)):
        yield {v: (bits >> i) & 1 for i, v in enumerate(vs)}


def reduce(g: EmbeddedGraph, pairing: dict, y_labels: Iterable[str]) -> dict:
    """Flip vertex pairings until only the ovals in ``y_labels`` survive
    (up to equivalence).  Labels refer to ``perturb(g, pairing)``."""
    x_cfg, cycles = perturb(g, pairing)
    y_labels = set(y_labels)
    if not y_labels:
        raise PlanarError("the target must keep at least one oval")
    if not nicely_contains(x_cfg, y_labels):
        raise PlanarError(
            "subset is not nicely contained: its ovals take both colors in "
            f"{canonical_two_coloring(x_cfg.without(y_labels))}"
        )
    pairing = dict(pairing)
    y_edges = {e for i, c in enumerate(cycles) if f"c{i}" in y_labels for e in c}

    while True:
        cycles = strands(g, pairing)
        curve_of = {e: i for i, c in enumerate(cycles) for e in c}
        in_y = [cycles[i][0] in y_edges for i in range(len(cycles))]
        if all(in_y):
            return pairing
        dsu = _perturb_regions(g, pairing)
        region_curves: dict = {}
        for i, c in enumerate(cycles):
            for side in (2 * c[0], 2 * c[0] + 1):
                region_curves.setdefault(dsu.find(g.left_face(side)), set()).add(i)
        order = _bfs_regions(region_curves, dsu.find(g.outer_face()))
        faces_by_region: dict = {}
        for f in range(len(g.faces)):
            faces_by_region.setdefault(dsu.find(f), []).append(f)

        def corner_flip(pred) -> bool:
            for r in order:
                for f in faces_by_region.get(r, ()):
                    for h in g.faces[f]:
                        h2 = g.face_next(h)
                        c1, c2 = curve_of[h >> 1], curve_of[h2 >> 1]
                        if c1 != c2 and pred(r, c1, c2):
                            v = g.origin(h2)
                            pairing[v] = 1 - pairing.get(v, 0)
                            return True
            return False

        def case1(r, c1, c2):
            bd = region_curves[r]
            return len(bd) >= 2 and not any(in_y[c] for c in bd)

        if corner_flip(case1):
            continue

        def case2(r, c1, c2):
            return in_y[c1] != in_y[c2]

        flipped_pair: list = []

        def case2_rec(r, c1, c2):
            if case2(r, c1, c2):
                flipped_pair.append((c1, c2))
                return True
            return False

        if corner_flip(case2_rec):
            c1, c2 = flipped_pair[0]
            absorbed = c2 if in_y[c1] else c1
            y_edges |= set(cycles[absorbed])
            continue
        raise PlanarError("reduction stalled: no applicable case")


def _bfs_regions(region_curves: dict, root) -> list:
    adj: dict = {}
    for r, cs in region_curves.items():
        for c in cs:
            adj.setdefault(c, set()).add(r)
    order, seen, queue = [], {root}, deque([root])
    while queue:
        r = queue.popleft()
        order.append(r)
        for c in sorted(region_curves.get(r, ())):
            for r2 in sorted(adj[c]):
                if r2 not in seen:
                    seen.add(r2)
                    queue.append(r2)
    return order


# ------------------------------------------------------------ chessboard step

def _region_colors(d: Drawing) -> tuple[_DSU, dict]:
    """Canonical coloring of the drawing's regions, outer region white."""
    g = d.graph
    dsu = drawing_regions(d)
    sides = [(dsu.find(g.left_face(2 * c[0])), dsu.find(g.left_face(2 * c[0] + 1)))
             for c in d.cycles()]
    resolved = {dsu.find(g.outer_face()): WHITE}
    changed = True
    while changed:
        changed = False
        for a, b in sides:
            for r1, r2 in ((a, b), (b, a)):
                if r1 in resolved and r2 not in resolved:
                    resolved[r2] = BLACK if resolved[r1] == WHITE else WHITE
                    changed = True
    return dsu, resolved


def chessboard_redraw(cfg: OvalConfig, src: Drawing, M: int = 4) -> Drawing:
    if M < 4:
        raise PlanarError("M must be at least 4")
    n = max(v[0] for v in src.graph.rot)
    K = M * n + 2
    big = grid_graph(K)
    if len(src.edge_ids) == 0:
        return Drawing(big, frozenset())
    g = src.graph
    dsu, resolved = _region_colors(src)
    black = np.zeros((K, K), bool)  # indexed [x, y]
    for cx in range(n):
        for cy in range(n):
            if resolved[dsu.find(grid_cell_face(g, cx, cy))] == BLACK:
                black[1 + M * cx: 1 + M * (cx + 1), 1 + M * cy: 1 + M * (cy + 1)] = True
    B0 = black
    xs, ys = np.meshgrid(np.arange(K), np.arange(K), indexing="ij")
    chess_black = (xs + ys) % 2 == 0
    nb = np.zeros_like(B0)
    nb[1:, :] |= B0[:-1, :]
    nb[:-1, :] |= B0[1:, :]
    nb[:, 1:] |= B0[:, :-1]
    nb[:, :-1] |= B0[:, 1:]
    B1 = chess_black & nb
    B01 = B0 | B1
    # cells on the rim touch the unbounded face, which is never in B
    ok = np.zeros_like(B0)
    ok[1:-1, 1:-1] = True
    ok[1:, :] &= B01[:-1, :]
    ok[:-1, :] &= B01[1:, :]
    ok[:, 1:] &= B01[:, :-1]
    ok[:, :-1] &= B01[:, 1:]
    B2 = ~chess_black & ok
    B = B0 | B1 | B2
    segs = []
    for x in range(K + 1):
        for y in range(K):
            left = B[x - 1, y] if x > 0 else False
            right = B[x, y] if x < K else False
            if left != right:
                segs.append(((x, y), (x, y + 1)))
    for y in range(K + 1):
        for x in range(K):
            below = B[x, y - 1] if y > 0 else False
            above = B[x, y] if y < K else False
            if below != above:
                segs.append(((x, y), (x + 1, y)))
    return grid_drawing_from_edges(K, segs)


def chessboard_alignment(d: Drawing) -> tuple[int, int]:
    """(aligned edges, total edges): an edge is aligned when its black side
    under the drawing's canonical coloring is the chessboard-black cell."""
    g = d.graph
    dsu, resolved = _region_colors(d)
    outer = g.outer_face()
    good = 0
    for e in d.edge_ids:
        (x1, y1), (x2, y2) = sorted(g.edges[e])
        if y1 == y2:
            cells = [(x1, y1), (x1, y1 - 1)]
        else:
            cells = [(x1, y1), (x1 - 1, y1)]
        n = max(v[0] for v in g.rot)
        black_cell = None
        for cx, cy in cells:
            if 0 <= cx < n and 0 <= cy < n:
                f = grid_cell_face(g, cx, cy)
                if resolved[dsu.find(f)] == BLACK:
                    black_cell = (cx, cy)
            elif resolved[dsu.find(outer)] == BLACK:
                black_cell = (cx, cy)
        if black_cell is not None and 0 <= black_cell[0] < n and 0 <= black_cell[1] < n \
                and (black_cell[0] + black_cell[1]) % 2 == 0:
            good += 1
    return good, len(d.edge_ids)


# ------------------------------------------------------- globe-graph embedding

@dataclass
class GridEmbedding:
    vertex_map: dict
    edge_map: dict
    row0: int
    col0: int


def embed_grid_in_globe(k: int, gprime: EmbeddedGraph, rows: int, cols: int) -> GridEmbedding:
    """Place the k x k grid as a window of latitude rows x meridian columns.

    ``gprime`` is a pole-resolved globe graph whose crossings are keyed
    (row, col), rows counted from the north.  The window's simple adjacency
    must coincide with the grid's.
    """
    need_rows, need_cols = k + 1, k + 2
    if rows < need_rows or cols < need_cols:
        m = max((need_cols + 1) // 2, 1)
        raise PlanarError(
            f"globe too small for a {k}x{k} grid: need at least {need_rows} latitude "
            f"circles and {need_cols} meridian arcs, e.g. degree {m + need_rows}, order {m}"
        )
    row0 = (rows - need_rows) // 2
    col0 = 1
    vmap = {(x, y): (row0 + (k - y), col0 + x) for x in range(k + 1) for y in range(k + 1)}
    look = gprime.edge_lookup()
    grid = grid_graph(k)
    emap = {}
    for i, (a, b) in enumerate(grid.edges):
        key = (vmap[a], vmap[b])
        if key not in look:
            raise PlanarError(f"grid edge {a}-{b} has no image")
        emap[i] = look[key]
    inv = set(vmap.values())
    simple = {frozenset(gprime.edges[e]) for e in range(gprime.num_edges)
              if gprime.edges[e][0] in inv and gprime.edges[e][1] in inv}
    expect = {frozenset((vmap[a], vmap[b])) for a, b in grid.edges}
    if simple != expect:
        raise PlanarError("window is not an induced copy of the grid")
    return GridEmbedding(vmap, emap, row0, col0)


def choose_pairings_containing(gprime: EmbeddedGraph, edge_ids: Iterable[int]) -> dict:
    d = Drawing(gprime, frozenset(edge_ids))
    pairing = {v: 0 for v in gprime.vertices}
    for v in d.vertices():
        hs = gprime.rot[v]
        slots = [i for i, h in enumerate(hs) if (h >> 1) in d.edge_ids]
        i, j = slots
        if (i, j) in ((0, 1), (2, 3)):
            pairing[v] = 0
        elif (i, j) in ((1, 2), (0, 3)):
            pairing[v] = 1
        else:
            raise PlanarError(f"drawing goes straight through {v!r}; no pairing keeps it")
    return pairing


def curves_matching(cycles: list[list[int]], edge_sets: Iterable[Iterable[int]]) -> list[str]:
    wanted = [frozenset(s) for s in edge_sets]
    out = []
    for i, c in enumerate(cycles):
        if frozenset(c) in wanted:
            out.append(f"c{i}")
    return out


# ------------------------------------------------------------------------ SVG

def _svg(width: float, height: float, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="-1 -1 {width + 2:g} {height + 2:g}" '
        f'width="{20 * (width + 2):g}" height="{20 * (height + 2):g}">'
    )
    return "\n".join([head, "<!-- format: 1 -->"] + body + ["</svg>"]) + "\n"


def drawing_svg(d: Drawing) -> str:
    g = d.graph
    n = max(v[0] for v in g.rot)
    body = [f'<path d="M0 0H{n}V{n}H0Z" fill="none" stroke="#ccc" stroke-width="0.02"/>']
    for cyc in d.cycles():
        pts = []
        v = g.edges[cyc[0]][0]
        for e in cyc:
            a, b = g.edges[e]
            pts.append(v)
            v = b if a == v else a
        path = "M" + " L".join(f"{x} {n - y}" for x, y in pts) + " Z"
        body.append(f'<path d="{path}" fill="none" stroke="black" stroke-width="0.08"/>')
    return _svg(n, n, body)


def perturbation_svg(g: EmbeddedGraph, cycles: list[list[int]]) -> str:
    """Curves through edge midpoints; needs planar positions in ``g.pos``."""
    xy = {v: g.pos[v] for v in g.rot}
    xs = [p[0] for p in xy.values()]
    ys = [p[1] for p in xy.values()]
    w, h = max(xs) - min(xs), max(ys) - min(ys)
    body = []
    for a, b in g.edges:
        pa, pb = xy[a], xy[b]
        body.append(
            f'<path d="M{pa[0]:g} {h - pa[1]:g} L{pb[0]:g} {h - pb[1]:g}" fill="none" '
            'stroke="#ddd" stroke-width="0.03"/>'
        )
    for cyc in cycles:
        mids = []
        for e in cyc:
            a, b = g.edges[e]
            mids.append(((xy[a][0] + xy[b][0]) / 2, (xy[a][1] + xy[b][1]) / 2))
        path = "M" + " L".join(f"{x:g} {h - y:g}" for x, y in mids) + " Z"
        body.append(f'<path d="{path}" fill="none" stroke="black" stroke-width="0.06"/>')
    return _svg(w, h, body)
