"""Blueprints: finite encodings of one-dimensional non-Hausdorff manifolds
with a locally injective projection to R.

A blueprint is a set of open edges, each carrying a value interval (a, b),
and a finite set of nodes.  A node p sits at value v, is the limit of the
right end of exactly one edge (its *left* edge, with b = v) and of the left
end of exactly one edge (its *right* edge, with a = v).  Several nodes may
share an edge end; that sharing is what makes them singular.

All values are exact rationals (fractions.Fraction).
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

Q = Fraction


class BlueprintError(ValueError):
    pass


class InfeasibleError(BlueprintError):
    """Raised when no positive point function reproduces F.  `certificate`
    holds a weighted simple function f with d(f) >= 0 and F(f) <= 0, or
    with d(f) = 0 and F(f) != 0 when F is not even a function of d."""

    def __init__(self, msg: str, certificate: dict):
        super().__init__(msg)
        self.certificate = certificate


def _q(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(x)


# ------------------------------------------------------------------ types

@dataclass(frozen=True)
class Edge:
    id: str
    a: Fraction
    b: Fraction


@dataclass(frozen=True)
class Node:
    id: str
    v: Fraction
    left: str       # edge whose right end limits to this node
    right: str      # edge whose left end limits to this node


class Blueprint:
    def __init__(self, edges: Iterable[Edge], nodes: Iterable[Node] = ()):
        self.edges: dict[str, Edge] = {}
        for e in edges:
            e = Edge(str(e.id), _q(e.a), _q(e.b))
            if e.id in self.edges:
                raise BlueprintError(f"duplicate edge {e.id!r}")
            if not e.a < e.b:
                raise BlueprintError(f"edge {e.id!r} has empty value interval")
            self.edges[e.id] = e
        self.nodes: dict[str, Node] = {}
        for n in nodes:
            n = Node(str(n.id), _q(n.v), str(n.left), str(n.right))
            if n.id in self.nodes or n.id in self.edges:
                raise BlueprintError(f"duplicate id {n.id!r}")
            for side, eid, want in (("left", n.left, "b"), ("right", n.right, "a")):
                if eid not in self.edges:
                    raise BlueprintError(f"node {n.id!r}: unknown {side} edge {eid!r}")
                if getattr(self.edges[eid], want) != n.v:
                    raise BlueprintError(f"node {n.id!r} at {n.v} does not sit at the {want}-end of {eid!r}")
            if n.left == n.right:
                raise BlueprintError(f"node {n.id!r} glues an edge to itself")
            self.nodes[n.id] = n
        self._at_right: dict[str, list[str]] = {e: [] for e in self.edges}
        self._at_left: dict[str, list[str]] = {e: [] for e in self.edges}
        for n in self.nodes.values():
            self._at_right[n.left].append(n.id)
            self._at_left[n.right].append(n.id)
        for n in self.nodes.values():
            if len(self._at_right[n.left]) == 1 and len(self._at_left[n.right]) == 1:
                raise BlueprintError(f"node {n.id!r} is a regular point; merge {n.left!r} and {n.right!r}")

    # attachments
    def nodes_at_right_end(self, eid: str) -> list[str]:
        return sorted(self._at_right[eid])

    def nodes_at_left_end(self, eid: str) -> list[str]:
        return sorted(self._at_left[eid])

    def plus_classes(self) -> list[list[str]]:
        """Nodes sharing a right attachment (limits of decreasing sequences)."""
        return [ns for e in sorted(self.edges) if (ns := self.nodes_at_left_end(e))]

    def minus_classes(self) -> list[list[str]]:
        return [ns for e in sorted(self.edges) if (ns := self.nodes_at_right_end(e))]

    def components(self) -> list[set[str]]:
        parent = {e: e for e in self.edges}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x
        for n in self.nodes.values():
            parent[find(n.left)] = find(n.right)
        groups: dict[str, set] = {}
        for e in self.edges:
            groups.setdefault(find(e), set()).add(e)
        return sorted(groups.values(), key=lambda g: min(g))

    def __eq__(self, other) -> bool:
        return isinstance(other, Blueprint) and self.edges == other.edges and self.nodes == other.nodes

    def __repr__(self) -> str:
        return f"Blueprint({len(self.edges)} edges, {len(self.nodes)} nodes)"

    # .bp text format
    def to_text(self) -> str:
        lines = ["format: 1"]
        lines += [f"edge {e.id} {e.a} {e.b}" for e in sorted(self.edges.values(), key=lambda e: e.id)]
        lines += [f"node {n.id} {n.v} {n.left} {n.right}" for n in sorted(self.nodes.values(), key=lambda n: n.id)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Blueprint":
        edges, nodes = [], []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line or line.startswith("format:"):
                continue
            parts = line.split()
            try:
                if parts[0] == "edge" and len(parts) == 4:
                    edges.append(Edge(parts[1], Fraction(parts[2]), Fraction(parts[3])))
                elif parts[0] == "node" and len(parts) == 5:
                    nodes.append(Node(parts[1], Fraction(parts[2]), parts[3], parts[4]))
                else:
                    raise ValueError
            except (ValueError, ZeroDivisionError):
                raise BlueprintError(f"cannot parse line {raw!r}") from None
        return cls(edges, nodes)


# Points are ("e", edge_id, t) for a < t < b or ("n", node_id).
def edge_point(eid: str, t) -> tuple:
    return ("e", eid, _q(t))


def node_point(nid: str) -> tuple:
    return ("n", nid)


@dataclass(frozen=True)
class SimpleSubset:
    """Finite union of subintervals per edge plus node membership flags.
    Interval endpoints may be the edge's own ends; open/closed endpoint
    choices do not affect d_C or F and are not stored."""
    intervals: Mapping[str, tuple] = field(default_factory=dict)
    nodes: frozenset = frozenset()

    @classmethod
    def build(cls, bp: Blueprint, pieces: Iterable[tuple], nodes: Iterable[str] = ()) -> "SimpleSubset":
        per: dict[str, list] = {}
        for eid, lo, hi in pieces:
            e = bp.edges[eid]
            lo, hi = max(_q(lo), e.a), min(_q(hi), e.b)
            if lo < hi:
                per.setdefault(eid, []).append((lo, hi))
        merged = {}
        for eid, ivs in per.items():
            ivs.sort()
            out = [list(ivs[0])]
            for lo, hi in ivs[1:]:
                if lo <= out[-1][1]:
                    out[-1][1] = max(out[-1][1], hi)
                else:
                    out.append([lo, hi])
            merged[eid] = tuple((lo, hi) for lo, hi in out)
        return cls(merged, frozenset(nodes))


def _left_germ(ivs, t) -> bool:
    return any(lo < t <= hi for lo, hi in ivs)


def _right_germ(ivs, t) -> bool:
    return any(lo <= t < hi for lo, hi in ivs)


def d_c(bp: Blueprint, c: SimpleSubset, x: tuple) -> int:
    """Boundary orientation: left-germ indicator minus right-germ indicator."""
    if x[0] == "e":
        _, eid, t = x
        e = bp.edges[eid]
        if not e.a < t < e.b:
            raise BlueprintError(f"{t} is not inside edge {eid!r}")
        ivs = c.intervals.get(eid, ())
        return int(_left_germ(ivs, t)) - int(_right_germ(ivs, t))
    n = bp.nodes[x[1]]
    left = _left_germ(c.intervals.get(n.left, ()), bp.edges[n.left].b)
    right = _right_germ(c.intervals.get(n.right, ()), bp.edges[n.right].a)
    return int(left) - int(right)


def boundary(bp: Blueprint, c: SimpleSubset) -> dict:
    """Finite support of d_C as {point: +-1}."""
    out = {}
    for eid, ivs in c.intervals.items():
        e = bp.edges[eid]
        for t in {t for iv in ivs for t in iv if e.a < t < e.b}:
            v = d_c(bp, c, ("e", eid, t))
            if v:
                out[("e", eid, t)] = v
    for nid in sorted({n for eid in c.intervals for n in bp._at_right[eid] + bp._at_left[eid]}):
        v = d_c(bp, c, ("n", nid))
        if v:
            out[("n", nid)] = v
    return out


# -------------------------------------------------------- polynomials

@dataclass(frozen=True)
class PiecewisePoly:
    """Continuous piecewise polynomial on [breaks[0], breaks[-1]]; piece i
    holds coefficients (c0, c1, ...) in the absolute variable t."""
    breaks: tuple
    coeffs: tuple

    def __post_init__(self):
        br = tuple(_q(b) for b in self.breaks)
        cs = tuple(tuple(_q(c) for c in p) for p in self.coeffs)
        object.__setattr__(self, "breaks", br)
        object.__setattr__(self, "coeffs", cs)
        if len(cs) != len(br) - 1 or any(b1 >= b2 for b1, b2 in zip(br, br[1:])):
            raise BlueprintError("bad piecewise polynomial layout")
        if any(len(p) > 4 for p in cs):
            raise BlueprintError("pieces are limited to degree 3")
        for i in range(1, len(cs)):
            if _peval(cs[i - 1], br[i]) != _peval(cs[i], br[i]):
                raise BlueprintError(f"discontinuity at {br[i]}")

    @classmethod
    def linear(cls, points: Sequence[tuple]) -> "PiecewisePoly":
        """Interpolate (t, value) pairs linearly."""
        pts = [(_q(t), _q(y)) for t, y in points]
        coeffs = []
        for (t0, y0), (t1, y1) in zip(pts, pts[1:]):
            s = (y1 - y0) / (t1 - t0)
            coeffs.append((y0 - s * t0, s))
        return cls(tuple(t for t, _ in pts), tuple(coeffs))

    def _piece(self, t) -> int:
        if not self.breaks[0] <= t <= self.breaks[-1]:
            raise BlueprintError(f"{t} outside [{self.breaks[0]}, {self.breaks[-1]}]")
        for i in range(len(self.coeffs)):
            if t <= self.breaks[i + 1]:
                return i
        return len(self.coeffs) - 1

    def __call__(self, t) -> Fraction:
        t = _q(t)
        return _peval(self.coeffs[self._piece(t)], t)

    def shifted(self, c) -> "PiecewisePoly":
        c = _q(c)
        return PiecewisePoly(self.breaks, tuple((p[0] + c,) + p[1:] for p in self.coeffs))

    def open_minimum(self) -> tuple[Fraction, bool, Fraction]:
        """(value, attained, where) of the infimum over the open interval.
        For cubic pieces with irrational critical points the value is a
        rational lower bound of the true minimum, flagged as attained."""
        a, b = self.breaks[0], self.breaks[-1]
        cands: list[tuple[Fraction, bool, Fraction]] = [(self(a), False, a), (self(b), False, b)]
        for t in self.breaks[1:-1]:
            cands.append((self(t), True, t))
        for i, p in enumerate(self.coeffs):
            lo, hi = self.breaks[i], self.breaks[i + 1]
            for val, where in _critical_minima(p, lo, hi):
                cands.append((val, True, where))
        best = min(c[0] for c in cands)
        attained = [c for c in cands if c[0] == best and c[1]]
        if attained:
            return attained[0]
        return next(c for c in cands if c[0] == best)


def _peval(p, t):
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * t + c
    return acc


def _critical_minima(p, lo, hi):
    """Values at interior critical points of one polynomial piece."""
    d = [k * c for k, c in enumerate(p)][1:]
    while d and d[-1] == 0:
        d.pop()
    if len(d) <= 1:
        return []
    if len(d) == 2:
        t = -d[0] / d[1]
        return [(_peval(p, t), t)] if lo < t < hi else []
    c0, c1, c2 = d
    disc = c1 * c1 - 4 * c2 * c0
    if disc < 0:
        return []
    out = []
    num, den = disc.numerator, disc.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        r = Fraction(rn, rd)
        for t in ((-c1 - r) / (2 * c2), (-c1 + r) / (2 * c2)):
            if lo < t < hi:
                out.append((_peval(p, t), t))
        return out
    # irrational roots: bracket each and bound p from below on the bracket
    sq = math.sqrt(float(disc))
    for guess in ((-float(c1) - sq) / (2 * float(c2)), (-float(c1) + sq) / (2 * float(c2))):
        if not float(lo) < guess < float(hi):
            continue
        w = Fraction(1, 2 ** 40) * max(1, abs(hi - lo))
        g = Fraction(guess).limit_denominator(2 ** 50)
        l, r = max(lo, g - w), min(hi, g + w)
        dmax = sum(abs(c) * max(abs(l), abs(r)) ** k for k, c in enumerate(d))
        val = min(_peval(p, l), _peval(p, r)) - dmax * (r - l)
        out.append((val, g))
    return out


@dataclass(frozen=True)
class SetFunction:
    """F(C) = sum over C's subintervals of Phi_e(hi) - Phi_e(lo); node atoms 0."""
    cumulative: Mapping[str, PiecewisePoly]

    def __call__(self, c: SimpleSubset) -> Fraction:
        total = Fraction(0)
        for eid, ivs in c.intervals.items():
            phi = self.cumulative[eid]
            for lo, hi in ivs:
                total += phi(hi) - phi(lo)
        return total

    def weighted(self, terms: Iterable[tuple]) -> Fraction:
        return sum((_q(w) * self(c) for w, c in terms), Fraction(0))


# ---------------------------------------------------------- exact algebra

def _rref(rows: list[list[Fraction]], ncols: int, track: bool = False):
    """Row-reduce in place.  Returns (rows, pivot columns, transform) where
    transform expresses each reduced row through the original rows."""
    m = [list(r) for r in rows]
    T = [[Fraction(int(i == j)) for j in range(len(m))] for i in range(len(m))] if track else None
    pivots = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        if track:
            T[r], T[piv] = T[piv], T[r]
        inv = 1 / m[r][col]
        m[r] = [x * inv for x in m[r]]
        if track:
            T[r] = [x * inv for x in T[r]]
        for i in range(len(m)):
            if i != r and m[i][col] != 0:
                f = m[i][col]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
                if track:
                    T[i] = [x - f * y for x, y in zip(T[i], T[r])]
        pivots.append(col)
        r += 1
        if r == len(m):
            break
    return m, pivots, T


def _generators(bp: Blueprint) -> list[tuple]:
    return [("e", e) for e in sorted(bp.edges)] + [("n", n) for n in sorted(bp.nodes)]


def _end_relations(bp: Blueprint, ends: bool):
    """Boundary chains of end-touching segments, as (kind, edge, vector).
    'right' is the chain of (t, b): sum of nodes at b minus [edge];
    'left' is the chain of (a, t): [edge] minus sum of nodes at a."""
    gens = _generators(bp)
    idx = {g: i for i, g in enumerate(gens)}
    rels = []
    for eid in sorted(bp.edges):
        for kind, ns, sgn in (("right", bp.nodes_at_right_end(eid), 1), ("left", bp.nodes_at_left_end(eid), -1)):
            if not ns and not ends:
                continue
            v = [Fraction(0)] * len(gens)
            v[idx[("e", eid)]] = Fraction(-sgn)
            for n in ns:
                v[idx[("n", n)]] += sgn
            rels.append((kind, eid, v))
    return gens, rels


@dataclass
class Homology:
    dim: int
    generators: list            # effective V0 basis: edges then nodes
    relations: list             # vectors spanning the image of d
    class_map: dict             # generator -> coordinates in H (tuple of Fractions)

    def j(self, bp: Blueprint, x: tuple) -> tuple:
        key = ("e", x[1]) if x[0] == "e" else ("n", x[1])
        return self.class_map[key]


def homology_reduce(bp: Blueprint, ends: bool = False) -> Homology:
    """H = V0 / d(V1) with V0 collapsed to one generator per edge and node.

    Interior segments give [t2] - [t1], which vanish once points of an edge
    are identified.  Segments reaching a node-attached edge end give the
    node relations.  With `ends=True` the chains of segments running into a
    free edge end (which make that edge's class vanish) are included too.
    """
    gens, rels = _end_relations(bp, ends)
    vecs = [v for _, _, v in rels]
    m, pivots, _ = _rref(vecs, len(gens)) if vecs else ([], [], None)
    free = [c for c in range(len(gens)) if c not in pivots]
    cmap = {}
    for gi, g in enumerate(gens):
        coord = [Fraction(0)] * len(free)
        if gi in free:
            coord[free.index(gi)] = Fraction(1)
        else:
            row = m[pivots.index(gi)]
            for k, fc in enumerate(free):
                coord[k] = -row[fc]
        cmap[g] = tuple(coord)
    return Homology(len(free), gens, vecs, cmap)


# --------------------------------------------------------------- exact LP

def _simplex(c, A, b):
    """maximize c.x subject to A x <= b, x >= 0, b >= 0 (origin feasible).
    Bland's rule in exact arithmetic.  Returns (status, x, value)."""
    m, n = len(A), len(c)
    T = [list(A[i]) + [Fraction(int(i == j)) for j in range(m)] + [b[i]] for i in range(m)]
    z = [-ci for ci in c] + [Fraction(0)] * m + [Fraction(0)]
    basis = [n + i for i in range(m)]
    while True:
        col = next((j for j in range(n + m) if z[j] < 0), None)
        if col is None:
            break
        best = None
        for i in range(m):
            if T[i][col] > 0:
                ratio = T[i][-1] / T[i][col]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            return "unbounded", None, None
        r = best[1]
        inv = 1 / T[r][col]
        T[r] = [x * inv for x in T[r]]
        for i in range(m):
            if i != r and T[i][col] != 0:
                f = T[i][col]
                T[i] = [x - f * y for x, y in zip(T[i], T[r])]
        f = z[col]
        z = [x - f * y for x, y in zip(z, T[r])]
        basis[r] = col
    x = [Fraction(0)] * (n + m)
    for i, bi in enumerate(basis):
        x[bi] = T[i][-1]
    return "optimal", x[:n], z[-1]


def _lp_free(c, rows, rhs, start):
    """maximize c.y over y in R^k subject to rows[i].y <= rhs[i], given a
    feasible start y0.  Variables are shifted to y = y0 + p - q, p, q >= 0."""
    k = len(c)
    b = [rhs[i] - sum(r * s for r, s in zip(rows[i], start)) for i in range(len(rows))]
    if any(bi < 0 for bi in b):
        raise BlueprintError("LP start point is infeasible")
    A = [list(r) + [-x for x in r] for r in rows]
    status, x, _ = _simplex(list(c) + [-ci for ci in c], A, b)
    if status != "optimal":
        return status, None
    return status, [start[i] + x[i] - x[k + i] for i in range(k)]


# ------------------------------------------------------------ solve_phi

@dataclass
class PointFunction:
    """phi on a blueprint: per-edge closed forms and node values."""
    edges: dict         # edge id -> PiecewisePoly
    nodes: dict         # node id -> Fraction
    slack: Fraction = Fraction(0)

    def __call__(self, x: tuple) -> Fraction:
        if x[0] == "e":
            return self.edges[x[1]](x[2])
        return self.nodes[x[1]]

    def pair(self, bp: Blueprint, c: SimpleSubset) -> Fraction:
        """sum over x of phi(x) d_C(x)"""
        return sum((self(x) * v for x, v in boundary(bp, c).items()), Fraction(0))


def _equation_system(bp: Blueprint, F: SetFunction):
    """Unknowns: a constant c_e per edge (phi_e = Phi_e + c_e) and phi_p per
    node.  One equation per end-touching segment chain (free ends included)."""
    gens, rels = _end_relations(bp, ends=True)
    A, b, meta = [], [], []
    for kind, eid, vec in rels:
        e = bp.edges[eid]
        phi = F.cumulative[eid]
        # right chain: sum_{L} phi_p - phi_e(t) = Phi(b) - Phi(t)  ->  sum_L phi_p - c_e = Phi(b)
        # left chain:  phi_e(t) - sum_{R} phi_p = Phi(t) - Phi(a)  ->  c_e - sum_R phi_p = -Phi(a)
        A.append(vec)
        b.append(phi(e.b) if kind == "right" else -phi(e.a))
        meta.append((kind, eid))
    return gens, A, b, meta


def _segment_for(bp: Blueprint, kind: str, eid: str) -> SimpleSubset:
    e = bp.edges[eid]
    mid = (e.a + e.b) / 2
    return SimpleSubset.build(bp, [(eid, mid, e.b)] if kind == "right" else [(eid, e.a, mid)])


def _check_certificate(bp, F, terms):
    total = {}
    for w, c in terms:
        for x, v in boundary(bp, c).items():
            total[x] = total.get(x, 0) + w * v
    return {x: v for x, v in total.items() if v != 0}, F.weighted(terms)


def solve_phi(bp: Blueprint, F: SetFunction) -> PointFunction:
    """Find phi > 0 with F(C) = sum_x phi(x) d_C(x) for every simple C.

    phi equals Phi_e + c_e on each edge.  The end-chain equations pin
    (c, phi_nodes) to an affine space whose directions are dual to H; on it
    the positivity constraints reduce to one per node and one per edge (at
    the exact minimiser of Phi_e).  The minimum slack is maximised exactly;
    ties go to the lexicographically smallest optimal point.
    """
    for eid, e in bp.edges.items():
        phi = F.cumulative.get(eid)
        if phi is None or phi.breaks[0] != e.a or phi.breaks[-1] != e.b:
            raise BlueprintError(f"set function does not cover edge {eid!r}")
    gens, A, b, meta = _equation_system(bp, F)
    ncol = len(gens)
    aug = [row + [bi] for row, bi in zip(A, b)]
    m, pivots, T = _rref(aug, ncol, track=True) if aug else ([], [], [])
    for i, row in enumerate(m):
        if all(x == 0 for x in row[:ncol]) and row[ncol] != 0:
            # y^T A = 0 but y^T b != 0: F is not a function of d
            terms = [(T[i][r], _segment_for(bp, *meta[r])) for r in range(len(meta)) if T[i][r] != 0]
            d, val = _check_certificate(bp, F, terms)
            raise InfeasibleError("F does not vanish on a chain with zero boundary",
                                  {"terms": terms, "boundary": d, "F": val})
    free = [c for c in range(ncol) if c not in pivots]
    v0 = [Fraction(0)] * ncol
    for r, pc in enumerate(pivots):
        v0[pc] = m[r][ncol]
    K = []
    for fc in free:
        k = [Fraction(0)] * ncol
        k[fc] = Fraction(1)
        for r, pc in enumerate(pivots):
            k[pc] = -m[r][fc]
        K.append(k)
    h = len(free)
    col = {g: i for i, g in enumerate(gens)}

    # positivity rows: value = base + coef . y  (strict)
    rows = []   # (point, base, coef)
    for nid in sorted(bp.nodes):
        i = col[("n", nid)]
        rows.append((("n", nid), v0[i], [k[i] for k in K]))
    mins = {}
    for eid in sorted(bp.edges):
        i = col[("e", eid)]
        val, attained, where = F.cumulative[eid].open_minimum()
        mins[eid] = (val, attained, where)
        if attained:
            rows.append((("e", eid, where), v0[i] + val, [k[i] for k in K]))
        elif not bp.nodes_at_right_end(eid) and where == bp.edges[eid].b or \
                not bp.nodes_at_left_end(eid) and where == bp.edges[eid].a:
            pass    # infimum at a free end: phi -> 0 there, implied by the end equation
    # maximise s subject to s <= base + coef.y, s <= 1
    if h == 0:
        y = []
        s_star = min([r[1] for r in rows] + [Fraction(1)])
    else:
        lp_rows = [[-c for c in coef] + [Fraction(1)] for _, _, coef in rows] + [[Fraction(0)] * h + [Fraction(1)]]
        lp_rhs = [base for _, base, _ in rows] + [Fraction(1)]
        start = [Fraction(0)] * h + [min(lp_rhs)]
        status, sol = _lp_free([Fraction(0)] * h + [Fraction(1)], lp_rows, lp_rhs, start)
        if status != "optimal":
            raise BlueprintError(f"slack maximisation is {status}")
        s_star = sol[h]
        y = sol[:h]
    if s_star <= 0:
        raise InfeasibleError("positivity cannot be met", _farkas(bp, F, rows, h, meta, A))
    if h:
        # lexicographic tie-break at the optimal slack
        fixed_rows = [[-c for c in coef] for _, _, coef in rows]
        fixed_rhs = [base - s_star for _, base, _ in rows]
        for k in range(h):
            extra_rows = [[Fraction(int(i == j)) for i in range(h)] for j in range(k)] + \
                         [[-Fraction(int(i == j)) for i in range(h)] for j in range(k)]
            extra_rhs = [y[j] for j in range(k)] + [-y[j] for j in range(k)]
            obj = [Fraction(-int(i == k)) for i in range(h)]
            status, sol = _lp_free(obj, fixed_rows + extra_rows, fixed_rhs + extra_rhs, y)
            if status == "optimal":
                y = sol
    vals = [v0[i] + sum(K[k][i] * y[k] for k in range(h)) for i in range(ncol)]
    edges = {eid: F.cumulative[eid].shifted(vals[col[("e", eid)]]) for eid in bp.edges}
    nodes = {nid: vals[col[("n", nid)]] for nid in bp.nodes}
    out = PointFunction(edges, nodes, s_star)
    for nid, v in nodes.items():
        assert v > 0, nid
    for eid, (val, attained, _) in mins.items():
        assert val + vals[col[("e", eid)]] >= (s_star if attained else 0)
    return out


def _farkas(bp, F, rows, h, meta, A):
    """Certificate for infeasible positivity: weights lam >= 0 on the
    positivity rows with sum lam * coef = 0 and sum lam * base <= 0.  It is
    turned into a simple function f with d(f) = sum lam [x] >= 0 and
    F(f) = sum lam base <= 0."""
    n = len(rows)
    # minimise sum lam*base s.t. sum lam = 1, sum lam*coef = 0, lam >= 0,
    # written as maximise -base.lam with equalities as paired inequalities.
    eq_rows = [[Fraction(1)] * n] + [[r[2][k] for r in rows] for k in range(h)]
    eq_rhs = [Fraction(1)] + [Fraction(0)] * h
    # phase one via the big picture: search single rows first (common case)
    lam = None
    for i, (_, base, coef) in enumerate(rows):
        if base <= 0 and all(c == 0 for c in coef):
            lam = [Fraction(int(j == i)) for j in range(n)]
            break
    if lam is None:
        lam = _min_lambda(rows, eq_rows, eq_rhs)
    terms = []
    node_w: dict[str, Fraction] = {}
    for w, (x, _, _) in zip(lam, rows):
        if w == 0:
            continue
        if x[0] == "n":
            node_w[x[1]] = node_w.get(x[1], Fraction(0)) + w
        else:
            eid, t = x[1], x[2]
            terms.append((w, SimpleSubset.build(bp, [(eid, bp.edges[eid].a, t)])))
            for p in bp.nodes_at_left_end(eid):      # (a, t) also charges -[p]
                node_w[p] = node_w.get(p, Fraction(0)) + w
    if node_w:
        # express sum node_w [p] through whole-edge chains W_e = sum_L [p] - sum_R [p]
        nids = sorted(bp.nodes)
        eids = sorted(bp.edges)
        cols = []
        for eid in eids:
            v = [Fraction(0)] * len(nids)
            for p in bp.nodes_at_right_end(eid):
                v[nids.index(p)] += 1
            for p in bp.nodes_at_left_end(eid):
                v[nids.index(p)] -= 1
            cols.append(v)
        target = [node_w.get(p, Fraction(0)) for p in nids]
        aug = [[cols[j][i] for j in range(len(eids))] + [target[i]] for i in range(len(nids))]
        m, piv, _ = _rref(aug, len(eids))
        z = [Fraction(0)] * len(eids)
        for r, pc in enumerate(piv):
            z[pc] = m[r][-1]
        for eid, w in zip(eids, z):
            if w:
                e = bp.edges[eid]
                terms.append((w, SimpleSubset.build(bp, [(eid, e.a, e.b)])))
    d, val = _check_certificate(bp, F, terms)
    return {"terms": terms, "boundary": d, "F": val,
            "points": [(x, w) for w, (x, _, _) in zip(lam, rows) if w]}


def _min_lambda(rows, eq_rows, eq_rhs):
    """Vertex-enumeration fallback for the certificate weights (the systems
    here are tiny)."""
    n = len(rows)
    k = len(eq_rows)
    best = None
    for supp in itertools.combinations(range(n), min(k, n)):
        M = [[eq_rows[r][j] for j in supp] + [eq_rhs[r]] for r in range(k)]
        m, piv, _ = _rref(M, len(supp))
        if any(all(x == 0 for x in row[:-1]) and row[-1] != 0 for row in m):
            continue
        lam_s = [Fraction(0)] * len(supp)
        for r, pc in enumerate(piv):
            lam_s[pc] = m[r][-1]
        if any(l < 0 for l in lam_s):
            continue
        lam = [Fraction(0)] * n
        for j, l in zip(supp, lam_s):
            lam[j] = l
        val = sum(l * r[1] for l, r in zip(lam, rows))
        if best is None or val < best[0]:
            best = (val, lam)
    if best is None:
        raise BlueprintError("no certificate found")
    return best[1]


# ------------------------------------------------------ random instances

@dataclass
class HiddenInstance:
    bp: Blueprint
    phi0: PointFunction
    F: SetFunction
    grid: dict          # edge -> candidate cut values
    negated_at: tuple | None = None


def random_blueprint(rng: random.Random, max_nodes: int = 6, max_edges: int = 12) -> Blueprint:
    """Random valid blueprint: nodes are glued onto shared edge ends so
    that every node is singular."""
    for _ in range(1000):
        n_nodes = rng.randint(0, max_nodes)
        levels = sorted(rng.sample(range(2, 20), k=min(n_nodes, 4) or 1))
        edges: dict[str, list] = {}
        nodes = []

        def new_edge(a, b):
            eid = f"e{len(edges)}"
            edges[eid] = [Fraction(a), Fraction(b)]
            return eid
        for i in range(n_nodes):
            v = rng.choice(levels)
            ends_b = [e for e, (a, b) in edges.items() if b == v]
            ends_a = [e for e, (a, b) in edges.items() if a == v]
            left = rng.choice(ends_b) if ends_b and rng.random() < 0.6 else new_edge(rng.randint(0, v - 1), v)
            right = rng.choice(ends_a) if ends_a and rng.random() < 0.6 else new_edge(v, rng.randint(v + 1, 22))
            nodes.append(Node(f"p{i}", Fraction(v), left, right))
        for _ in range(rng.randint(0 if nodes else 1, 2)):
            a = rng.randint(0, 20)
            new_edge(a, a + rng.randint(1, 3))
        if len(edges) > max_edges:
            continue
        try:
            return Blueprint([Edge(e, a, b) for e, (a, b) in edges.items()], nodes)
        except BlueprintError:
            continue
    raise BlueprintError("failed to generate a blueprint")


def hidden_instance(rng: random.Random, negate: bool = False) -> HiddenInstance:
    """Random blueprint with a hidden positive piecewise-linear phi0.

    End limits are forced by continuity: an edge end tends to the sum of
    its attached node values, or to 0 at a free end.  With `negate`, one
    interior breakpoint on an edge with a free left end is made negative,
    which violates positivity through the set (a, t)."""
    bp = random_blueprint(rng)
    node_vals = {n: Fraction(rng.randint(1, 30), rng.randint(1, 6)) for n in sorted(bp.nodes)}
    edges = {}
    grid = {}
    for eid, e in sorted(bp.edges.items()):
        lo = sum((node_vals[p] for p in bp.nodes_at_left_end(eid)), Fraction(0))
        hi = sum((node_vals[p] for p in bp.nodes_at_right_end(eid)), Fraction(0))
        k = rng.randint(1, 3)
        ts = sorted({e.a + (e.b - e.a) * Fraction(rng.randint(1, 23), 24) for _ in range(k)})
        pts = [(e.a, lo)] + [(t, Fraction(rng.randint(1, 40), rng.randint(1, 5))) for t in ts] + [(e.b, hi)]
        edges[eid] = pts
        grid[eid] = sorted({e.a, e.b, *ts, (e.a + e.b) / 2, e.a + (e.b - e.a) / 5})
    negated_at = None
    if negate:
        cands = [eid for eid in sorted(bp.edges) if not bp.nodes_at_left_end(eid)]
        eid = rng.choice(cands)
        pts = edges[eid]
        j = rng.randint(1, len(pts) - 2)
        pts[j] = (pts[j][0], -Fraction(rng.randint(1, 10), rng.randint(1, 4)))
        negated_at = ("e", eid, pts[j][0])
    cum = {eid: PiecewisePoly.linear(pts) for eid, pts in edges.items()}
    phi0 = PointFunction(cum, node_vals)
    return HiddenInstance(bp, phi0, SetFunction(cum), grid, negated_at)


def single_segment_subsets(inst: HiddenInstance) -> list[SimpleSubset]:
    out = []
    for eid, cuts in sorted(inst.grid.items()):
        for lo, hi in itertools.combinations(cuts, 2):
            out.append(SimpleSubset.build(inst.bp, [(eid, lo, hi)]))
    return out


def random_subset(inst: HiddenInstance, rng: random.Random) -> SimpleSubset:
    eids = sorted(inst.grid)
    pieces = []
    for _ in range(rng.randint(1, 5)):
        eid = rng.choice(eids)
        lo, hi = sorted(rng.sample(inst.grid[eid], 2))
        pieces.append((eid, lo, hi))
    nodes = [n for n in sorted(inst.bp.nodes) if rng.random() < 0.5]
    return SimpleSubset.build(inst.bp, pieces, nodes)


# --------------------------------------------------- level-set quotients

def blueprint_from_levels(values: Sequence[float], triangles: Sequence[tuple],
                          excluded: Iterable[int] = (), window: tuple | None = None) -> Blueprint:
    """Quotient of a PL surface region by connected level-set components.

    The kept region is U = {lo < f < hi} inside the union of the triangles
    not listed in `excluded`.  The sweep labels the level-set components of
    each open slab between consecutive vertex levels and of each vertex
    level itself, and glues them into edges and singular nodes.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    fv = np.asarray(values, float)
    ex = set(excluded)
    tri = np.array([t for i, t in enumerate(triangles) if i not in ex], dtype=np.int64).reshape(-1, 3)
    if window:
        lo, hi = float(window[0]), float(window[1])
    else:
        lo, hi = float(fv.min()), float(fv.max())
    pairs = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [0, 2]]]), axis=1)
    E, inv = np.unique(pairs, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    ne, nv, nt = len(E), len(fv), len(tri)
    tri_e = inv.reshape(3, nt).T
    bnd = np.bincount(inv, minlength=ne) == 1
    used = np.zeros(nv, bool)
    used[tri.ravel()] = True
    boundary_v = np.zeros(nv, bool)
    boundary_v[E[bnd].ravel()] = True
    interior = used & ~boundary_v
    emin, emax = np.minimum(fv[E[:, 0]], fv[E[:, 1]]), np.maximum(fv[E[:, 0]], fv[E[:, 1]])

    # interior vertices inside the window must be PL-regular
    star: dict[int, list] = {}
    for t in tri.tolist():
        for v in t:
            star.setdefault(v, []).append(t)
    for v in np.flatnonzero(interior & (fv > lo) & (fv < hi)).tolist():
        link: dict[int, list] = {}
        for t in star[v]:
            a, b = [w for w in t if w != v]
            link.setdefault(a, []).append(b)
            link.setdefault(b, []).append(a)
        start = min(link)
        cyc, prev, cur = [start], None, start
        while True:
            nxt = [w for w in link[cur] if w != prev]
            if not nxt or nxt[0] == start:
                break
            prev, cur = cur, nxt[0]
            cyc.append(cur)
        sgn = [(fv[w], w) > (fv[v], v) for w in cyc]
        changes = sum(sgn[i] != sgn[i - 1] for i in range(len(sgn)))
        if changes != 2:
            raise BlueprintError(f"critical point of the field at vertex {v} (star {sorted(map(tuple, star[v]))})")

    tri_items = np.concatenate([tri + ne, tri_e], axis=1)     # items: edges 0..ne-1, vertices ne+v
    ij = [(i, j) for i in range(6) for j in range(i + 1, 6)]

    def label(present, items, n):
        """Connected components of present items glued within triangles;
        returns compact labels (-1 where absent), ordered by first item."""
        pm = present[items]
        rows, cols = [], []
        for i, j in ij:
            if i < items.shape[1] and j < items.shape[1]:
                both = pm[:, i] & pm[:, j]
                rows.append(items[both, i])
                cols.append(items[both, j])
        r = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        c = np.concatenate(cols) if cols else np.zeros(0, np.int64)
        g = coo_matrix((np.ones(len(r)), (r, c)), shape=(n, n))
        _, lab = connected_components(g, directed=False)
        out = np.full(n, -1)
        idx = np.flatnonzero(present)
        if len(idx):
            _, first, comp = np.unique(lab[idx], return_index=True, return_inverse=True)
            order = np.argsort(np.argsort(idx[first]))
            out[idx] = order[comp.reshape(-1)]
        return out

    levels = sorted({float(x) for x in fv[used] if lo < x < hi} | {lo, hi})

    def slab(k):
        return label((emin <= levels[k]) & (emax >= levels[k + 1]), tri_e, ne)

    def adjacency(slab_lab, lev_lab):
        """(slab component, level component) pairs sharing an edge or a
        level vertex at an edge end."""
        es = np.flatnonzero(slab_lab >= 0)
        got = set()
        for cand in (es, ne + E[es, 0], ne + E[es, 1]):
            ok = lev_lab[cand] >= 0
            got |= set(zip(slab_lab[es[ok]].tolist(), lev_lab[cand[ok]].tolist()))
        return got

    out_edges: dict[str, list] = {}
    out_nodes = []

    def new_edge(a):
        eid = f"E{len(out_edges)}"
        out_edges[eid] = [a, None]
        return eid

    below = slab(0)
    edge_of = {a: new_edge(levels[0]) for a in range(below.max() + 1)}
    for k in range(1, len(levels) - 1):
        c = levels[k]
        above = slab(k)
        present = np.zeros(ne + nv, bool)
        present[:ne] = (emin < c) & (c < emax)
        present[ne:] = interior & (fv == c)
        lev = label(present, tri_items, ne + nv)
        nl = lev.max() + 1
        ab, bb = adjacency(below, lev), adjacency(above, lev)
        a_of = {L: [a for a, l in ab if l == L] for L in range(nl)}
        b_of = {L: [b for b, l in bb if l == L] for L in range(nl)}
        for L in range(nl):
            if len(a_of[L]) != 1 or len(b_of[L]) != 1:
                raise BlueprintError(f"level {c!r} has a component without a two-sided neighbourhood")
        l_of_a = {a: [l for x, l in ab if x == a] for a in range(below.max() + 1)}
        l_of_b = {b: [l for x, l in bb if x == b] for b in range(above.max() + 1)}

        def through(a):
            return len(l_of_a[a]) == 1 and len(l_of_b[b_of[l_of_a[a][0]][0]]) == 1
        new_of = {}
        for a in l_of_a:
            if not through(a):
                out_edges[edge_of[a]][1] = c
        for b, ls in l_of_b.items():
            if len(ls) == 1 and through(a_of[ls[0]][0]):
                new_of[b] = edge_of[a_of[ls[0]][0]]
            else:
                new_of[b] = new_edge(c)
        for L in range(nl):
            ea, eb = edge_of[a_of[L][0]], new_of[b_of[L][0]]
            if ea != eb:
                out_nodes.append(Node(f"N{len(out_nodes)}", Fraction(c), ea, eb))
        below, edge_of = above, new_of
    for a in edge_of.values():
        out_edges[a][1] = levels[-1]
    return Blueprint([Edge(e, Fraction(a), Fraction(b)) for e, (a, b) in out_edges.items()], out_nodes)


def same_shape(x: Blueprint, y: Blueprint) -> bool:
    """Isomorphism test ignoring ids and exact values (small blueprints):
    compares the multiset of (left-edge, right-edge) attachment patterns."""
    def sig(bp):
        deg = {e: (len(bp.nodes_at_left_end(e)), len(bp.nodes_at_right_end(e))) for e in bp.edges}
        nodes = sorted((deg[n.left], deg[n.right]) for n in bp.nodes.values())
        return sorted(deg.values()), nodes, len(bp.components())
    return sig(x) == sig(y)


# ------------------------------------------- finite-order decomposition

def _smoothstep(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, float)
    def g(s):
        with np.errstate(over="ignore", divide="ignore"):
            return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    return g(x) / (g(x) + g(1.0 - x))


def bump(lo: float, hi: float) -> Callable:
    """Standard strictly-bump function on (lo, hi)."""
    lo, hi = float(lo), float(hi)
    def chi(t):
        t = np.asarray(t, float)
        s = (t - lo) / (hi - lo)
        inside = (s > 0) & (s < 1)
        safe = np.where(inside, s, 0.5)
        return np.where(inside, np.exp(-1.0 / (safe * (1 - safe))) * math.exp(4.0), 0.0)
    return chi


@dataclass
class FamilyMember:
    """Embedded open interval: a path edge, node, edge, ... through the
    blueprint, with values (lo, hi), and a strictly-bump chi on (lo, hi)."""
    path: tuple
    lo: float
    hi: float
    chi: Callable


@dataclass
class Decomposition:
    members: list       # normalised FamilyMembers
    coeffs: list        # callables h_i(t) on each member
    where: list         # per member: ("edge", eid) or ("node", nid)
    jets: dict          # node -> jet coefficients of h_p chi_p
    eps: float

    def value(self, bp: Blueprint, x: tuple) -> float:
        """sum_i h_i(x) chi_i(x) at a blueprint point."""
        tot = 0.0
        for m, h, w in zip(self.members, self.coeffs, self.where):
            if w[0] == "edge":
                if x[0] == "e" and x[1] == w[1] and m.lo < float(x[2]) < m.hi:
                    tot += float(h(float(x[2])) * m.chi(float(x[2])))
            else:
                n = bp.nodes[w[1]]
                v = float(n.v)
                if x[0] == "n":
                    if x[1] == w[1]:
                        tot += float(h(v) * m.chi(v))
                elif (x[1] == n.left and v - self.eps < float(x[2]) < v) or \
                        (x[1] == n.right and v < float(x[2]) < v + self.eps):
                    tot += float(h(float(x[2])) * m.chi(float(x[2])))
        return tot


def _jet(fn, t0: float, k: int, side: int, width: float) -> np.ndarray:
    """One-sided Taylor coefficients of fn at t0 up to order k."""
    if hasattr(fn, "deriv"):
        out, g = [], fn
        for j in range(k + 1):
            out.append(float(g(t0)) / math.factorial(j))
            g = g.deriv()
        return np.array(out)
    deg = k + 6
    s = width * (1 - np.cos(np.linspace(0, np.pi / 2, 4 * deg)))[1:] * side
    y = np.array([float(fn(t0 + si)) for si in s])
    # fit in s / width for conditioning, then undo the scaling
    x = s / width
    cheb = np.polynomial.Chebyshev.fit(x, y, deg, domain=[min(x.min(), 0.0), max(x.max(), 0.0)])
    c = cheb.convert(kind=np.polynomial.Polynomial, domain=[-1, 1], window=[-1, 1]).coef
    c = np.pad(c, (0, max(0, k + 1 - len(c))))
    return c[:k + 1] / width ** np.arange(k + 1)


def decompose_finite_order(bp: Blueprint, phi_edges: Mapping[str, Callable], phi_nodes: Mapping[str, float],
                           family: Sequence[FamilyMember], k: int = 3, tol: float = 1e-6) -> Decomposition:
    """Positive coefficients h_i with sum h_i chi_i = phi, matching the jets
    of phi at every node up to order k (in place of full Taylor series)."""
    node_levels = sorted({float(n.v) for n in bp.nodes.values()})
    marks = sorted({x for m in family for x in (m.lo, m.hi)} | set(node_levels)
                   | {float(v) for e in bp.edges.values() for v in (e.a, e.b)})
    gaps = [b - a for a, b in zip(marks, marks[1:]) if b - a > 1e-12]
    eps = 0.25 * min(gaps) if gaps else 1.0

    # path validation and the nodes each member passes through
    through: list[list[str]] = []
    for m in family:
        ns = []
        for i, (kind, ident) in enumerate(m.path):
            if kind == "n":
                n = bp.nodes[ident]
                if i == 0 or i == len(m.path) - 1 or m.path[i - 1] != ("e", n.left) or m.path[i + 1] != ("e", n.right):
                    raise BlueprintError(f"family path {m.path} is not an embedded interval at {ident}")
                if not m.lo < float(n.v) < m.hi:
                    raise BlueprintError(f"family interval ({m.lo}, {m.hi}) misses node {ident}")
                ns.append(ident)
        through.append(ns)

    def cut(t, v):
        # 1 on |t - v| <= eps/2, 0 beyond eps
        return _smoothstep((eps - np.abs(np.asarray(t, float) - v)) / (eps / 2))

    members, where, hs = [], [], []
    node_parts: dict[str, list] = {}
    for m, ns in zip(family, through):
        vs = [float(bp.nodes[n].v) for n in ns]
        edges_on_path = [ident for kind, ident in m.path if kind == "e"]
        if not ns:
            members.append(m)
            where.append(("edge", edges_on_path[0]))
            continue
        cuts = [m.lo] + [x for v in vs for x in (v - eps / 2, v + eps / 2)] + [m.hi]
        rest = (lambda chi, vs: (lambda t: chi(t) * (1 - sum(cut(t, v) for v in vs))))(m.chi, vs)
        for i, eid in enumerate(edges_on_path):
            lo, hi = cuts[2 * i], cuts[2 * i + 1]
            if hi > lo:
                members.append(FamilyMember((("e", eid),), lo, hi, rest))
                where.append(("edge", eid))
        for n, v in zip(ns, vs):
            node_parts.setdefault(n, []).append((lambda chi, v: (lambda t: chi(t) * cut(t, v)))(m.chi, v))
    for n in sorted(node_parts):
        parts = node_parts[n]
        v = float(bp.nodes[n].v)
        nd = bp.nodes[n]
        members.append(FamilyMember((("e", nd.left), ("n", n), ("e", nd.right)), v - eps, v + eps,
                                    (lambda ps: (lambda t: sum(p(t) for p in ps)))(parts)))
        where.append(("node", n))

    # cover check on a fine sample of every edge and at every node
    for nid in bp.nodes:
        if nid not in node_parts:
            raise BlueprintError(f"node {nid} is not covered by the family")
    for eid, e in bp.edges.items():
        ts = np.linspace(float(e.a), float(e.b), 2003)[1:-1]
        covered = np.zeros_like(ts, bool)
        for m, w in zip(members, where):
            if w == ("edge", eid):
                covered |= (ts > m.lo) & (ts < m.hi)
            elif w[0] == "node":
                nd = bp.nodes[w[1]]
                v = float(nd.v)
                if nd.left == eid:
                    covered |= (ts > v - eps) & (ts < v)
                if nd.right == eid:
                    covered |= (ts > v) & (ts < v + eps)
        if not covered.all():
            raise BlueprintError(f"edge {eid} is not covered near {ts[~covered][0]:.6g}")

    # jets: one unknown Taylor polynomial per node
    nids = sorted(node_parts)
    nk = k + 1
    rows, rhs = [], []
    for j, nid in enumerate(nids):
        r = np.zeros(len(nids) * nk)
        r[j * nk] = 1
        rows.append(r)
        rhs.append(float(phi_nodes[nid]))
    for side, classes, edge_of in ((1, bp.plus_classes(), lambda n: bp.nodes[n].right),
                                   (-1, bp.minus_classes(), lambda n: bp.nodes[n].left)):
        for cls in classes:
            eid = edge_of(cls[0])
            v = float(bp.nodes[cls[0]].v)
            e = bp.edges[eid]
            # phi is smooth on the whole open edge; a wide window keeps the
            # high-order coefficients well conditioned
            width = 0.5 * float(e.b - e.a)
            jet = _jet(phi_edges[eid], v, k, side, width)
            for order in range(nk):
                r = np.zeros(len(nids) * nk)
                for n in cls:
                    r[nids.index(n) * nk + order] = 1
                rows.append(r)
                rhs.append(jet[order])
    M, y = np.array(rows).reshape(len(rows), len(nids) * nk), np.array(rhs)
    sol = np.linalg.lstsq(M, y, rcond=None)[0] if rows else np.zeros(0)
    if rows and np.max(np.abs(M @ sol - y)) > tol * max(1.0, np.max(np.abs(y))):
        raise BlueprintError(f"jet constraints of order {k} are inconsistent (phi is not pseudosmooth to that order)")
    jets = {nid: sol[j * nk:(j + 1) * nk] for j, nid in enumerate(nids)}

    # node coefficients: T_p / chi_p near p, blended to a constant
    base_h = []
    for m, w in zip(members, where):
        if w[0] == "edge":
            base_h.append(lambda t: np.ones_like(np.asarray(t, float)))
            continue
        nid = w[1]
        v = float(bp.nodes[nid].v)
        T = np.polynomial.Polynomial(jets[nid])
        ss = np.linspace(-eps / 2, eps / 2, 201)
        if np.min(T(ss)) <= 0:
            raise BlueprintError(f"jet at node {nid} is not positive on its window; refine the family")
        cst = float(phi_nodes[nid]) / max(float(m.chi(v)), 1e-300)

        def hp(t, T=T, v=v, chi=m.chi, cst=cst):
            t = np.asarray(t, float)
            near = _smoothstep((eps / 2 - np.abs(t - v)) / (eps / 4))
            c = np.asarray(chi(t), float)
            ratio = np.where(c > 0, T(t - v) / np.where(c > 0, c, 1.0), cst)
            return near * ratio + (1 - near) * cst
        base_h.append(hp)

    def phi_at(x):
        return float(phi_nodes[x[1]]) if x[0] == "n" else float(phi_edges[x[1]](float(x[2])))

    pre = Decomposition(members, base_h, where, jets, eps)
    cache: dict = {}

    def phi1(x):
        key = (x[0], x[1], float(x[2])) if x[0] == "e" else x
        if key not in cache:
            cache[key] = pre.value(bp, x)
        return cache[key]

    final = []
    for (m, w), hb in zip(zip(members, where), base_h):
        if w[0] == "edge":
            eid = w[1]
            def he(t, hb=hb, eid=eid):
                d = phi1(("e", eid, t))
                # outside the support of chi the coefficient is irrelevant
                return hb(t) * phi_at(("e", eid, t)) / d if d > 0 else hb(t)
            final.append(he)
        else:
            nd = bp.nodes[w[1]]
            v = float(nd.v)

            def h(t, hb=hb, nd=nd, v=v):
                t = float(t)
                x = ("n", nd.id) if t == v else (("e", nd.left, t) if t < v else ("e", nd.right, t))
                d = phi1(x)
                return hb(t) * phi_at(x) / d if d > 0 else hb(t)
            final.append(h)
    return Decomposition(members, final, where, jets, eps)
