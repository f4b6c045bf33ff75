"""Spherical harmonics Y_n^m, Legendre root finding and the globe graph."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg

from .planar import EmbeddedGraph, PlanarError


class HarmonicError(ValueError):
    pass


@dataclass(frozen=True)
class HarmonicIndex:
    n: int
    m: int

    def __post_init__(self):
        if not (1 <= self.m <= self.n):
            raise HarmonicError(f"need 1 <= m <= n, got n={self.n}, m={self.m}")


def legendre_p(n: int, x):
    """P_n(x) by the three-term recurrence."""
    x = np.asarray(x, float)
    if np.any(np.abs(x) > 1):
        raise HarmonicError("|x| must not exceed 1")
    p0, p1 = np.ones_like(x), x.copy()
    if n == 0:
        return p0 if p0.ndim else float(p0)
    for k in range(1, n):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
    return p1 if p1.ndim else float(p1)


@lru_cache(maxsize=None)
def _dm_coeffs(n: int, m: int) -> np.ndarray:
    c = np.zeros(n + 1)
    c[n] = 1.0
    return npleg.legder(c, m) if m else c


def dm_legendre(n: int, m: int, x):
    """d^m P_n / dx^m."""
    return npleg.legval(np.asarray(x, float), _dm_coeffs(n, m))


def dm_legendre_prime(n: int, m: int, x):
    return npleg.legval(np.asarray(x, float), _dm_coeffs(n, m + 1)) if m < n else 0.0 * np.asarray(x)


def f_nm_roots(n: int, m: int, tol: float = 1e-13) -> list[float]:
    """Roots of d^m P_n in (-1, 1), isolated on Chebyshev points and bisected."""
    if m > n:
        raise HarmonicError("m must not exceed n")
    if m < 0:
        raise HarmonicError("m must be non-negative")
    count = n - m
    if count == 0:
        return []
    k = 8 * (n + 1)
    xs = np.sort(np.cos(np.pi * (np.arange(k) + 0.5) / k))
    xs = np.concatenate([[-1.0], xs, [1.0]])
    vals = dm_legendre(n, m, xs)
    roots = []
    for a, b, fa, fb in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            if -1 < a < 1:
                roots.append(float(a))
            continue
        if fa * fb < 0:
            while b - a > tol:
                c = 0.5 * (a + b)
                fc = dm_legendre(n, m, c)
                if fc == 0:
                    a = b = c
                    break
                if fa * fc < 0:
                    b = c
                else:
                    a, fa = c, fc
            roots.append(0.5 * (a + b))
    if len(roots) != count:
        raise HarmonicError(f"found {len(roots)} roots of d^{m}P_{n}, expected {count}")
    return roots


def eval_ynm(idx: HarmonicIndex, theta, phi):
    """sin^m(theta) * F_n^m(cos theta) * sin(m phi) with F_n^m = d^m P_n."""
    theta = np.asarray(theta, float)
    return np.sin(theta) ** idx.m * dm_legendre(idx.n, idx.m, np.cos(theta)) * np.sin(idx.m * np.asarray(phi))


def ynm_gradient(idx: HarmonicIndex, theta, phi):
    """(dY/dtheta, dY/dphi) coordinate derivatives."""
    n, m = idx.n, idx.m
    theta = np.asarray(theta, float)
    s, c = np.sin(theta), np.cos(theta)
    F = dm_legendre(n, m, c)
    Fp = dm_legendre_prime(n, m, c)
    g = s ** m * F
    gp = m * s ** (m - 1) * c * F - s ** (m + 1) * Fp
    return gp * np.sin(m * np.asarray(phi)), g * m * np.cos(m * np.asarray(phi))


def ynm_scale(idx: HarmonicIndex) -> float:
    """max |Y_n^m| over the sphere (attained where sin(m phi) = 1)."""
    th = np.linspace(0, np.pi, 20 * idx.n + 41)
    prof = np.abs(np.sin(th) ** idx.m * dm_legendre(idx.n, idx.m, np.cos(th)))
    i = int(np.argmax(prof))
    lo, hi = th[max(i - 1, 0)], th[min(i + 1, len(th) - 1)]
    fine = np.linspace(lo, hi, 401)
    return float(np.max(np.abs(np.sin(fine) ** idx.m * dm_legendre(idx.n, idx.m, np.cos(fine)))))


def eigenvalue(n: int) -> float:
    if n < 0:
        raise HarmonicError("degree must be non-negative")
    return float(n * (n + 1))


# ---------------------------------------------------------------- globe graph

@dataclass
class GlobeGraph:
    idx: HarmonicIndex
    colatitudes: list[float]
    graph: EmbeddedGraph

    @property
    def rows(self) -> int:
        return len(self.colatitudes)

    @property
    def cols(self) -> int:
        return 2 * self.idx.m


def _sph(theta: float, phi: float) -> tuple[float, float, float]:
    return (math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta))


def globe_graph(idx: HarmonicIndex) -> GlobeGraph:
    n, m = idx.n, idx.m
    if n == m:
        raise HarmonicError("n = m gives no latitude circles")
    roots = f_nm_roots(n, m)
    thetas = sorted(math.acos(min(1.0, max(-1.0, r))) for r in roots)
    L, C = len(thetas), 2 * m
    edges: list = []
    lat = [[0] * C for _ in range(L)]
    mer = [[0] * (L + 1) for _ in range(C)]  # mer[k][j]: arc above row j
    for j in range(L):
        for k in range(C):
            lat[j][k] = len(edges)
            edges.append(((j, k), (j, (k + 1) % C)))
    for k in range(C):
        mer[k][0] = len(edges)
        edges.append(("N", (0, k)))
        for j in range(1, L):
            mer[k][j] = len(edges)
            edges.append(((j - 1, k), (j, k)))
        mer[k][L] = len(edges)
        edges.append(((L - 1, k), "S"))
    rot = {}
    for j in range(L):
        for k in range(C):
            east = 2 * lat[j][k]
            west = 2 * lat[j][(k - 1) % C] + 1
            north = 2 * mer[k][j] + 1
            south = 2 * mer[k][j + 1]
            rot[(j, k)] = [east, north, west, south]
    rot["N"] = [2 * mer[k][0] for k in range(C)]
    rot["S"] = [2 * mer[k][L] + 1 for k in reversed(range(C))]
    pos = {(j, k): _sph(thetas[j], k * math.pi / m) for j in range(L) for k in range(C)}
    pos["N"], pos["S"] = (0.0, 0.0, 1.0), (0.0, 0.0, -1.0)
    g = EmbeddedGraph(edges, rot, pos=pos)
    scale = ynm_scale(idx)
    vals = [abs(float(eval_ynm(idx, thetas[j], k * math.pi / m))) for j in range(L) for k in range(C)]
    vals += [abs(float(eval_ynm(idx, 0.0, 0.0))), abs(float(eval_ynm(idx, math.pi, 0.0)))]
    if max(vals) > 1e-12 * scale:
        raise HarmonicError("globe vertex off the zero set")
    return GlobeGraph(idx, thetas, g)


def pole_order(g: EmbeddedGraph, pole: str) -> list[int]:
    """Half-edges at a pole as e_1..e_2m: increasing longitude from phi = 0."""
    hs = list(g.rot[pole])
    return hs if pole == "N" else hs[::-1]


def resolve_poles(globe: GlobeGraph | EmbeddedGraph) -> EmbeddedGraph:
    g = globe.graph if isinstance(globe, GlobeGraph) else globe
    if "N" not in g.rot and "S" not in g.rot:
        raise HarmonicError("no poles left to resolve")
    pairs = {}
    for pole in ("N", "S"):
        order = pole_order(g, pole)
        if len(order) % 2:
            raise HarmonicError("pole of odd degree")
        for a, b in zip(order[0::2], order[1::2]):
            pairs[a], pairs[b] = b, a
    keep = [i for i, (a, b) in enumerate(g.edges) if a not in ("N", "S") and b not in ("N", "S")]
    new_edges = [g.edges[i] for i in keep]
    he_map = {}
    for new_i, old_i in enumerate(keep):
        he_map[2 * old_i] = 2 * new_i
        he_map[2 * old_i + 1] = 2 * new_i + 1
    done = set()
    for a, b in pairs.items():
        if a in done:
            continue
        done |= {a, b}
        # a, b leave the pole; their twins arrive at the crossings
        u, w = g.head(a), g.head(b)
        i = len(new_edges)
        new_edges.append((u, w))
        he_map[a ^ 1] = 2 * i
        he_map[b ^ 1] = 2 * i + 1
    rot = {v: [he_map[h] for h in hs] for v, hs in g.rot.items() if v not in ("N", "S")}
    pos = {v: p for v, p in g.pos.items() if v not in ("N", "S")}
    out = EmbeddedGraph(new_edges, rot, pos=pos)
    if any(len(hs) != 4 for hs in out.rot.values()):
        raise PlanarError("resolved globe graph is not 4-regular")
    return out


def grid_positions(globe: GlobeGraph, g: EmbeddedGraph) -> dict:
    """Planar (column, -row) positions for SVG output."""
    return {(j, k): (k, globe.rows - 1 - j) for (j, k) in g.rot}
