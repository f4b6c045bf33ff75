"""Simple blocks, their admissibility bookkeeping, and block decompositions
of the sphere cut along a configuration of ovals.

Each block carries an auxiliary profile f0 with values in [0, 1] and the
function f = 1 - (1 - f0)^2.  Boundary collars are standard cylinders of
width `eps` on which f is sin x (Dirichlet side) or cos x (Neumann side).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, special

from .ovals import OUTER, WHITE, OvalConfig, canonical_two_coloring

TWO_PI = 2.0 * math.pi


class BlockError(ValueError):
    pass


class BlockType(str, Enum):
    DISK = "Disk"
    CYLINDER = "Cylinder"
    PANTS = "Pants"


# --------------------------------------------------------------- model data

def _as_type(t) -> BlockType:
    try:
        return BlockType(t) if not isinstance(t, BlockType) else t
    except ValueError:
        raise BlockError(f"unknown block type {t!r}") from None


def block_f0(btype, point) -> float:
    """Auxiliary profile on the model domain.

    Disk: point is (x, y, z) on the closed upper hemisphere.
    Cylinder: point is (s, angle) with s in [0, 1].
    Pants: point is a complex number (or an (x, y) pair).
    """
    bt = _as_type(btype)
    tol = 1e-12
    if bt is BlockType.DISK:
        x, y, z = (float(c) for c in point)
        if abs(x * x + y * y + z * z - 1.0) > 1e-9 or z < -tol:
            raise BlockError(f"{point} is not on the closed upper hemisphere")
        return max(z, 0.0) / 2.0
    if bt is BlockType.CYLINDER:
        s = float(point[0])
        if not -tol <= s <= 1.0 + tol:
            raise BlockError(f"{point} is outside [0, 1] x S^1")
        return min(max(s, 0.0), 1.0)
    z = complex(point) if not isinstance(point, (tuple, list, np.ndarray)) else complex(*point)
    r = abs(z * z - 1.0)
    if not 0.5 - tol <= r <= 2.0 + tol:
        raise BlockError(f"{point} is outside the pair of pants |z^2-1| in [1/2, 2]")
    return min(max((2.0 - r) / 1.5, 0.0), 1.0)


def block_f(btype, point) -> float:
    f0 = block_f0(btype, point)
    return 1.0 - (1.0 - f0) ** 2


def _f_of_f0(f0):
    return 1.0 - (1.0 - f0) ** 2


def _f0_of_f(f):
    return 1.0 - math.sqrt(max(1.0 - f, 0.0))


# ------------------------------------------------------------ critical points

@dataclass(frozen=True)
class CriticalInfo:
    kind: str                      # "max" | "none" | "saddle"
    location: tuple | None
    hessian_eigs: tuple = ()


def _chart(bt: BlockType):
    """Planar chart for the interior: returns (f0 as a function of (u, v),
    inside-test, seeds for the search)."""
    if bt is BlockType.DISK:
        def g(u, v):
            return math.sqrt(max(1.0 - u * u - v * v, 0.0)) / 2.0
        return g, lambda u, v: u * u + v * v < 0.95 ** 2, [(0.3, -0.2), (-0.5, 0.4), (0.1, 0.6)]
    if bt is BlockType.CYLINDER:
        # (s, angle); the angle direction is periodic so a flat chart suffices
        return (lambda u, v: u), (lambda u, v: 0.05 < u < 0.95), [(0.3, 0.0), (0.6, 1.0)]

    def g(u, v):
        return (2.0 - abs(complex(u, v) ** 2 - 1.0)) / 1.5
    def inside(u, v):
        r = abs(complex(u, v) ** 2 - 1.0)
        return 0.55 < r < 1.95
    return g, inside, [(0.2, 0.1), (-0.15, -0.2), (0.0, 0.9), (1.2, 0.7)]


def _grad_hess(g, u, v, h=1e-4):
    gu = (g(u + h, v) - g(u - h, v)) / (2 * h)
    gv = (g(u, v + h) - g(u, v - h)) / (2 * h)
    guu = (g(u + h, v) - 2 * g(u, v) + g(u - h, v)) / h ** 2
    gvv = (g(u, v + h) - 2 * g(u, v) + g(u, v - h)) / h ** 2
    guv = (g(u + h, v + h) - g(u + h, v - h) - g(u - h, v + h) + g(u - h, v - h)) / (4 * h * h)
    return np.array([gu, gv]), np.array([[guu, guv], [guv, gvv]])


def classify_critical(btype) -> CriticalInfo:
    """Locate interior critical points of f0 by minimising |grad f0|^2 from
    a few seeds, then classify by finite-difference Hessian signs of f."""
    bt = _as_type(btype)
    g, inside, seeds = _chart(bt)
    found: list[np.ndarray] = []
    for s in seeds:
        res = optimize.minimize(lambda p: float(np.sum(_grad_hess(g, *p)[0] ** 2)),
                                np.array(s, float), method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": 4000})
        p = res.x
        if inside(*p) and res.fun < 1e-10 and not any(np.linalg.norm(p - q) < 1e-4 for q in found):
            found.append(p)
    if not found:
        return CriticalInfo("none", None)
    if len(found) > 1:
        raise BlockError(f"{bt.value}: expected at most one critical point, found {len(found)}")
    p = found[0]
    fg = lambda u, v: _f_of_f0(g(u, v))
    eig = np.linalg.eigvalsh(_grad_hess(fg, *p, h=1e-3)[1])
    if np.all(eig < 0):
        kind = "max"
    elif eig[0] < 0 < eig[1] and abs(eig[0] * eig[1]) > 1e-6:
        kind = "saddle"
    else:
        kind = "degenerate"
    loc = tuple(round(float(c), 6) + 0.0 for c in p)
    if bt is BlockType.DISK:
        loc = (loc[0], loc[1], round(math.sqrt(max(1 - p @ p, 0.0)), 6))
    return CriticalInfo(kind, loc, tuple(float(e) for e in eig))


# ------------------------------------------------------------------- flux

def flux_integral(u, gamma, mu=1.0) -> float:
    """Composite trapezoid rule for the integral of mu(u ^ gamma') along a
    polyline.  `u` holds vector samples at the vertices; a counterclockwise
    loop gives the outward flux."""
    u = np.asarray(u, float)
    gamma = np.asarray(gamma, float)
    if gamma.ndim != 2 or gamma.shape[1] != 2 or u.shape != gamma.shape:
        raise BlockError("u and gamma must both be (n, 2) arrays")
    mu = np.broadcast_to(np.asarray(mu, float), (len(gamma),))
    d = np.diff(gamma, axis=0)
    w0 = mu[:-1] * (u[:-1, 0] * d[:, 1] - u[:-1, 1] * d[:, 0])
    w1 = mu[1:] * (u[1:, 0] * d[:, 1] - u[1:, 1] * d[:, 0])
    return float(0.5 * np.sum(w0 + w1))


# ---------------------------------------------------------- admissibility

def _pants_area_density_r(r: float) -> float:
    # Area of {|z^2-1| in [r, r+dr]} per dr, both sheets of z -> z^2 - 1.
    # complementary parameter 1 - 4r/(1+r)^2, formed without cancellation
    m1 = ((1.0 - r) / (1.0 + r)) ** 2
    return 2.0 * r * special.ellipkm1(m1) / (1.0 + r)


@dataclass
class BlockModel:
    """Level-set bookkeeping of one simple block.

    Everything is expressed through the level value l of f: collars take
    l in [0, sin eps) (Dirichlet) and (cos eps, 1] (Neumann); the rest of
    the block carries kappa times the model area element, with kappa fixed
    by requiring the total f-mass to equal minus the boundary flux, 2 pi.
    """
    btype: BlockType
    eps: float = 0.1
    u0_radius: float | None = None
    kappa: float = field(init=False)

    def __post_init__(self):
        self.btype = _as_type(self.btype)
        self.l_dir = math.sin(self.eps)
        self.l_top = 0.75 if self.btype is BlockType.DISK else 1.0
        self.l_neu = math.cos(self.eps) if self.btype is not BlockType.DISK else self.l_top
        self.n_neumann = {BlockType.DISK: 0, BlockType.CYLINDER: 1, BlockType.PANTS: 2}[self.btype]
        inner = self._interior_mass(self.l_dir, self.l_neu)
        collars = TWO_PI * (1 - math.cos(self.eps)) + self.n_neumann * TWO_PI * math.sin(self.eps)
        if inner <= 0 or collars >= TWO_PI:
            raise BlockError("collars too wide for the required total mass")
        self.kappa = (TWO_PI - collars) / inner
        if self.btype is BlockType.DISK:
            self.l_u0 = self.l_top - 0.05        # max neighbourhood f^-1((l_u0, 3/4])
        if self.btype is BlockType.PANTS:
            self.saddle_level = _f_of_f0(2.0 / 3.0)
            self._shrink_u0()

    # area element of the model in terms of the level value
    def _area_per_level(self, l: float) -> float:
        f0 = _f0_of_f(l)
        df0_dl = 0.5 / max(math.sqrt(max(1.0 - l, 0.0)), 1e-300)
        if self.btype is BlockType.DISK:
            return 4.0 * math.pi * df0_dl          # dA = 2 pi dz, z = 2 f0
        if self.btype is BlockType.CYLINDER:
            return TWO_PI * df0_dl
        r = 2.0 - 1.5 * f0
        return _pants_area_density_r(r) * 1.5 * df0_dl

    def _interior_mass(self, lo: float, hi: float, branch_fraction: float = 1.0) -> float:
        if hi <= lo:
            return 0.0
        if self.btype is BlockType.PANTS:
            # integrate in r = |z^2 - 1|; the density has a log singularity at r = 1
            r_of = lambda l: 2.0 - 1.5 * _f0_of_f(l)
            r1, r0 = r_of(lo), r_of(hi)
            g = lambda r: _f_of_f0((2.0 - r) / 1.5) * _pants_area_density_r(r)
            pts = [1.0] if r0 < 1.0 < r1 else None
            with warnings.catch_warnings():
                # an endpoint sitting exactly on r = 1 trips the extrapolation check
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, _ = integrate.quad(g, r0, r1, points=pts, limit=400, epsabs=1e-13, epsrel=1e-12)
        else:
            val, _ = integrate.quad(lambda l: l * self._area_per_level(l), lo, hi,
                                    limit=400, epsabs=1e-13, epsrel=1e-12)
        return branch_fraction * val

    # f-mass of {f < l}, optionally restricted to one upper branch (pants)
    def mass_below(self, l: float) -> float:
        l = min(max(l, 0.0), self.l_top)
        m = TWO_PI * (1.0 - math.cos(math.asin(min(l, self.l_dir))))
        k = getattr(self, "kappa", 1.0)
        m += k * self._interior_mass(self.l_dir, min(l, self.l_neu))
        if l > self.l_neu:
            m += self.n_neumann * TWO_PI * (math.sin(self.eps) - math.sin(math.acos(l)))
        return m

    def branch_mass(self, lo: float, hi: float) -> float:
        """f-mass of one upper branch of the pants between levels lo < hi
        (both at or above the saddle level)."""
        lo, hi = max(lo, self.saddle_level), min(hi, 1.0)
        if hi <= lo:
            return 0.0
        m = self.kappa * self._interior_mass(lo, min(hi, self.l_neu), 0.5)
        if hi > self.l_neu:
            m += TWO_PI * (math.sin(math.acos(max(lo, self.l_neu))) - math.sin(math.acos(hi)))
        return m

    @property
    def total_mass(self) -> float:
        return self.mass_below(self.l_top)

    # outward flux of grad f across the level curve {f = l} when it lies in U
    def _collar_flux(self, l: float) -> float | None:
        if l < self.l_dir:
            return TWO_PI * math.cos(math.asin(l))
        if l > self.l_neu and self.btype is not BlockType.DISK:
            return self.n_neumann * TWO_PI * math.sin(math.acos(l))
        return None

    # pants saddle neighbourhood
    def _path_bound(self, delta: float) -> float:
        """mu(U0) sup|f| + L(dU0) sup|df| for U0 = {|z| < delta} in the
        model plane (the product L |df| is conformally invariant)."""
        g = lambda u, v: _f_of_f0((2.0 - abs(complex(u, v) ** 2 - 1.0)) / 1.5)
        th = np.linspace(0, TWO_PI, 64, endpoint=False)
        rs = np.linspace(0, delta, 9)
        sup_f = max(g(r * math.cos(t), r * math.sin(t)) for r in rs for t in th)
        sup_df = max(np.linalg.norm(_grad_hess(g, r * math.cos(t), r * math.sin(t), 1e-6)[0])
                     for r in rs[1:] for t in th)
        return self.kappa * math.pi * delta ** 2 * sup_f + TWO_PI * delta * sup_df

    def _shrink_u0(self):
        delta = self.u0_radius or 0.2
        while True:
            # b(U0) = sup f on the disc; smallest W mass above it
            self.b_u0 = _f_of_f0((2.0 - (1.0 - delta * delta)) / 1.5)
            wmin = self.branch_mass(self.b_u0, 1.0)
            self.u0_bound = self._path_bound(delta)
            if self.u0_radius is not None or self.u0_bound < 0.5 * wmin:
                break
            delta /= 2
        self.u0_radius = delta
        self.w_min = wmin

    # S for the two families of approximate down-sets
    def s_sublevel(self, a: float) -> tuple[float, bool]:
        """S({f < a}) and whether this is an equality case.  For the pants,
        level curves meeting U0 contribute at most the path bound, and the
        returned value is that upper bound."""
        a = min(max(a, 0.0), self.l_top)
        if a <= 0.0:
            return 0.0, True
        m = self.mass_below(a)
        if a >= self.l_top:
            return m - TWO_PI, True
        flux = self._collar_flux(a)
        if flux is not None:
            return m - TWO_PI + flux, True
        if self.btype is BlockType.DISK and a > self.l_u0:
            # eigenfunction identity inside the max neighbourhood
            return m - TWO_PI + (self.total_mass - m), True
        if self.btype is BlockType.PANTS and abs(a - self.saddle_level) < self.b_u0 - self.saddle_level + 1e-15:
            return m - TWO_PI + self.u0_bound, False
        return m - TWO_PI, False

    def s_branches(self, a1: float, a2: float) -> tuple[float, bool]:
        """Pants only: R = {f < b(U0)} plus the part of upper branch i below
        a_i, for a_i in [b(U0), 1]."""
        if self.btype is not BlockType.PANTS:
            raise BlockError("branch variants exist only for the pants block")
        base = self.mass_below(self.b_u0)
        s = base - TWO_PI
        equal = True
        for a in (a1, a2):
            a = min(max(a, self.b_u0), 1.0)
            s += self.branch_mass(self.b_u0, a)
            if a >= 1.0:
                continue
            if a > self.l_neu:
                s += TWO_PI * math.sin(math.acos(a))
            else:
                equal = False
        return s, equal


@dataclass
class SweepReport:
    btype: str
    kappa: float
    strict_max: float           # largest S over strict samples (should be < 0)
    equality_max_abs: float     # largest |S| over equality samples
    n_strict: int
    n_equal: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("btype", "kappa", "strict_max", "equality_max_abs", "n_strict", "n_equal", "violations")}


def admissibility_sweep(btype, samples: int = 50, seed: int = 0, eps: float = 0.1,
                        strict_tol: float = 1e-6, equal_tol: float = 1e-6) -> SweepReport:
    """Evaluate S on `samples` strict and `samples` equality down-sets."""
    model = BlockModel(_as_type(btype), eps)
    rng = np.random.default_rng(seed)
    strict, equal = [], []
    lo, hi = model.l_dir, (model.l_u0 if model.btype is BlockType.DISK else model.l_neu)
    for a in rng.uniform(lo, hi, samples):
        if model.btype is BlockType.PANTS and rng.random() < 0.5:
            a1 = rng.uniform(model.b_u0, 1.0)
            a2 = rng.uniform(model.b_u0, model.l_neu)
            strict.append((("branches", float(a1), float(a2)), *model.s_branches(a1, a2)))
        else:
            strict.append((("sublevel", float(a)), *model.s_sublevel(a)))
    for i in range(samples):
        kind = i % 3
        if kind == 0:
            a = rng.uniform(0, model.l_dir)
            equal.append((("sublevel", float(a)), *model.s_sublevel(a)))
        elif kind == 1 and model.btype is not BlockType.DISK:
            a = rng.uniform(model.l_neu, 1.0)
            if model.btype is BlockType.PANTS:
                b = rng.uniform(model.l_neu, 1.0)
                equal.append((("branches", float(a), float(b)), *model.s_branches(a, b)))
            else:
                equal.append((("sublevel", float(a)), *model.s_sublevel(a)))
        elif kind == 1:
            a = rng.uniform(model.l_u0, model.l_top)
            equal.append((("sublevel", float(a)), *model.s_sublevel(a)))
        else:
            equal.append((("full",), *model.s_sublevel(model.l_top)))
    viol = []
    for spec, s, eq in strict:
        if eq or not s <= -strict_tol:
            viol.append({"set": spec, "S": s, "expected": "strict"})
    for spec, s, eq in equal:
        if not eq or abs(s) > equal_tol:
            viol.append({"set": spec, "S": s, "expected": "equality"})
    return SweepReport(model.btype.value, model.kappa,
                       max(s for _, s, _ in strict), max(abs(s) for _, s, _ in equal),
                       len(strict), len(equal), viol)


# ---------------------------------------------------------- decomposition

@dataclass(frozen=True)
class Block:
    id: int
    btype: BlockType
    region: str               # "outer" or the label of the oval bounding it from outside
    dirichlet: str            # oval label of its Dirichlet boundary
    neumann: tuple = ()       # ids of split loops on its Neumann boundaries


@dataclass
class BlockDecomposition:
    blocks: list
    dirichlet_pairs: list     # (block, block, oval)
    neumann_pairs: list       # (block, block, loop id)
    signs: dict               # block id -> +1 / -1

    def counts(self) -> dict:
        out = {t.value: 0 for t in BlockType}
        for b in self.blocks:
            out[b.btype.value] += 1
        return out

    def check(self) -> list:
        """Verify the gluing sign rule and the structural invariants; returns
        a list of problems (empty when consistent)."""
        bad = []
        for i, j, lab in self.dirichlet_pairs:
            if self.signs[i] != -self.signs[j]:
                bad.append(f"Dirichlet pair {i},{j} on {lab} has equal signs")
        for i, j, loop in self.neumann_pairs:
            if self.signs[i] != self.signs[j]:
                bad.append(f"Neumann pair {i},{j} on loop {loop} has opposite signs")
        want = {BlockType.DISK: 0, BlockType.CYLINDER: 1, BlockType.PANTS: 2}
        for b in self.blocks:
            if len(b.neumann) != want[b.btype]:
                bad.append(f"block {b.id} has {len(b.neumann)} Neumann ends")
        ovals = [lab for _, _, lab in self.dirichlet_pairs]
        if len(set(ovals)) != len(ovals):
            bad.append("an oval carries more than one Dirichlet gluing")
        return bad

    def to_json(self) -> str:
        doc = {
            "format": 1,
            "blocks": [{"id": b.id, "type": b.btype.value, "region": b.region,
                        "dirichlet": b.dirichlet, "neumann": list(b.neumann)} for b in self.blocks],
            "gluing": {"dirichlet": [list(p) for p in self.dirichlet_pairs],
                       "neumann": [list(p) for p in self.neumann_pairs]},
            "signs": {str(k): v for k, v in sorted(self.signs.items())},
            "counts": self.counts(),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_svg(self) -> str:
        """Schematic: one row per region, blocks as labelled boxes."""
        rows: dict[str, list] = {}
        for b in self.blocks:
            rows.setdefault(b.region, []).append(b)
        w = 90 * max((len(r) for r in rows.values()), default=1) + 40
        h = 70 * max(len(rows), 1) + 40
        pos = {}
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-size="11">']
        for ri, (reg, bl) in enumerate(rows.items()):
            y = 30 + 70 * ri
            parts.append(f'<text x="4" y="{y - 6}">{reg}</text>')
            for bi, b in enumerate(bl):
                x = 30 + 90 * bi
                pos[b.id] = (x + 35, y + 15)
                fill = "#ddd" if self.signs[b.id] > 0 else "#777"
                parts.append(f'<rect x="{x}" y="{y}" width="70" height="30" fill="{fill}" stroke="black"/>')
                parts.append(f'<text x="{x + 4}" y="{y + 19}">{b.id}:{b.btype.value}</text>')
        for i, j, _ in self.dirichlet_pairs:
            (x1, y1), (x2, y2) = pos[i], pos[j]
            parts.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="blue"/>')
        for i, j, _ in self.neumann_pairs:
            (x1, y1), (x2, y2) = pos[i], pos[j]
            parts.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="red" stroke-dasharray="4 2"/>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def _region_holes(cfg: OvalConfig, region) -> list[str]:
    adj = cfg.region_tree()
    own = [] if region is OUTER else [region]
    kids = sorted(str(r) for r in adj[region] if r is not OUTER and cfg.parent(r) == region) \
        if region is not OUTER else sorted(o.label for o in cfg.roots)
    return own + kids


def decompose(cfg: OvalConfig) -> BlockDecomposition:
    """Cut the sphere along every oval and split each complementary region
    (a sphere with k holes, all Dirichlet) into k simple blocks."""
    if len(cfg) == 0:
        raise BlockError("at least one oval is required")
    blocks: list[Block] = []
    neumann_pairs: list = []
    loop_counter = [0]
    # pending Neumann ends: loop id -> block ids
    loop_ends: dict[int, list[int]] = {}

    def split(region_name: str, holes: Sequence[str], neumann: Sequence[int]):
        if len(holes) == 1:
            bt = [BlockType.DISK, BlockType.CYLINDER, BlockType.PANTS][len(neumann)]
            bid = len(blocks)
            blocks.append(Block(bid, bt, region_name, holes[0], tuple(neumann)))
            for loop in neumann:
                loop_ends.setdefault(loop, []).append(bid)
            return
        half = (len(holes) + 1) // 2
        left, right = list(holes[:half]), list(holes[half:])
        loop = loop_counter[0]
        loop_counter[0] += 1
        nl = list(neumann[:1]) if len(neumann) <= 1 else [neumann[0]]
        nr = [] if len(neumann) <= 1 else [neumann[1]]
        split(region_name, left, nl + [loop])
        split(region_name, right, nr + [loop])

    regions = [OUTER] + cfg.labels
    for reg in regions:
        split("outer" if reg is OUTER else reg, _region_holes(cfg, reg), [])
    for loop, ends in sorted(loop_ends.items()):
        if len(ends) != 2:
            raise BlockError(f"split loop {loop} has {len(ends)} ends")
        neumann_pairs.append((ends[0], ends[1], loop))

    by_oval: dict[str, list[int]] = {}
    for b in blocks:
        by_oval.setdefault(b.dirichlet, []).append(b.id)
    dirichlet_pairs = []
    for lab in cfg.labels:
        ends = by_oval.get(lab, [])
        if len(ends) != 2:
            raise BlockError(f"oval {lab} has {len(ends)} Dirichlet sides")
        dirichlet_pairs.append((ends[0], ends[1], lab))

    # signs: propagate the gluing rule from block 0 (breadth first)
    nbr: dict[int, list] = {b.id: [] for b in blocks}
    for i, j, _ in dirichlet_pairs:
        nbr[i].append((j, -1))
        nbr[j].append((i, -1))
    for i, j, _ in neumann_pairs:
        nbr[i].append((j, 1))
        nbr[j].append((i, 1))
    signs = {0: 1}
    queue = [0]
    while queue:
        i = queue.pop(0)
        for j, rel in nbr[i]:
            want = rel * signs[i]
            if j not in signs:
                signs[j] = want
                queue.append(j)
            elif signs[j] != want:
                raise BlockError("inconsistent sign constraints")
    if len(signs) != len(blocks):
        raise BlockError("block gluing graph is disconnected")
    # agree with the canonical region colouring (outer region positive)
    colors = canonical_two_coloring(cfg, WHITE)
    for b in blocks:
        reg = OUTER if b.region == "outer" else b.region
        if (colors[reg] == WHITE) != (signs[b.id] == signs[0]):
            raise BlockError("signs disagree with the region colouring")
    dec = BlockDecomposition(blocks, dirichlet_pairs, neumann_pairs, signs)
    problems = dec.check()
    if problems:
        raise BlockError("; ".join(problems))
    return dec
