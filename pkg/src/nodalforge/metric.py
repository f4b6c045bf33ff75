"""Perturbed eigenfunctions and compatible metrics on a latitude-longitude grid.

Fields are plain numpy arrays of shape (ntheta, nphi) for scalars,
(ntheta, nphi, 2) for coordinate vector components (d/dtheta, d/dphi) and
(ntheta, nphi, 2, 2) for metrics in the (theta, phi) chart.

The divergence problem for u0 is solved in closed form: every source term is
a radial profile around a critical point, and the sphere Green function of a
radial profile is an explicit one-dimensional integral.  Away from the
profile's support its gradient is the point-charge field, which has an exact
harmonic conjugate in a stereographic chart.  That conjugate is what cuts u0
down to zero on the small caps around critical points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage, optimize, spatial

from . import harmonics as hm
from .harmonics import HarmonicIndex
from .ovals import OvalConfig, OvalError, config_from_region_tree


class MetricError(ValueError):
    pass


# --------------------------------------------------------------------- grid

@dataclass(frozen=True)
class LatLonGrid:
    nphi: int
    ntheta: int

    def __post_init__(self):
        if self.nphi % 2 or self.nphi < 4 or self.ntheta < 4:
            raise MetricError("need even nphi >= 4 and ntheta >= 4")

    @classmethod
    def parse(cls, text: str) -> "LatLonGrid":
        """'1024x512' -> nphi=1024, ntheta=512."""
        try:
            w, h = (int(v) for v in text.lower().split("x"))
        except ValueError as exc:
            raise MetricError(f"bad grid {text!r}, expected WxH") from exc
        return cls(w, h)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ntheta, self.nphi)

    @property
    def dtheta(self) -> float:
        return math.pi / self.ntheta

    @property
    def dphi(self) -> float:
        return 2 * math.pi / self.nphi

    @property
    def theta(self) -> np.ndarray:
        return (np.arange(self.ntheta) + 0.5) * self.dtheta

    @property
    def phi(self) -> np.ndarray:
        return np.arange(self.nphi) * self.dphi

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    @property
    def theta_weights(self) -> np.ndarray:
        """Fejer's first rule in x = cos(theta); integrates sin(theta) dtheta."""
        n = self.ntheta
        th = self.theta
        k = np.arange(1, n // 2 + 1)
        s = np.cos(2 * np.outer(th, k)) / (4 * k ** 2 - 1)
        return (2.0 / n) * (1 - 2 * s.sum(axis=1))

    @property
    def weights(self) -> np.ndarray:
        return np.repeat(self.theta_weights[:, None] * self.dphi, self.nphi, axis=1)

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights * f))

    def points(self) -> np.ndarray:
        th, ph = self.mesh()
        return sph_to_xyz(th, ph)


def sph_to_xyz(theta, phi) -> np.ndarray:
    theta, phi = np.asarray(theta, float), np.asarray(phi, float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def _frames(theta, phi):
    """Unit vectors e_theta and e_phi."""
    ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
    e_t = np.stack([ct * cp, ct * sp, -st], axis=-1)
    e_p = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return e_t, e_p


def round_metric(grid: LatLonGrid) -> np.ndarray:
    g = np.zeros(grid.shape + (2, 2))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = np.sin(grid.theta)[:, None] ** 2
    return g


# ----------------------------------------------------------- pointwise metric

def metric_from_gradient(u, v, density=1.0) -> np.ndarray:
    """The symmetric g with det g = density**2 and g u = density * v.

    Vectorized over leading axes.  Raises if <u, v> <= 0 anywhere.
    """
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    dens = np.asarray(density, float)
    if u.shape[-1] != 2 or v.shape != u.shape:
        raise MetricError("u and v must be matching arrays of 2-vectors")
    dot = u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]
    if np.any(~(dot > 0)):
        raise MetricError("<u, v> must be positive")
    if np.any(~(dens > 0)):
        raise MetricError("area density must be positive")
    # columns v and Ju, J u = (u2, -u1)
    a, b = v[..., 0], v[..., 1]
    c, d = u[..., 1], -u[..., 0]
    out = np.empty(u.shape + (2,))
    scale = dens / dot
    out[..., 0, 0] = scale * (a * a + c * c)
    out[..., 0, 1] = scale * (a * b + c * d)
    out[..., 1, 0] = out[..., 0, 1]
    out[..., 1, 1] = scale * (b * b + d * d)
    return out


# ----------------------------------------------------------- critical points

@dataclass(frozen=True)
class CriticalPoint:
    kind: str  # "crossing", "pole", "extremum"
    key: object  # (j, k) for crossings, "N"/"S" for poles, (band, l) for extrema
    theta: float
    phi: float

    @property
    def xyz(self) -> np.ndarray:
        return sph_to_xyz(self.theta, self.phi)


def _profile_prime(idx: HarmonicIndex, theta):
    return hm.ynm_gradient(idx, theta, math.pi / (2 * idx.m))[0]


def critical_zeros_and_extrema(idx: HarmonicIndex) -> tuple[list[CriticalPoint], list[CriticalPoint]]:
    n, m = idx.n, idx.m
    zeros = sorted(math.acos(max(-1.0, min(1.0, r))) for r in hm.f_nm_roots(n, m))
    s1 = [CriticalPoint("pole", "N", 0.0, 0.0), CriticalPoint("pole", "S", math.pi, 0.0)]
    for j, th in enumerate(zeros):
        for k in range(2 * m):
            s1.append(CriticalPoint("crossing", (j, k), th, k * math.pi / m))
    scale = hm.ynm_scale(idx)
    ends = [0.0] + zeros + [math.pi]
    s2 = []
    for band, (lo, hi) in enumerate(zip(ends[:-1], ends[1:])):
        xs = np.linspace(lo, hi, 64)[1:-1]
        gp = _profile_prime(idx, xs)
        flips = np.nonzero(np.sign(gp[:-1]) != np.sign(gp[1:]))[0]
        if len(flips) != 1:
            raise MetricError(f"expected one extremum in band {band}, cell ({lo:.4f}, {hi:.4f})")
        i = flips[0]
        th = optimize.brentq(lambda x: float(_profile_prime(idx, x)), xs[i], xs[i + 1], xtol=1e-15)
        for l in range(2 * m):
            ph = (2 * l + 1) * math.pi / (2 * m)
            gt, gph = hm.ynm_gradient(idx, th, ph)
            if math.hypot(float(gt), float(gph) / math.sin(th)) > 1e-8 * scale * max(1, n):
                raise MetricError(f"refinement did not converge in band {band}, sector {l}")
            s2.append(CriticalPoint("extremum", (band, l), th, ph))
    return s1, s2


def cap_radius(points: Sequence[CriticalPoint]) -> float:
    """One third of the minimal pairwise geodesic distance."""
    xyz = np.array([p.xyz for p in points])
    tree = spatial.cKDTree(xyz)
    d, _ = tree.query(xyz, k=2)
    chord = float(d[:, 1].min())
    return 2 * math.asin(min(1.0, chord / 2)) / 3


# ------------------------------------------------------------- radial tools

def _h(x):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def smooth_step(tau, deriv: int = 0):
    """C-infinity step: 0 for tau <= 0, 1 for tau >= 1, plus two derivatives."""
    t = np.clip(np.asarray(tau, float), 0.0, 1.0)
    inside = (t > 0) & (t < 1)
    ti = np.where(inside, t, 0.5)
    A, B = _h(ti), _h(1 - ti)
    Ap = A / ti ** 2
    App = A * (1 - 2 * ti) / ti ** 4
    s = 1 - ti
    Bp = -B / s ** 2
    Bpp = B * (1 - 2 * s) / s ** 4
    D = A + B
    if deriv == 0:
        return np.where(t >= 1, 1.0, np.where(inside, A / D, 0.0))
    N1 = Ap * B - A * Bp
    if deriv == 1:
        return np.where(inside, N1 / D ** 2, 0.0)
    Dp = Ap + Bp
    val = (App * B - A * Bpp) / D ** 2 - 2 * N1 * Dp / D ** 3
    return np.where(inside, val, 0.0)


@dataclass(frozen=True)
class Cutoff:
    """Radial cutoff equal to 1 on [0, inner] and 0 beyond outer."""
    inner: float
    outer: float

    def __call__(self, r, deriv: int = 0):
        w = self.outer - self.inner
        tau = (self.outer - np.asarray(r, float)) / w
        return smooth_step(tau, deriv) * (-1.0 / w) ** deriv


class RadialIntegral:
    """r -> int_0^r g(s) sin(s) ds for a profile g on [lo, hi], given the
    closed-form value at lo; constant beyond hi."""

    def __init__(self, g, lo: float, hi: float, value_at_lo: float, panels: int = 400, order: int = 10):
        self.g, self.lo, self.hi = g, lo, hi
        self.edges = np.linspace(lo, hi, panels + 1)
        self.xi, self.wi = np.polynomial.legendre.leggauss(order)
        cum = [value_at_lo]
        for a, b in zip(self.edges[:-1], self.edges[1:]):
            cum.append(cum[-1] + self._gl(a, np.array([b]))[0])
        self.cum = np.array(cum)

    def _gl(self, a, b):
        b = np.asarray(b, float)
        half = 0.5 * (b - a)
        s = a + half[..., None] * (self.xi + 1)
        return half * np.sum(self.wi * self.g(s) * np.sin(s), axis=-1)

    @property
    def total(self) -> float:
        return float(self.cum[-1])

    def __call__(self, r):
        r = np.clip(np.asarray(r, float), self.lo, self.hi)
        i = np.clip(np.searchsorted(self.edges, r, side="right") - 1, 0, len(self.edges) - 2)
        a = self.edges[i]
        return self.cum[i] + self._gl_vec(a, r)

    def _gl_vec(self, a, r):
        half = 0.5 * (r - a)
        s = a[..., None] + half[..., None] * (self.xi + 1)
        return half * np.sum(self.wi * self.g(s) * np.sin(s), axis=-1)


class ZeroMassCutoff:
    """eta * (1 + c - c*eta): equal to 1 on [0, inner], 0 beyond outer, with
    c fixed so that the profile times `weight` has vanishing integral."""

    def __init__(self, cut: Cutoff, weight, head: float):
        # head = int_0^inner weight(s) sin(s) ds, known in closed form
        self.cut = cut
        a, b = cut.inner, cut.outer
        num = RadialIntegral(lambda s: cut(s) * weight(s), a, b, 0.0).total
        den = RadialIntegral(lambda s: cut(s) * (1 - cut(s)) * weight(s), a, b, 0.0).total
        self.c = -(head + num) / den

    def __call__(self, r, deriv: int = 0):
        c = self.c
        e0 = self.cut(r)
        if deriv == 0:
            return e0 * (1 + c - c * e0)
        e1 = self.cut(r, 1)
        if deriv == 1:
            return e1 * (1 + c - 2 * c * e0)
        e2 = self.cut(r, 2)
        return e2 * (1 + c - 2 * c * e0) - 2 * c * e1 * e1


class ZonalBump:
    """phi(r) = eta~(r) P_N(cos r) with zero integral over the sphere, and the
    companion source tau = phi + Lap(phi)/lam."""

    def __init__(self, degree: int, cut: Cutoff):
        self.N = degree
        self.lam = hm.eigenvalue(degree)
        a, b = cut.inner, cut.outer
        N = degree
        # int_0^a P_N(cos s) sin s ds = (P_{N-1} - P_{N+1})(cos a)/(2N+1)
        head = float(hm.legendre_p(N - 1, math.cos(a)) - hm.legendre_p(N + 1, math.cos(a))) / (2 * N + 1)
        if np.any(self.Z(np.linspace(0, b, 257)) <= 0):
            raise MetricError("zonal harmonic changes sign inside V_p; caps too large for this degree")
        self.cut = ZeroMassCutoff(cut, self.Z, head)
        self.inner, self.outer = a, b
        self.J = RadialIntegral(lambda s: self.value(s), a, b, head)
        self.mass = 2 * math.pi * self.J.total

    def Z(self, r, deriv: int = 0):
        r = np.asarray(r, float)
        c = np.cos(r)
        if deriv == 0:
            return hm.legendre_p(self.N, c)
        if deriv == 1:
            return -np.sin(r) * hm.dm_legendre(self.N, 1, c)
        # Z'' = -cot r Z' - lam Z
        return c * hm.dm_legendre(self.N, 1, c) - self.lam * hm.legendre_p(self.N, c)

    def value(self, r):
        return self.cut(r) * self.Z(r)

    def dvalue(self, r):
        return self.cut(r, 1) * self.Z(r) + self.cut(r) * self.Z(r, 1)

    def tau(self, r):
        r = np.asarray(r, float)
        e1, e2 = self.cut(r, 1), self.cut(r, 2)
        sr = np.where(r > 1e-12, np.sin(r), 1.0)
        lap_eta = e2 + np.where(r > 1e-12, np.cos(r) / sr * e1, 0.0)
        return (self.Z(r) * lap_eta + 2 * e1 * self.Z(r, 1)) / self.lam

    def tau_integral(self, r):
        """int_0^r tau(s) sin s ds; vanishes outside the annulus."""
        r = np.asarray(r, float)
        ann = (r > self.inner) & (r < self.outer)
        rr = np.where(ann, r, 0.5 * (self.inner + self.outer))
        out = self.J(rr) + np.sin(rr) * self.dvalue(rr) / self.lam
        return np.where(ann, out, 0.0)

    def field_coeff(self, r):
        """Phi'(r)/sin(r) for the potential with Lap Phi = tau."""
        r = np.asarray(r, float)
        s = np.sin(r)
        return np.where((r > self.inner) & (r < self.outer), self.tau_integral(r) / np.where(s > 0, s * s, 1.0), 0.0)


def build_bumps(centers: Sequence[CriticalPoint], rho: float, degree: int):
    """Shared radial profiles for the caps U_p (radius rho) and V_p (2 rho).

    Returns the zonal bump and the cap cutoff that psi is built from.
    """
    xyz = np.array([p.xyz for p in centers])
    if len(xyz) > 1:
        d, _ = spatial.cKDTree(xyz).query(xyz, k=2)
        # each V_p must miss every other U_q
        if 2 * math.asin(min(1.0, d[:, 1].min() / 2)) < 3 * rho - 1e-12:
            raise MetricError("cap V_p meets a neighbouring U_q")
    cut = Cutoff(rho, 2 * rho)
    return ZonalBump(degree, cut), cut


# ----------------------------------------------------------------- signs

def crossing_sign(idx: HarmonicIndex, j: int, k: int, theta: float, pairing: int) -> int:
    """+1 when lifting f at the crossing realizes the given pairing.

    Rotation at a crossing is (east, north, west, south); pairing 0 joins
    east-north and west-south, so it cuts off the NE and SW quadrants, which
    must then have the sign opposite to the lift.
    """
    ne = -np.sign(float(_profile_prime(idx, theta))) * (1 if k % 2 == 0 else -1)
    if ne == 0:
        raise MetricError("degenerate crossing")
    return int(-ne if pairing == 0 else ne)


def pole_sign(idx: HarmonicIndex, pole: str) -> int:
    """The fixed pole pairing cuts off the sector 0 < phi < pi/m."""
    x = 1.0 if pole == "N" else -1.0
    return -int(np.sign(float(hm.dm_legendre(idx.n, idx.m, x))))


def sign_assignment(idx: HarmonicIndex, pairings: dict,
                    s1: Sequence[CriticalPoint] | None = None) -> dict:
    """Signs s(p) on S1 from a pairing assignment keyed by crossing (j, k)."""
    if s1 is None:
        s1, _ = critical_zeros_and_extrema(idx)
    out = {}
    for p in s1:
        if p.kind == "pole":
            out[p.key] = pole_sign(idx, p.key)
        else:
            if p.key not in pairings:
                raise MetricError(f"no pairing at crossing {p.key}")
            out[p.key] = crossing_sign(idx, p.key[0], p.key[1], p.theta, pairings[p.key])
    return out


def compute_ms(s_amp: np.ndarray, bump_mass: float, psi_mass: float) -> float:
    """m_s = -(sum s(p) int phi_p) / int psi."""
    if psi_mass <= 0:
        raise MetricError("int psi must be positive")
    return -float(np.sum(s_amp)) * bump_mass / psi_mass


# ------------------------------------------------------------ the model

def _tangent_to_coords(vec3, theta, phi):
    e_t, e_p = _frames(theta, phi)
    return np.stack([np.sum(vec3 * e_t, -1), np.sum(vec3 * e_p, -1) / np.sin(theta)], axis=-1)


def _grad_coords(vec3, theta, phi):
    """Coordinate covector (d/dtheta, d/dphi) of a function with 3D gradient vec3."""
    e_t, e_p = _frames(theta, phi)
    return np.stack([np.sum(vec3 * e_t, -1), np.sum(vec3 * e_p, -1) * np.sin(theta)], axis=-1)


@dataclass
class Evaluation:
    """Pointwise data of the construction at a set of sample points."""
    theta: np.ndarray
    phi: np.ndarray
    f: np.ndarray
    df: np.ndarray  # covector components of df
    P: np.ndarray  # perturbation, f_t = f + t P
    dP: np.ndarray
    u0: np.ndarray  # vector components
    u: np.ndarray  # -lam u0 + sum s grad phi_p
    round_mask: np.ndarray  # inside some cap U_p, where g_t is round


class PerturbationModel:
    """f = Y/max|Y| with the bumps, psi, m_s and the closed-form u0.

    Every quantity is evaluable at arbitrary points, so grids of different
    resolution sample the same continuum objects.
    """

    def __init__(self, idx: HarmonicIndex, signs: dict | None = None, cap: float | None = None):
        self.idx = idx
        self.lam = hm.eigenvalue(idx.n)
        self.scale = hm.ynm_scale(idx)
        self.s1, self.s2 = critical_zeros_and_extrema(idx)
        self.centers = self.s1 + self.s2
        self.rho = cap if cap is not None else cap_radius(self.centers)
        self.bump, self.cut = build_bumps(self.centers, self.rho, idx.n)
        self.xyz = np.array([p.xyz for p in self.centers])
        self.signs = dict(signs or {})
        self.amp = np.array([self._amplitude(p) for p in self.centers])
        self.s = np.array([self.signs.get(p.key, 0) if p.kind != "extremum" else 0 for p in self.centers], float)
        self.sa = self.s * self.amp
        self.ms = 0.0
        numer = float(np.sum(self.sa)) * self.bump.mass
        if abs(numer) > 1e-13 * max(1.0, float(np.abs(self.sa).sum())):
            self.ms = compute_ms(self.sa, self.bump.mass, self.psi_mass())
        self._tree = spatial.cKDTree(self.xyz)

    def _amplitude(self, p: CriticalPoint) -> float:
        """Size of f at distance rho from p, so the bump competes locally."""
        if p.kind == "extremum":
            return 0.0
        n, m = self.idx.n, self.idx.m
        if p.kind == "pole":
            x = 1.0 if p.key == "N" else -1.0
            c = abs(float(hm.dm_legendre(n, m, x))) / self.scale
            return c * self.rho ** m
        kappa = abs(float(_profile_prime(self.idx, p.theta))) * m / math.sin(p.theta) / self.scale
        return kappa * self.rho ** 2

    def _near(self, x: np.ndarray):
        chord = 2 * math.sin(self.cut.outer / 2)
        return self._tree.query_ball_tree(spatial.cKDTree(x), chord)

    def evaluate(self, theta, phi) -> Evaluation:
        theta = np.asarray(theta, float)
        phi = np.asarray(phi, float)
        shape = theta.shape
        th, ph = theta.ravel(), phi.ravel()
        x = sph_to_xyz(th, ph)
        n_pts = len(x)
        f = hm.eval_ynm(self.idx, th, ph) / self.scale
        ft, fp = hm.ynm_gradient(self.idx, th, ph)
        df = np.stack([ft, fp], -1) / self.scale
        P = np.zeros(n_pts)
        gradP3 = np.zeros((n_pts, 3))
        u03 = np.zeros((n_pts, 3))
        round_mask = np.zeros(n_pts, bool)
        for k, pts in enumerate(self._near(x)):
            if not pts:
                continue
            pts = np.asarray(pts)
            xp = x[pts]
            pk = self.xyz[k]
            cosr = np.clip(xp @ pk, -1, 1)
            r = np.arccos(cosr)
            round_mask[pts[r <= self.rho]] = True
            if not self.sa[k]:
                continue
            radial = xp * cosr[:, None] - pk  # sin(r) e_r
            sr = np.sin(r)
            er = radial / np.where(sr > 1e-15, sr, 1.0)[:, None]
            P[pts] += self.sa[k] * self.bump.value(r)
            gradP3[pts] += (self.sa[k] * self.bump.dvalue(r))[:, None] * er
            u03[pts] += (self.sa[k] * self.bump.field_coeff(r))[:, None] * radial
        u3 = -self.lam * u03 + gradP3
        return Evaluation(
            theta=theta, phi=phi,
            f=f.reshape(shape), df=df.reshape(shape + (2,)),
            P=P.reshape(shape), dP=_grad_coords(gradP3, th, ph).reshape(shape + (2,)),
            u0=_tangent_to_coords(u03, th, ph).reshape(shape + (2,)),
            u=_tangent_to_coords(u3, th, ph).reshape(shape + (2,)),
            round_mask=round_mask.reshape(shape),
        )

    def psi(self, theta, phi) -> np.ndarray:
        """Product of (1 - cutoff): zero on every U_p, one outside every V_p."""
        x = sph_to_xyz(np.ravel(theta), np.ravel(phi))
        out = np.ones(len(x))
        for k, pts in enumerate(self._near(x)):
            if pts:
                pts = np.asarray(pts)
                out[pts] *= 1 - self.cut(np.arccos(np.clip(x[pts] @ self.xyz[k], -1, 1)))
        return out.reshape(np.shape(theta))

    def psi_mass(self, grid: LatLonGrid | None = None) -> float:
        grid = grid or LatLonGrid(512, 256)
        return grid.integrate(self.psi(*grid.mesh()))

    def source(self, theta, phi) -> np.ndarray:
        """m_s psi + sum s(p) (phi_p + Lap phi_p / lam), the divergence of u0."""
        x = sph_to_xyz(np.ravel(theta), np.ravel(phi))
        out = self.ms * self.psi(theta, phi).ravel()
        for k, pts in enumerate(self._near(x)):
            if pts and self.sa[k]:
                pts = np.asarray(pts)
                out[pts] += self.sa[k] * self.bump.tau(np.arccos(np.clip(x[pts] @ self.xyz[k], -1, 1)))
        return out.reshape(np.shape(theta))


def grid_conservation(grid: LatLonGrid, model: PerturbationModel) -> tuple[float, float]:
    """(m_s by grid quadrature, |int P| / int |P|) on the given grid."""
    th, ph = grid.mesh()
    ev = model.evaluate(th, ph)
    psi = model.psi(th, ph)
    int_psi = grid.integrate(psi)
    if int_psi <= 0:
        raise MetricError("int psi must be positive")
    bumps = ev.P - model.ms * psi
    rel = abs(grid.integrate(ev.P)) / max(grid.integrate(np.abs(ev.P)), 1e-300)
    return -grid.integrate(bumps) / int_psi, rel


# ------------------------------------------------------------- assembly

@dataclass
class PerturbedField:
    grid: LatLonGrid
    t: float
    t_max: float
    f: np.ndarray
    f_t: np.ndarray
    g_t: np.ndarray
    w: np.ndarray  # grad f + t u
    model: PerturbationModel = field(repr=False)


def _pairing_quadratic(ev: Evaluation):
    """<grad f + t u, df_t> = c0 + c1 t + c2 t^2, pointwise."""
    w0 = np.stack([ev.df[..., 0], ev.df[..., 1] / np.sin(ev.theta) ** 2], -1)
    w1 = ev.u
    c0 = np.sum(w0 * ev.df, -1)
    c1 = np.sum(w0 * ev.dP, -1) + np.sum(w1 * ev.df, -1)
    c2 = np.sum(w1 * ev.dP, -1)
    return w0, w1, c0, c1, c2


def positivity_threshold(ev: Evaluation) -> tuple[float, tuple]:
    """Largest t with <grad f + t u, df_t> > 0 outside the caps U_p, and the
    grid index where it is attained."""
    _, _, c0, c1, c2 = _pairing_quadratic(ev)
    mask = ~ev.round_mask
    c0, c1, c2 = c0[mask], c1[mask], c2[mask]
    if c0.size == 0:
        return math.inf, ()
    if np.any(c0 <= 0):
        raise MetricError("f has a critical point outside the caps")
    roots = np.full((2,) + c0.shape, np.inf)
    quad = np.abs(c2) > 1e-14 * (np.abs(c1) + c0)
    disc = c1 * c1 - 4 * c2 * c0
    ok = quad & (disc >= 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    den = np.where(ok, 2 * c2, 1.0)
    roots[0] = np.where(ok, (-c1 - sq) / den, np.inf)
    roots[1] = np.where(ok, (-c1 + sq) / den, np.inf)
    lin = ~quad & (c1 < 0)
    roots[0] = np.where(lin, -c0 / np.where(lin, c1, -1.0), roots[0])
    roots = np.where(roots > 0, roots, np.inf)
    cand = roots.min(0)
    i = int(np.argmin(cand))
    where = tuple(int(v) for v in np.argwhere(mask)[i])
    return float(cand[i]), where


def assemble_perturbed(idx: HarmonicIndex, pairings: dict | None, t: float | None,
                       grid: LatLonGrid, model: PerturbationModel | None = None) -> PerturbedField:
    """f_t and the compatible metric g_t on the grid.

    t=None picks half the positivity threshold.
    """
    if model is None:
        if pairings is None:
            raise MetricError("need pairings or a model")
        model = PerturbationModel(idx, sign_assignment(idx, pairings))
    th, ph = grid.mesh()
    ev = model.evaluate(th, ph)
    t_max, worst = positivity_threshold(ev)
    if t is None:
        t = 0.5 * t_max
    if t < 0:
        raise MetricError("t must be non-negative")
    if t >= t_max:
        raise MetricError(f"t={t:g} violates positivity at grid point {worst}; maximal admissible t is {t_max:g}")
    f_t = ev.f + t * ev.P
    g = round_metric(grid)
    w0, w1, *_ = _pairing_quadratic(ev)
    w = w0 + t * w1
    if t > 0:
        # inside every U_p, grad f + t u = grad f_t, so g_t is round there
        mask = ~ev.round_mask
        omega = ev.df + t * ev.dP
        dens = np.broadcast_to(np.sin(th), th.shape)
        g[mask] = metric_from_gradient(w[mask], omega[mask] / dens[mask][:, None], dens[mask])
    return PerturbedField(grid, t, t_max, ev.f, f_t, g, w, model)


# ---------------------------------------------------------- differential ops

def _dth(a, h):
    out = np.full_like(a, np.nan)
    out[1:-1] = (a[2:] - a[:-2]) / (2 * h)
    return out


def _dph(a, h):
    return (np.roll(a, -1, axis=1) - np.roll(a, 1, axis=1)) / (2 * h)


def _pad_poles(a: np.ndarray, rows: int, parity: float = 1.0) -> np.ndarray:
    """Ghost rows across the poles: (theta, phi) and (-theta, phi + pi) are
    the same point, so row -1-i mirrors row i shifted by half a turn."""
    half = a.shape[1] // 2
    top = parity * np.roll(a[:rows][::-1], half, axis=1)
    bot = parity * np.roll(a[-rows:][::-1], half, axis=1)
    return np.concatenate([top, a, bot], axis=0)


def _d4(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order centered first derivative (periodic along axis 1,
    trims two rows on each side along axis 0)."""
    if axis == 1:
        return (-np.roll(a, -2, 1) + 8 * np.roll(a, -1, 1) - 8 * np.roll(a, 1, 1) + np.roll(a, 2, 1)) / (12 * h)
    return (-a[4:] + 8 * a[3:-1] - 8 * a[1:-3] + a[:-4]) / (12 * h)


def laplacian(grid: LatLonGrid, g: np.ndarray, f: np.ndarray, order: int = 2) -> np.ndarray:
    """Coordinate Laplace-Beltrami (1/sqrt|g|) d_i (sqrt|g| g^ij d_j f).

    order=2 is the conservative centered stencil; order=4 uses fourth-order
    centered differences with ghost rows mirrored across the poles.  The
    first and last colatitude rows are NaN.
    """
    if order == 4:
        return _laplacian4(grid, g, f)
    if order != 2:
        raise MetricError("order must be 2 or 4")
    ht, hp = grid.dtheta, grid.dphi
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    sq = np.sqrt(det)
    a = sq * g[..., 1, 1] / det  # sqrt|g| g^{tt}
    b = -sq * g[..., 0, 1] / det  # sqrt|g| g^{tp}
    c = sq * g[..., 0, 0] / det  # sqrt|g| g^{pp}
    out = np.full_like(f, np.nan)
    a_half = 0.5 * (a[1:] + a[:-1])
    flux_t = a_half * (f[1:] - f[:-1]) / ht
    tt = (flux_t[1:] - flux_t[:-1]) / ht
    c_half = 0.5 * (c + np.roll(c, -1, axis=1))
    flux_p = c_half * (np.roll(f, -1, axis=1) - f) / hp
    pp = (flux_p - np.roll(flux_p, 1, axis=1)) / hp
    mixed = _dth(b * _dph(f, hp), ht) + _dph(b * _dth(f, ht), hp)
    out[1:-1] = (tt + pp[1:-1] + mixed[1:-1]) / sq[1:-1]
    return out


def _laplacian4(grid: LatLonGrid, g: np.ndarray, f: np.ndarray) -> np.ndarray:
    ht, hp = grid.dtheta, grid.dphi
    fp = _pad_poles(f, 4)
    E = _pad_poles(g[..., 0, 0], 2)
    F = _pad_poles(g[..., 0, 1], 2, -1.0)
    G = _pad_poles(g[..., 1, 1], 2)
    ft = _d4(fp, ht, 0)  # rows -2 .. n+1
    fph = _d4(fp[2:-2], hp, 1)
    det = E * G - F * F
    # signed density: sin(theta) changes sign on the far side of a pole
    sgn = np.ones(det.shape[0])
    sgn[:2] = sgn[-2:] = -1.0
    sq = np.sqrt(det) * sgn[:, None]
    Vt = (G * ft - F * fph) / det
    Vp = (-F * ft + E * fph) / det
    div = _d4(sq * Vt, ht, 0) + _d4((sq * Vp)[2:-2], hp, 1)
    out = div / sq[2:-2]
    out[0] = out[-1] = np.nan
    return out


def divergence(grid: LatLonGrid, v: np.ndarray) -> np.ndarray:
    """Round-metric divergence of coordinate components; pole rows NaN."""
    s = np.sin(grid.theta)[:, None]
    return (_dth(s * v[..., 0], grid.dtheta) + s * _dph(v[..., 1], grid.dphi)) / s


def eigen_residual(grid: LatLonGrid, g: np.ndarray, f: np.ndarray, lam: float, order: int = 2) -> float:
    """max |Lap_g f + lam f| / (lam max|f|) over interior rows."""
    r = laplacian(grid, g, f, order) + lam * f
    return float(np.nanmax(np.abs(r[1:-1])) / (lam * np.max(np.abs(f))))


def divergence_residual(pf: PerturbedField, order: int = 4) -> float:
    """max |div(grad f + t u) + lam f_t| / (lam max|f_t|).

    Since g_t (grad f + t u) = df_t and sqrt|g_t| = sin(theta), this is the
    eigenvalue equation for g_t in divergence form, discretized on the
    analytically sampled vector field.
    """
    grid, w = pf.grid, pf.w
    lam = pf.model.lam
    s = np.sin(grid.theta)[:, None]
    if order == 2:
        div = divergence(grid, w)
    elif order == 4:
        ft = _d4(_pad_poles(s * w[..., 0], 2, -1.0), grid.dtheta, 0)
        div = (ft + _d4(s * w[..., 1], grid.dphi, 1)) / s
    else:
        raise MetricError("order must be 2 or 4")
    r = div + lam * pf.f_t
    return float(np.nanmax(np.abs(r[1:-1])) / (lam * np.max(np.abs(pf.f_t))))


def _d4_second(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    if axis == 1:
        return (-np.roll(a, -2, 1) + 16 * np.roll(a, -1, 1) - 30 * a + 16 * np.roll(a, 1, 1) - np.roll(a, 2, 1)) / (12 * h * h)
    return (-a[4:] + 16 * a[3:-1] - 30 * a[2:-2] + 16 * a[1:-3] - a[:-4]) / (12 * h * h)


def gaussian_curvature(grid: LatLonGrid, g: np.ndarray) -> np.ndarray:
    """Brioschi formula, fourth-order differences, ghost rows mirrored
    across the poles.  The first and last rows are NaN."""
    ht, hp = grid.dtheta, grid.dphi
    E = _pad_poles(g[..., 0, 0], 4)
    F = _pad_poles(g[..., 0, 1], 4, -1.0)
    G = _pad_poles(g[..., 1, 1], 4)
    Eu, Fu, Gu = (_d4(X, ht, 0)[2:-2] for X in (E, F, G))
    c = slice(4, -4)
    E0, F0, G0 = E[c], F[c], G[c]
    Ev, Fv, Gv = (_d4(X, hp, 1) for X in (E0, F0, G0))
    Evv = _d4_second(E0, hp, 1)
    Guu = _d4_second(G, ht, 0)[2:-2]
    Fuv = _d4(_d4(F, hp, 1), ht, 0)[2:-2]
    M1 = np.empty(E0.shape + (3, 3))
    M1[..., 0, 0] = -0.5 * Evv + Fuv - 0.5 * Guu
    M1[..., 0, 1] = 0.5 * Eu
    M1[..., 0, 2] = Fu - 0.5 * Ev
    M1[..., 1, 0] = Fv - 0.5 * Gu
    M1[..., 1, 1] = E0
    M1[..., 1, 2] = F0
    M1[..., 2, 0] = 0.5 * Gv
    M1[..., 2, 1] = F0
    M1[..., 2, 2] = G0
    M2 = np.zeros_like(M1)
    M2[..., 0, 1] = M2[..., 1, 0] = 0.5 * Ev
    M2[..., 0, 2] = M2[..., 2, 0] = 0.5 * Gu
    M2[..., 1, 1], M2[..., 1, 2] = E0, F0
    M2[..., 2, 1], M2[..., 2, 2] = F0, G0
    K = (np.linalg.det(M1) - np.linalg.det(M2)) / (E0 * G0 - F0 * F0) ** 2
    K[0] = K[-1] = np.nan
    return K


def curvature_report(pf: "PerturbedField") -> dict:
    K = gaussian_curvature(pf.grid, pf.g_t)
    return {"sup_abs_kappa": float(np.nanmax(np.abs(K))),
            "sup_abs_kappa_minus_1": float(np.nanmax(np.abs(K - 1))),
            "sup_over_lambda": float(np.nanmax(np.abs(K)) / pf.model.lam)}


# ------------------------------------------------------------ spectral solve

def _alf_table(m: int, lmax: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal associated Legendre functions P_l^m(x), l = m..lmax+1,
    normalised so that P e^{i m phi} has unit L2 norm on the sphere."""
    s = np.sqrt(1 - x * x)
    out = np.zeros((lmax + 2 - m, len(x)))
    p = np.full_like(x, 1 / math.sqrt(4 * math.pi))
    for k in range(1, m + 1):
        p = -math.sqrt((2 * k + 1) / (2 * k)) * s * p
    out[0] = p
    if lmax + 1 > m:
        out[1] = x * math.sqrt(2 * m + 3) * p
    for l in range(m + 2, lmax + 2):
        a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
        b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
        out[l - m] = a * (x * out[l - m - 1] - b * out[l - m - 2])
    return out


def spectral_poisson_gradient(grid: LatLonGrid, source: np.ndarray, lmax: int | None = None) -> np.ndarray:
    """grad of Lap^{-1} source (round sphere) via a truncated harmonic basis."""
    if lmax is None:
        # projections are exact while l + (source degree) < ntheta
        lmax = min(grid.ntheta // 2, grid.nphi // 2 - 1)
    x = np.cos(grid.theta)
    w = grid.theta_weights
    st = np.sin(grid.theta)
    F = np.fft.rfft(source, axis=1) * grid.dphi  # c_m(theta)
    gt = np.zeros((grid.ntheta, lmax + 1), complex)
    gp = np.zeros((grid.ntheta, lmax + 1), complex)
    for m in range(0, lmax + 1):
        P = _alf_table(m, lmax, x)  # rows l = m..lmax+1
        ls = np.arange(m, lmax + 1)
        coef = P[:-1] @ (w * F[:, m])  # a_lm for l = m..lmax
        inv = np.where(ls > 0, -1.0 / np.maximum(ls * (ls + 1), 1), 0.0)
        a = coef * inv
        # sin(theta) dP_l/dtheta = l c_{l+1} P_{l+1} - (l+1) c_l P_{l-1}
        def cfac(l):
            return np.sqrt(np.maximum(l * l - m * m, 0) / (4.0 * l * l - 1))
        Pl = P[:-1]
        Pp1 = P[1:]
        Pm1 = np.vstack([np.zeros((1, len(x))), P[:-2]]) if len(ls) > 1 else np.zeros((1, len(x)))
        dP = (ls[:, None] * cfac(ls + 1)[:, None] * Pp1 - (ls + 1)[:, None] * cfac(ls)[:, None] * Pm1) / st
        gt[:, m] = a @ dP
        gp[:, m] = 1j * m * (a @ Pl)
    nph = grid.nphi

    def synth(c):
        full = np.zeros((grid.ntheta, nph // 2 + 1), complex)
        k = min(lmax + 1, nph // 2 + 1)
        full[:, :k] = c[:, :k]
        # irfft gives (c_0 + 2 Re sum c_m e^{im phi}) / n
        return np.fft.irfft(full, n=nph, axis=1) * nph

    d_t = synth(gt)
    d_p = synth(gp)
    return np.stack([d_t, d_p / st[:, None] ** 2], -1)


def solve_u0(grid: LatLonGrid, source: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """u0 = grad Lap^{-1} source for a mean-zero grid source."""
    total = grid.integrate(source)
    if abs(total) > tol * max(1.0, grid.integrate(np.abs(source))):
        raise MetricError(f"source has non-zero mean {total:g}")
    if not np.any(source):
        return np.zeros(grid.shape + (2,))
    return spectral_poisson_gradient(grid, source)


# ------------------------------------------------------------ nodal sets

class _DSU:
    def __init__(self, n):
        self.p = np.arange(n)

    def find(self, a):
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a, b):
        a, b = self.find(a), self.find(b)
        if a != b:
            self.p[max(a, b)] = min(a, b)


def extract_nodal_config(f: np.ndarray, pole_values: tuple[float, float] | None = None) -> OvalConfig:
    """Nodal domains as sign components (periodic in phi, closed at poles)
    and their adjacency tree, read off as an oval configuration."""
    f = np.asarray(f, float)
    nt, nphi = f.shape
    if not np.all(np.isfinite(f)):
        raise MetricError("field has non-finite values")
    # samples exactly on the zero set count as positive, i.e. we read f + eps
    sgn = f >= 0
    wrap = np.concatenate([sgn, sgn[:, :1]], axis=1)
    alt = (wrap[:-1, :-1] == wrap[1:, 1:]) & (wrap[:-1, 1:] == wrap[1:, :-1]) & (wrap[:-1, :-1] != wrap[:-1, 1:])
    if np.any(alt):
        i, j = np.argwhere(alt)[0]
        raise MetricError(f"degenerate cell at ({i}, {j}) with alternating signs; use a finer grid")
    lab_pos, npos = ndimage.label(sgn)
    lab_neg, nneg = ndimage.label(~sgn)
    labels = np.where(sgn, lab_pos, lab_neg + npos) - 1
    total = npos + nneg
    north, south = total, total + 1
    dsu = _DSU(total + 2)
    for i in range(nt):
        if sgn[i, 0] == sgn[i, -1]:
            dsu.union(labels[i, 0], labels[i, -1])
    if pole_values is None:
        pole_values = (float(f[0].mean()), float(f[-1].mean()))
    psign = [pole_values[0] >= 0, pole_values[1] >= 0]
    for pole, row, ps in ((north, 0, psign[0]), (south, nt - 1, psign[1])):
        same = sgn[row] == ps
        if not np.any(same):
            raise MetricError("pole sign inconsistent with the adjacent row")
        for lab in np.unique(labels[row][same]):
            dsu.union(pole, lab)
    root = np.array([dsu.find(v) for v in range(total + 2)])
    comp = root[labels]
    pairs = set()
    a, b = comp[:, :], np.roll(comp, -1, axis=1)
    diff = a != b
    pairs |= {tuple(sorted(p)) for p in zip(a[diff].tolist(), b[diff].tolist())}
    a, b = comp[:-1], comp[1:]
    diff = a != b
    pairs |= {tuple(sorted(p)) for p in zip(a[diff].tolist(), b[diff].tolist())}
    for pole, row, ps in ((north, 0, psign[0]), (south, nt - 1, psign[1])):
        pr = root[pole]
        for c in np.unique(comp[row]):
            if c != pr:
                pairs.add(tuple(sorted((int(pr), int(c)))))
    curves = {f"c{i}": p for i, p in enumerate(sorted(pairs))}
    nodes = {v for p in pairs for v in p}
    start = int(root[north])
    if not curves:
        return OvalConfig(())
    try:
        return config_from_region_tree(curves, start if start in nodes else min(nodes))
    except OvalError as exc:
        raise MetricError(f"nodal domains do not form a tree: {exc}") from exc


# ------------------------------------------------------------- field dumps

def write_field(path, grid: LatLonGrid, data: np.ndarray, fmt: str = "bin") -> None:
    """Row-major theta-then-phi; binary is little-endian float64 after a
    text header line `format: 1 ntheta nphi ncomp`."""
    arr = np.ascontiguousarray(np.asarray(data, dtype="<f8").reshape(grid.ntheta, grid.nphi, -1))
    ncomp = arr.shape[-1]
    if fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(f"format: 1 {grid.ntheta} {grid.nphi} {ncomp}\n".encode())
            fh.write(arr.tobytes())
    elif fmt == "csv":
        with open(path, "w") as fh:
            fh.write(f"# format: 1 {grid.ntheta} {grid.nphi} {ncomp}\n")
            np.savetxt(fh, arr.reshape(-1, ncomp), delimiter=",", fmt="%.17g")
    else:
        raise MetricError(f"unknown field format {fmt!r}")


def read_field(path) -> tuple[LatLonGrid, np.ndarray]:
    with open(path, "rb") as fh:
        head = fh.readline().decode().lstrip("# ").split()
        if head[:2] != ["format:", "1"]:
            raise MetricError("unsupported field header")
        nt, nphi, nc = (int(v) for v in head[2:5])
        grid = LatLonGrid(nphi, nt)
        if path.endswith(".csv"):
            arr = np.loadtxt(fh, delimiter=",", ndmin=2)
        else:
            arr = np.frombuffer(fh.read(), dtype="<f8")
    return grid, np.asarray(arr, float).reshape(nt, nphi, nc).squeeze(-1) if nc == 1 else np.asarray(arr).reshape(nt, nphi, nc)
