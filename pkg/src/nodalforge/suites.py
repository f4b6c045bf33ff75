"""Property suites behind `nodalforge verify`.  Each suite returns a plain
dict of named checks; identical seeds give identical dicts."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

import numpy as np

from . import blocks as bk
from . import blueprint as bpm
from . import harmonics as hm
from . import metric as mt
from .ovals import all_configs, all_nestings, is_equivalent, nicely_contains
from .planar import (all_pairings, chessboard_alignment, chessboard_redraw, drawing_to_config,
                     naive_drawing, octahedron, perturb, reduce)

SUITES = ("pointwise", "blueprint", "planar", "blocks", "harmonics")


def _check(name, ok, **detail):
    return {"name": name, "pass": bool(ok), **{k: _jsonable(v) for k, v in detail.items()}}


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(f"{float(v):.6g}")
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, Fraction):
        return str(v)
    return v


def random_gradient_pairs(n: int, rng: np.random.Generator, lo=1e-6, hi=1e6):
    """Pairs (u, v) with <u, v> log-uniform in (lo, hi)."""
    ang_u = rng.uniform(0, 2 * np.pi, n)
    ang = ang_u + rng.uniform(-0.49 * np.pi, 0.49 * np.pi, n)
    target = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    ratio = np.exp(rng.uniform(-3, 3, n))
    cosd = np.cos(ang - ang_u)
    nu = np.sqrt(target / cosd * ratio)
    nv = target / (cosd * nu)
    u = np.stack([nu * np.cos(ang_u), nu * np.sin(ang_u)], -1)
    v = np.stack([nv * np.cos(ang), nv * np.sin(ang)], -1)
    return u, v


def pointwise_checks(u, v) -> dict:
    A = mt.metric_from_gradient(u, v)
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    Au = np.einsum("...ij,...j->...i", A, u)
    rel = np.linalg.norm(Au - v, axis=-1) / np.linalg.norm(v, axis=-1)
    tr = A[..., 0, 0] + A[..., 1, 1]
    return {
        "symmetric": bool(np.all(A[..., 0, 1] == A[..., 1, 0])),
        "det_err": float(np.max(np.abs(det - 1))),
        "solve_err": float(np.max(rel)),
        "spd": bool(np.all(A[..., 0, 0] > 0) and np.all(det > 0) and np.all(tr > 0)),
    }


def suite_pointwise(seed: int = 0, cases: int | None = None) -> list:
    rng = np.random.default_rng(seed)
    u, v = random_gradient_pairs(cases or 100_000, rng)
    r = pointwise_checks(u, v)
    out = [_check("symmetry", r["symmetric"]),
           _check("det", r["det_err"] <= 1e-9, max_err=r["det_err"]),
           _check("maps u to v", r["solve_err"] <= 1e-9, max_rel_err=r["solve_err"]),
           _check("spd", r["spd"])]
    try:
        mt.metric_from_gradient(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
        out.append(_check("rejects <u,v> = 0", False))
    except mt.MetricError:
        out.append(_check("rejects <u,v> = 0", True))
    return out


def blueprint_instance_check(inst: bpm.HiddenInstance, rng: random.Random, n_random: int) -> tuple[bool, int]:
    phi = bpm.solve_phi(inst.bp, inst.F)
    subsets = bpm.single_segment_subsets(inst) + [bpm.random_subset(inst, rng) for _ in range(n_random)]
    for c in subsets:
        if inst.F(c) != phi.pair(inst.bp, c):
            return False, len(subsets)
    return True, len(subsets)


def negated_check(inst: bpm.HiddenInstance) -> bool:
    try:
        bpm.solve_phi(inst.bp, inst.F)
    except bpm.InfeasibleError as exc:
        cert = exc.certificate
        return all(w > 0 for w in cert["boundary"].values()) and cert["F"] <= 0
    return False


def suite_blueprint(seed: int = 0, cases: int | None = None, subsets: int = 1000) -> list:
    rng = random.Random(seed)
    cases = cases or 20
    ok, total = 0, 0
    for _ in range(cases):
        good, n = blueprint_instance_check(bpm.hidden_instance(rng), rng, subsets)
        ok += good
        total += n
    n_neg = max(2, cases // 10)
    neg = sum(negated_check(bpm.hidden_instance(rng, negate=True)) for _ in range(n_neg))
    one = bpm.Blueprint([bpm.Edge("e", 0, 1)])
    two = bpm.Blueprint([bpm.Edge(f"e{i}", 0, 1) for i in range(3)])
    return [_check("hidden instances", ok == cases, solved=ok, cases=cases, subsets=total),
            _check("negated instances infeasible", neg == n_neg, rejected=neg, cases=n_neg),
            _check("dim H single edge", bpm.homology_reduce(one).dim == 1),
            _check("dim H three edges", bpm.homology_reduce(two).dim == 3)]


def reduce_exhaustive(g) -> tuple[int, int]:
    """(successes, cases) over every pairing and every nicely contained subset."""
    good = total = 0
    for pairing in all_pairings(g):
        x, cycles = perturb(g, pairing)
        labels = [f"c{i}" for i in range(len(cycles))]
        for r in range(1, len(labels) + 1):
            for y in itertools.combinations(labels, r):
                if not nicely_contains(x, y):
                    continue
                total += 1
                target = x.without(set(labels) - set(y))
                x2, _ = perturb(g, reduce(g, pairing, y))
                good += is_equivalent(x2, target)
    return good, total


def chessboard_all(max_ovals: int, M: int = 4) -> tuple[int, int, int]:
    """(aligned configs, equivalent configs, configs)."""
    aligned = equiv = total = 0
    for n in range(1, max_ovals + 1):
        for cfg in all_nestings(n):
            d = chessboard_redraw(cfg, naive_drawing(cfg), M)
            good, edges = chessboard_alignment(d)
            aligned += good == edges
            equiv += is_equivalent(drawing_to_config(d), cfg)
            total += 1
    return aligned, equiv, total


def suite_planar(seed: int = 0, cases: int | None = None) -> list:
    good, total = reduce_exhaustive(octahedron())
    a, e, n = chessboard_all(3)
    return [_check("reduce on octahedron", good == total, passed=good, cases=total),
            _check("chessboard alignment", a == n, passed=a, configs=n),
            _check("chessboard equivalence", e == n, passed=e, configs=n)]


def suite_blocks(seed: int = 0, cases: int | None = None) -> list:
    out = []
    expect = {bk.BlockType.DISK: "max", bk.BlockType.CYLINDER: "none", bk.BlockType.PANTS: "saddle"}
    for t in bk.BlockType:
        rep = bk.admissibility_sweep(t, samples=cases or 50, seed=seed)
        out.append(_check(f"admissibility {t.value}", rep.ok, strict_max=rep.strict_max,
                          equal_err=rep.equality_max_abs))
        kind = bk.classify_critical(t).kind
        out.append(_check(f"critical points {t.value}", kind == expect[t], found=kind))
    bad = 0
    count = 0
    for n in range(1, 6):
        for cfg in all_configs(n):
            dec = bk.decompose(cfg)
            count += 1
            bad += not (len(dec.blocks) == 2 * n and not dec.check())
    out.append(_check("decompose 2n blocks with consistent signs", bad == 0, configs=count, failures=bad))
    return out


def harmonic_residual(n: int, m: int, grid: mt.LatLonGrid, order: int = 4) -> float:
    th, ph = grid.mesh()
    f = hm.eval_ynm(hm.HarmonicIndex(n, m), th, ph)
    return mt.eigen_residual(grid, mt.round_metric(grid), f, hm.eigenvalue(n), order)


def suite_harmonics(seed: int = 0, cases: int | None = None) -> list:
    g1, g2 = mt.LatLonGrid(256, 128), mt.LatLonGrid(512, 256)
    worst, ratio = 0.0, np.inf
    for n in range(1, 5):
        for m in range(1, n + 1):
            r1, r2 = harmonic_residual(n, m, g1), harmonic_residual(n, m, g2)
            worst = max(worst, r2)
            ratio = min(ratio, r1 / r2)
    roots_ok = all(len(hm.f_nm_roots(n, m)) == n - m for n in range(1, 16) for m in range(1, n + 1))
    grid = mt.LatLonGrid(64, 32)
    th, ph = grid.mesh()
    y = np.sin(th) * np.cos(th) * np.cos(ph)
    u = mt.spectral_poisson_gradient(grid, y)
    spec_err = float(np.max(np.abs(u[..., 0] + np.cos(2 * th) * np.cos(ph) / 6)))
    return [_check("residual at 512x256", worst <= 1e-3, max_residual=worst),
            _check("residual improves on doubling", ratio >= 4, min_ratio=ratio),
            _check("root counts n-m", roots_ok),
            _check("spectral Poisson solve", spec_err <= 1e-10, max_err=spec_err)]


RUNNERS = {"pointwise": suite_pointwise, "blueprint": suite_blueprint, "planar": suite_planar,
           "blocks": suite_blocks, "harmonics": suite_harmonics}


def run(suite: str, seed: int = 0, cases: int | None = None) -> dict:
    names = SUITES if suite == "all" else (suite,)
    if any(n not in RUNNERS for n in names):
        raise ValueError(f"unknown suite {suite!r}")
    results = {n: RUNNERS[n](seed=seed, cases=cases) for n in names}
    return {"format": 1, "seed": seed, "cases": cases, "suites": results,
            "pass": all(c["pass"] for checks in results.values() for c in checks)}
