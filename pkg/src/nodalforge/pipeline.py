"""End-to-end driver: oval configuration in, perturbed eigenfunction and
compatible metric out, with the extracted nodal configuration checked
against the input."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import metric as mt
from .harmonics import HarmonicIndex, globe_graph, grid_positions, resolve_poles
from .ovals import OvalConfig, format_config, is_equivalent, parse_config
from .planar import (Drawing, chessboard_redraw, choose_pairings_containing, curves_matching,
                     embed_grid_in_globe, naive_drawing, perturb, reduce)


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.cause = exc


@dataclass
class PipelineConfig:
    grid: str = "1024x512"
    t: float | None = None          # None: half the positivity threshold
    cap_factor: float = 1.0         # multiplies the automatic cap radius
    n: int | None = None            # harmonic degree; None picks it from the drawing
    m: int | None = None
    M: int = 4
    det_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.det_tol <= 0 or self.cap_factor <= 0:
            raise ValueError("tolerances and factors must be positive")
        if self.M < 4:
            raise ValueError("M must be at least 4")


@dataclass
class Combinatorics:
    cfg: OvalConfig
    drawing: Drawing
    redrawn: Drawing
    idx: HarmonicIndex
    globe: object
    gprime: object
    pairing: dict           # choose_pairings_containing output
    x_cfg: OvalConfig       # its perturbation
    cycles: list
    y_labels: list
    reduced: dict           # reduce output
    reduced_cfg: OvalConfig
    reduced_cycles: list = field(default_factory=list)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except Exception as exc:        # noqa: BLE001 - re-raised with the stage name
        raise StageError(name, exc) from exc


def harmonic_for_grid(k: int) -> HarmonicIndex:
    """Smallest globe with room for a k x k grid window."""
    m = (k + 3) // 2
    return HarmonicIndex(m + k + 1, m)


def combinatorics(cfg: OvalConfig, pc: PipelineConfig | None = None) -> Combinatorics:
    pc = pc or PipelineConfig()
    if len(cfg) == 0:
        raise StageError("draw", ValueError("at least one oval required"))
    d = _stage("draw", naive_drawing, cfg)
    n = max(v[0] for v in d.graph.rot)
    r = _stage("redraw", chessboard_redraw, cfg, d, pc.M)
    k = pc.M * n + 2
    idx = HarmonicIndex(pc.n, pc.m) if pc.n is not None else harmonic_for_grid(k)
    globe = _stage("globe", globe_graph, idx)
    gp = _stage("globe", resolve_poles, globe)
    emb = _stage("embed", embed_grid_in_globe, k, gp, globe.rows, globe.cols)
    img = [emb.edge_map[e] for e in r.edge_ids]
    pairing = _stage("pairings", choose_pairings_containing, gp, img)
    x_cfg, cycles = _stage("perturb", perturb, gp, pairing)
    y = curves_matching(cycles, Drawing(gp, frozenset(img)).cycles())
    reduced = _stage("reduce", reduce, gp, pairing, y)
    x2, cyc2 = _stage("perturb", perturb, gp, reduced)
    if not is_equivalent(x2, cfg):
        raise StageError("reduce", ValueError(f"reduced configuration {format_config(x2)} differs from the target"))
    return Combinatorics(cfg, d, r, idx, globe, gp, pairing, x_cfg, cycles, y, reduced, x2, cyc2)


def perturbation_svg_for(comb: Combinatorics, cycles: list) -> str:
    from .planar import EmbeddedGraph, perturbation_svg
    g = comb.gprime
    pos = grid_positions(comb.globe, g)
    return perturbation_svg(EmbeddedGraph(g.edges, g.rot, pos=pos), cycles)


def build_model(comb: Combinatorics, pc: PipelineConfig) -> mt.PerturbationModel:
    signs = _stage("signs", mt.sign_assignment, comb.idx, comb.reduced)
    model = _stage("model", mt.PerturbationModel, comb.idx, signs)
    if pc.cap_factor != 1.0:
        model = _stage("model", mt.PerturbationModel, comb.idx, signs, model.rho * pc.cap_factor)
    return model


@dataclass
class SynthResult:
    comb: Combinatorics
    model: mt.PerturbationModel
    field: mt.PerturbedField
    extracted: OvalConfig
    report: dict            # deterministic; timing lives in `seconds`
    seconds: float = 0.0


def synthesize(cfg: OvalConfig, pc: PipelineConfig | None = None, residual_check: bool = True) -> SynthResult:
    pc = pc or PipelineConfig()
    t0 = time.perf_counter()
    comb = combinatorics(cfg, pc)
    model = build_model(comb, pc)
    grid = _stage("grid", mt.LatLonGrid.parse, pc.grid)
    pf = _stage("assemble", mt.assemble_perturbed, comb.idx, None, pc.t, grid, model)
    extracted = _stage("extract", mt.extract_nodal_config, pf.f_t)
    g = pf.g_t
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    det_dev = float(np.max(np.abs(det - np.sin(grid.theta)[:, None] ** 2)))
    report = {
        "format": 1,
        "config": format_config(cfg),
        "extracted": format_config(extracted),
        "equivalent": is_equivalent(extracted, cfg),
        "harmonic": {"n": comb.idx.n, "m": comb.idx.m, "lambda": model.lam},
        "grid": pc.grid,
        "t": pf.t,
        "t_max": pf.t_max,
        "cap_radius": model.rho,
        "m_s": model.ms,
        "det_deviation": det_dev,
        "det_ok": det_dev <= pc.det_tol,
    }
    if residual_check:
        r1 = mt.divergence_residual(pf)
        fine = mt.LatLonGrid(2 * grid.nphi, 2 * grid.ntheta)
        r2 = mt.divergence_residual(mt.assemble_perturbed(comb.idx, None, pf.t, fine, model))
        report["residual"] = r1
        report["residual_fine"] = r2
        report["residual_ratio"] = r1 / r2 if r2 > 0 else math.inf
    return SynthResult(comb, model, pf, extracted, report, time.perf_counter() - t0)


def config_from_text(text: str) -> OvalConfig:
    """Parse a .ovals file body (optional `format: 1` line, `#` comments)."""
    return parse_config(text)


def config_to_text(cfg: OvalConfig) -> str:
    return f"format: 1\n{format_config(cfg)}\n"


def pipeline_config_dict(pc: PipelineConfig) -> dict:
    return asdict(pc)
