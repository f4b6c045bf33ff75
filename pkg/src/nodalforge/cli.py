"""Command-line driver.  Every artifact is deterministic for a fixed seed
and input; reports are JSON with sorted keys and a `format: 1` field."""

from __future__ import annotations

import contextlib
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import blocks as bk
from . import metric as mt
from . import pipeline as pl
from . import suites
from .ovals import OvalError, format_config
from .planar import chessboard_alignment, chessboard_redraw, drawing_svg, format_drawing, naive_drawing


def _threads(value):
    if value is not None:
        return value
    env = os.environ.get("NODALFORGE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise click.UsageError(f"NODALFORGE_THREADS must be an integer, got {env!r}") from None
    return None


@contextlib.contextmanager
def thread_limit(n):
    if n is None:
        yield
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:         # pragma: no cover - optional
        yield
        return
    with threadpool_limits(limits=n):
        yield


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_text(text)
    return p


def _load_config(path: str):
    try:
        cfg = pl.config_from_text(Path(path).read_text())
    except OvalError as exc:
        raise click.ClickException(f"{path}: {exc}") from None
    return cfg


def _require_ovals(cfg):
    if len(cfg) == 0:
        raise click.ClickException("at least one oval required")


def _pairing_json(p: dict) -> dict:
    return {f"{k[0]},{k[1]}": int(v) for k, v in sorted(p.items())}


common = [
    click.option("--out", "out", type=click.Path(file_okay=False), default=".", show_default=True,
                 help="Output directory."),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--threads", type=int, default=None, help="Thread cap; falls back to NODALFORGE_THREADS."),
]


def with_common(f):
    for opt in reversed(common):
        f = opt(f)
    return f


@click.group()
@click.version_option(package_name="nodalforge")
def main():
    """Prescribed nodal sets on the sphere: drawings, reductions, metrics."""


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@with_common
def draw(config, out, seed, threads):
    """Naive grid drawing of a configuration."""
    cfg = _load_config(config)
    d = naive_drawing(cfg)
    stem = Path(config).stem
    _write(Path(out), f"{stem}.drawing", format_drawing(d))
    _write(Path(out), f"{stem}.svg", drawing_svg(d))
    click.echo(f"{stem}: {len(d.edge_ids)} edges on a {max(v[0] for v in d.graph.rot)}-grid")


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--M", "M", type=int, default=4, show_default=True, help="Scale factor (>= 4).")
@with_common
def redraw(config, M, out, seed, threads):
    """Chessboard-aligned redraw of the naive drawing."""
    cfg = _load_config(config)
    try:
        d = chessboard_redraw(cfg, naive_drawing(cfg), M)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from None
    stem = Path(config).stem
    good, total = chessboard_alignment(d)
    _write(Path(out), f"{stem}.redraw.drawing", format_drawing(d))
    _write(Path(out), f"{stem}.redraw.svg", drawing_svg(d))
    click.echo(f"{stem}: aligned {good}/{total}")


def _comb(config, M):
    cfg = _load_config(config)
    _require_ovals(cfg)
    try:
        return pl.combinatorics(cfg, pl.PipelineConfig(M=M))
    except pl.StageError as exc:
        raise click.ClickException(str(exc)) from None


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--M", "M", type=int, default=4, show_default=True)
@with_common
def perturb(config, M, out, seed, threads):
    """Pairings on the globe graph that contain the redrawn curves."""
    comb = _comb(config, M)
    stem = Path(config).stem
    report = {"format": 1, "harmonic": [comb.idx.n, comb.idx.m], "pairing": _pairing_json(comb.pairing),
              "perturbed": format_config(comb.x_cfg), "kept": comb.y_labels}
    _write(Path(out), f"{stem}.perturb.json", _dump(report))
    _write(Path(out), f"{stem}.perturb.svg", pl.perturbation_svg_for(comb, comb.cycles))
    click.echo(f"{stem}: {len(comb.cycles)} curves, keep {len(comb.y_labels)}")


@main.command("reduce")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--M", "M", type=int, default=4, show_default=True)
@with_common
def reduce_cmd(config, M, out, seed, threads):
    """Flip pairings until only the target ovals remain."""
    comb = _comb(config, M)
    stem = Path(config).stem
    report = {"format": 1, "harmonic": [comb.idx.n, comb.idx.m], "pairing": _pairing_json(comb.reduced),
              "config": format_config(comb.reduced_cfg)}
    _write(Path(out), f"{stem}.reduce.json", _dump(report))
    _write(Path(out), f"{stem}.reduce.svg", pl.perturbation_svg_for(comb, comb.reduced_cycles))
    click.echo(f"{stem}: {format_config(comb.reduced_cfg)}")


@main.command("blocks")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@with_common
def blocks_cmd(config, out, seed, threads):
    """Disk/cylinder/pants block chain of a configuration."""
    cfg = _load_config(config)
    _require_ovals(cfg)
    try:
        dec = bk.decompose(cfg)
    except bk.BlockError as exc:
        raise click.ClickException(str(exc)) from None
    stem = Path(config).stem
    text = dec.to_json()
    _write(Path(out), f"{stem}.blocks.json", text)
    _write(Path(out), f"{stem}.blocks.svg", dec.to_svg())
    click.echo(text, nl=False)


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--grid", default="1024x512", show_default=True, help="WxH latitude-longitude grid.")
@click.option("--t", "t", type=float, default=None, help="Perturbation size (default: half the admissible maximum).")
@click.option("--M", "M", type=int, default=4, show_default=True)
@click.option("--no-residual", is_flag=True, help="Skip the grid-doubling residual check.")
@click.option("--no-dumps", is_flag=True, help="Do not write f_t and g_t.")
@with_common
def synth(config, grid, t, M, no_residual, no_dumps, out, seed, threads):
    """Full pipeline: nodal configuration to f_t and a compatible metric g_t."""
    cfg = _load_config(config)
    _require_ovals(cfg)
    pc = pl.PipelineConfig(grid=grid, t=t, M=M, seed=seed)
    with thread_limit(_threads(threads)):
        try:
            res = pl.synthesize(cfg, pc, residual_check=not no_residual)
        except pl.StageError as exc:
            raise click.ClickException(str(exc)) from None
    stem = Path(config).stem
    o = Path(out)
    report = dict(res.report, pipeline=pl.pipeline_config_dict(pc))
    _write(o, f"{stem}.report.json", _dump(report))
    _write(o, f"{stem}.redraw.svg", drawing_svg(res.comb.redrawn))
    _write(o, f"{stem}.reduce.svg", pl.perturbation_svg_for(res.comb, res.comb.reduced_cycles))
    if not no_dumps:
        o.mkdir(parents=True, exist_ok=True)
        g = res.field.grid
        mt.write_field(str(o / f"{stem}.f_t.bin"), g, res.field.f_t)
        gt = res.field.g_t
        mt.write_field(str(o / f"{stem}.g_t.bin"), g, np.stack([gt[..., 0, 0], gt[..., 0, 1], gt[..., 1, 1]], -1))
    ok = report["equivalent"] and report["det_ok"]
    click.echo(f"{stem}: equivalent={report['equivalent']} det_dev={report['det_deviation']:.2e}"
               + (f" residual_ratio={report['residual_ratio']:.2f}" if "residual_ratio" in report else ""))
    if not ok:
        sys.exit(1)


@main.command()
@click.argument("suite", type=click.Choice(suites.SUITES + ("all",)))
@click.option("--cases", type=int, default=None, help="Sample count for randomized suites.")
@with_common
def verify(suite, cases, out, seed, threads):
    """Run property suites; exit code 1 on any failure."""
    with thread_limit(_threads(threads)):
        report = suites.run(suite, seed=seed, cases=cases)
    text = _dump(report)
    _write(Path(out), f"verify-{suite}.json", text)
    for name, checks in report["suites"].items():
        for c in checks:
            click.echo(f"{'PASS' if c['pass'] else 'FAIL'}  {name}: {c['name']}")
    if not report["pass"]:
        sys.exit(1)


if __name__ == "__main__":      # pragma: no cover
    main()
