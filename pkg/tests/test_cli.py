import json

import click
import pytest
from click.testing import CliRunner

from nodalforge import cli
from nodalforge.metric import read_field


@pytest.fixture
def runner():
    return CliRunner()


def config_file(tmp_path, text, name="cfg"):
    p = tmp_path / f"{name}.ovals"
    p.write_text(f"format: 1\n# test input\n{text}\n")
    return str(p)


def test_draw_and_redraw(runner, tmp_path):
    cfg = config_file(tmp_path, "A(B C) D E", "fig")
    out = tmp_path / "o"
    r = runner.invoke(cli.main, ["draw", cfg, "--out", str(out)])
    assert r.exit_code == 0, r.output
    assert "5-grid" in r.output
    assert (out / "fig.drawing").exists() and (out / "fig.svg").read_text().startswith("<svg")
    r = runner.invoke(cli.main, ["redraw", cfg, "--out", str(out), "--M", "4"])
    assert r.exit_code == 0, r.output
    good, total = r.output.split("aligned ")[1].strip().split("/")
    assert good == total
    bad = runner.invoke(cli.main, ["redraw", cfg, "--out", str(out), "--M", "3"])
    assert bad.exit_code != 0


def test_perturb_and_reduce(runner, tmp_path):
    cfg = config_file(tmp_path, "A(B)")
    out = tmp_path / "o"
    r = runner.invoke(cli.main, ["perturb", cfg, "--out", str(out)])
    assert r.exit_code == 0, r.output
    doc = json.loads((out / "cfg.perturb.json").read_text())
    assert doc["format"] == 1 and len(doc["kept"]) == 2
    r = runner.invoke(cli.main, ["reduce", cfg, "--out", str(out)])
    assert r.exit_code == 0, r.output
    doc = json.loads((out / "cfg.reduce.json").read_text())
    assert doc["config"].count("(") == 1
    assert (out / "cfg.reduce.svg").exists()


def test_blocks_json(runner, tmp_path):
    cfg = config_file(tmp_path, "A(B)")
    out = tmp_path / "o"
    r = runner.invoke(cli.main, ["blocks", cfg, "--out", str(out)])
    assert r.exit_code == 0, r.output
    doc = json.loads(r.output)
    assert len(doc["blocks"]) == 4
    assert (out / "cfg.blocks.json").read_text() == r.output


@pytest.mark.parametrize("cmd", ["blocks", "perturb", "reduce", "synth"])
def test_empty_config_is_rejected(runner, tmp_path, cmd):
    cfg = config_file(tmp_path, "")
    r = runner.invoke(cli.main, [cmd, cfg, "--out", str(tmp_path)])
    assert r.exit_code != 0 and "at least one oval" in r.output


def test_malformed_config(runner, tmp_path):
    cfg = config_file(tmp_path, "A(B")
    r = runner.invoke(cli.main, ["draw", cfg, "--out", str(tmp_path)])
    assert r.exit_code != 0


def test_synth_small_grid(runner, tmp_path):
    cfg = config_file(tmp_path, "A", "one")
    out = tmp_path / "o"
    r = runner.invoke(cli.main, ["synth", cfg, "--grid", "256x128", "--no-residual", "--out", str(out)])
    assert r.exit_code == 0, r.output
    rep = json.loads((out / "one.report.json").read_text())
    assert rep["equivalent"] and rep["det_ok"] and "residual_ratio" not in rep
    assert rep["pipeline"]["grid"] == "256x128"
    grid, f = read_field(str(out / "one.f_t.bin"))
    assert f.shape == grid.shape == (128, 256)
    _, g = read_field(str(out / "one.g_t.bin"))
    assert g.shape == (128, 256, 3)


def test_verify_is_deterministic(runner, tmp_path):
    outs = []
    for sub in ("a", "b"):
        r = runner.invoke(cli.main, ["verify", "all", "--seed", "7", "--out", str(tmp_path / sub)])
        assert r.exit_code == 0, r.output
        outs.append((tmp_path / sub / "verify-all.json").read_bytes())
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["pass"] is True


def test_verify_unknown_suite(runner):
    assert runner.invoke(cli.main, ["verify", "nope"]).exit_code == 2


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("NODALFORGE_THREADS", "3")
    assert cli._threads(None) == 3
    assert cli._threads(2) == 2
    monkeypatch.setenv("NODALFORGE_THREADS", "0")
    assert cli._threads(None) == 1
    monkeypatch.setenv("NODALFORGE_THREADS", "many")
    with pytest.raises(click.UsageError):
        cli._threads(None)
    monkeypatch.delenv("NODALFORGE_THREADS")
    assert cli._threads(None) is None


def test_bad_threads_env_reaches_the_user(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("NODALFORGE_THREADS", "x")
    r = runner.invoke(cli.main, ["verify", "harmonics", "--out", str(tmp_path)])
    assert r.exit_code == 2 and "NODALFORGE_THREADS" in r.output
