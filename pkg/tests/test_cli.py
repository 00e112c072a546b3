import math
from pathlib import Path

import numpy as np
import pytest

from stationary_light import imaging
from stationary_light.cli import build_simulation, load_record, main
from stationary_light.config import parse_config

from conftest import R_BRIGHT_PAPER

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = """
[params]
d = 200
gamma0_hz = 500
detuning_mhz = 160
omega_mhz = 2.4

[grid]
n_points = 128
dt = 0.02
sample_stride = 10

[run]
dispersion = common

[scenario]
preset = sl
duration = 6
phi = {phi}
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_summary(out):
    pairs = (line.split("=", 1) for line in (Path(out) / "summary.txt").read_text().splitlines()
             if not line.startswith("#"))
    return {k: v for k, v in pairs}


def test_run_writes_every_output(tmp_path):
    out = tmp_path / "bright"
    assert main(["run", "--config", write_cfg(tmp_path, SMALL.format(phi=0)), "--out", str(out),
                 "--quiet"]) == 0
    for name in ("detectors.csv", "spinwave.csv", "fields_plus.csv", "fields_minus.csv",
                 "summary.txt", "config.echo", "stages.csv"):
        assert (out / name).exists(), name
    for name in ("detectors.csv", "spinwave.csv", "fields_plus.csv", "stages.csv"):
        assert (out / name).read_text().startswith("#"), name
    summary = read_summary(out)
    assert float(summary["bright_rate_fit_per_us"]) == pytest.approx(R_BRIGHT_PAPER, rel=0.02)
    assert parse_config((out / "config.echo").read_text()) == parse_config(SMALL.format(phi=0))


def test_dark_run_reports_stationarity(tmp_path):
    out = tmp_path / "dark"
    assert main(["run", "--config", write_cfg(tmp_path, SMALL.format(phi="pi")),
                 "--out", str(out), "--quiet"]) == 0
    summary = read_summary(out)
    assert "stationarity_sl" in summary and "gamma_sl_fit_khz" in summary


def test_csv_layout(tmp_path):
    out = tmp_path / "r"
    main(["run", "--config", write_cfg(tmp_path, SMALL.format(phi=0)), "--out", str(out),
          "--quiet"])
    lines = (out / "spinwave.csv").read_text().splitlines()
    assert len(lines[1].split(",")) == 128
    assert len(lines[2].split(",")) == 1 + 2 * 128
    det = np.loadtxt(out / "detectors.csv", delimiter=",", comments="#")
    assert det.shape[1] == 7
    np.testing.assert_allclose(det[:, 3], det[:, 1] ** 2 + det[:, 2] ** 2, rtol=1e-12)


def test_outputs_are_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, SMALL.format(phi=1))
    for name in ("a", "b"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / name), "--quiet"]) == 0
    for f in ("detectors.csv", "spinwave.csv", "fields_minus.csv", "summary.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_empty_timeline(tmp_path):
    text = ("[params]\nd = 50\ndetuning_mhz = 100\n[grid]\nn_points = 32\n"
            "[scenario]\npreset = custom\ninitial = dual_gaussian\n")
    out = tmp_path / "empty"
    assert main(["run", "--config", write_cfg(tmp_path, text), "--out", str(out), "--quiet"]) == 0
    rows = (out / "spinwave.csv").read_text().splitlines()
    assert len(rows) == 3


def test_tier_override(tmp_path):
    out = tmp_path / "ideal"
    assert main(["run", "--config", write_cfg(tmp_path, SMALL.format(phi=0)), "--out", str(out),
                 "--tier", "ideal", "--quiet"]) == 0
    assert read_summary(out)["tier"] == "ideal"


def test_invalid_config_exits_1(tmp_path, capsys):
    bad = write_cfg(tmp_path, SMALL.format(phi=0) + "[run]\ntier = fast\n")
    assert main(["run", "--config", bad, "--out", str(tmp_path / "x")]) == 1
    assert "line" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path / "x")]) == 1
    assert not (tmp_path / "x").exists()


def test_step_guard_exits_1_and_cleans_up(tmp_path):
    text = SMALL.format(phi=0).replace("dt = 0.02", "dt = 0.5").replace("duration = 6",
                                                                      "duration = 5")
    out = tmp_path / "fail"
    assert main(["run", "--config", write_cfg(tmp_path, text), "--out", str(out), "--quiet"]) == 1
    assert not out.exists()


def test_unwritable_output_exits_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert main(["run", "--config", write_cfg(tmp_path, SMALL.format(phi=0)),
                 "--out", str(blocker), "--quiet"]) == 2


def test_alignment_error_exits_1(tmp_path):
    text = SMALL.format(phi=0).replace("duration = 6", "duration = 6.005")
    assert main(["run", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path / "y"),
                 "--quiet"]) == 1


def test_sweep_structure_and_order(tmp_path):
    cfg = write_cfg(tmp_path, SMALL.format(phi=0).replace("duration = 6", "duration = 4"))
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", cfg, "--out", str(out), "--param", "params.omega_mhz",
                 "--values", "4.8,1.2,2.4", "--jobs", "2", "--quiet"]) == 0
    subdirs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert len(subdirs) == 3
    lines = (out / "sweep_summary.csv").read_text().splitlines()
    assert len(lines) == 4 and lines[0].startswith("# index,params.omega_mhz,status")
    assert [line.split(",")[1] for line in lines[1:]] == ["4.7999999999999998", "1.2",
                                                          "2.3999999999999999"]
    header = lines[0][2:].split(",")
    col = header.index("r_bright_per_us")
    r = [float(line.split(",")[col]) for line in lines[1:]]
    assert r[0] / r[2] == pytest.approx(4.0) and r[1] / r[2] == pytest.approx(0.25)


def test_sweep_over_depth_scales_bright_rate(tmp_path):
    cfg = write_cfg(tmp_path, SMALL.format(phi=0).replace("duration = 6", "duration = 4"))
    out = tmp_path / "sweep_d"
    assert main(["sweep", "--config", cfg, "--out", str(out), "--param", "params.d",
                 "--values", "100,200,400", "--quiet"]) == 0
    lines = (out / "sweep_summary.csv").read_text().splitlines()
    header = lines[0][2:].split(",")
    col = header.index("bright_rate_fit_per_us")
    d = np.array([100.0, 200.0, 400.0])
    rate = np.array([float(line.split(",")[col]) for line in lines[1:]])
    slope = np.polyfit(np.log(d), np.log(rate), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.03)


def test_sweep_failure_is_isolated(tmp_path):
    cfg = write_cfg(tmp_path, SMALL.format(phi=0).replace("duration = 6", "duration = 2"))
    out = tmp_path / "sweep_fail"
    # the second value trips the step-size guard
    assert main(["sweep", "--config", cfg, "--out", str(out), "--param", "params.omega_mhz",
                 "--values", "2.4,40", "--quiet"]) == 2
    lines = (out / "sweep_summary.csv").read_text().splitlines()
    assert lines[1].split(",")[2] == "ok" and lines[2].split(",")[2] == "error"


def test_sweep_rejects_text_parameter(tmp_path):
    cfg = write_cfg(tmp_path, SMALL.format(phi=0))
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s"), "--param", "run.tier",
                 "--values", "1", "--quiet"]) == 1


def test_analyze_recomputes_summary(tmp_path):
    out = tmp_path / "an"
    main(["run", "--config", write_cfg(tmp_path, SMALL.format(phi=0)), "--out", str(out),
          "--quiet"])
    assert main(["analyze", "--out", str(out), "--quiet"]) == 0
    original = read_summary(out)
    again = dict(line.split("=", 1) for line in (out / "analysis.txt").read_text().splitlines()
                 if not line.startswith("#"))
    for key in ("bright_rate_fit_per_us", "stationarity_sl", "integrated_amplitude_final"):
        assert float(again[key]) == pytest.approx(float(original[key]), rel=1e-12)
    record, _ = load_record(out)
    assert record.s_history.shape[1] == 128


def test_image_reduce(tmp_path):
    frames = []
    rng = np.random.default_rng(0)
    for i in range(3):
        path = tmp_path / f"ref{i}.pgm"
        imaging.write_pgm(path, imaging.IntensityImage(rng.integers(900, 1100, (4, 6))))
        frames.append(str(path))
    # identical reference and shadow sets reduce to an all-zero map
    out = tmp_path / "img"
    assert main(["image", "reduce", "--reference", *frames, "--shadow", *frames,
                 "--out", str(out), "--quiet"]) == 0
    assert not np.any(imaging.read_map_csv(out / "spinwave_map.csv"))


def test_image_reduce_mismatch(tmp_path):
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    imaging.write_pgm(a, imaging.IntensityImage(np.ones((2, 2))))
    imaging.write_pgm(b, imaging.IntensityImage(np.ones((2, 3))))
    assert main(["image", "reduce", "--reference", str(a), "--shadow", str(b),
                 "--out", str(tmp_path / "o"), "--quiet"]) == 1


def test_image_roundtrip(tmp_path, capsys):
    out = tmp_path / "rt"
    assert main(["image", "roundtrip", "--out", str(out)]) == 0
    err = float((out / "roundtrip.txt").read_text().split("max_error=")[1])
    assert err < 1e-12
    assert "max_error" in capsys.readouterr().out


def test_paper_fig3_config_builds_preset():
    cfg = parse_config((CONFIGS / "paper_fig3.cfg").read_text())
    cfg.grid["n_points"] = 128
    sim = build_simulation(cfg)
    names = [s.name for s in sim["timeline"].stages]
    assert names == ["write", "rephase", "sl", "dephase", "recall"]
    assert sim["params"].eta == pytest.approx(2 * math.pi * 0.18)
    sl = sim["timeline"].stages[2]
    assert sl.duration == 40.0 and sl.dual_control
