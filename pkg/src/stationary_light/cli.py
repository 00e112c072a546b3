"""Command-line front end.

    stationary-light run     --config FILE --out DIR [--tier NAME] [--quiet]
    stationary-light sweep   --config FILE --out DIR [--param section.key --values a,b,c] [--jobs N]
    stationary-light image   reduce --reference A.pgm [...] --shadow B.pgm [...] --out DIR
    stationary-light image   roundtrip [--size N] [--k K] [--seed S] [--out DIR]
    stationary-light analyze --out DIR

Exit codes: 0 success, 1 invalid input, 2 runtime or numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, imaging
from .config import ConfigError, RunConfig, parse_config, parse_number
from .dynamics import BalanceTrace, Grid, SimulationRecord, run
from .field_solver import NumericError
from .model import (PAPER_OMEGA, PER_MHZ, ControlDrive, ParameterError, PhysicalParams,
                    build_params, control_amplitudes)
from .scenario import (ProbePulse, Stage, Timeline, fig3_params, fig3_timeline,
                       make_dual_gaussian_spinwave, sl_timeline, uniform_spinwave)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
OUTPUT_FILES = ("detectors.csv", "spinwave.csv", "fields_plus.csv", "fields_minus.csv",
                "stages.csv", "summary.txt", "config.echo")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------- config -> simulation

def _physical(cfg: RunConfig) -> tuple[PhysicalParams, tuple[float, float]]:
    values = {k: v for k, v in cfg.params.items()}
    params = build_params(values)
    if any(k in values for k in ("omega_mhz", "omega_plus_mhz", "omega_minus_mhz")):
        controls = control_amplitudes(values)
    else:
        controls = (PAPER_OMEGA, PAPER_OMEGA)
    return params, controls


def _initial(sc: dict, n_points: int):
    kind = sc.get("initial", "zero")
    if kind == "zero":
        return None
    if kind == "uniform":
        return uniform_spinwave(sc["amplitude"], n_points)
    return make_dual_gaussian_spinwave(sc["centers"], sc["width"], sc["phi"], sc["amplitude"],
                                       n_points)


def _pulse(body: dict) -> ProbePulse:
    om = body.get("omega_minus_sb_mhz")
    return ProbePulse(body["amplitude"], body["tau"], body["center_time"],
                      body["omega_plus_sb_mhz"] * PER_MHZ,
                      None if om is None else om * PER_MHZ, body["relative_phase"])


def build_simulation(cfg: RunConfig):
    """Everything ``run`` needs, resolved from a parsed configuration."""
    params, controls = _physical(cfg)
    grid = Grid(cfg.grid["n_points"], cfg.grid["dt"], cfg.grid["sample_stride"])
    tier, dispersion, decay = cfg.run["tier"], cfg.run["dispersion"], cfg.run["decay"]
    sc = cfg.scenario
    preset = sc["preset"]
    init = None
    if preset == "sl":
        timeline = sl_timeline(controls[0], controls[1], sc["duration"])
        init = _initial(sc, grid.n_points)
    elif preset == "fig3":
        params = fig3_params(params)
        timeline = fig3_timeline(params, sc["phi"], controls[0], sc["backward"], sc["t_sl"],
                                 sc["t_recall"], tier, dispersion, sc["calibrate"],
                                 grid.n_points, grid.dt)
    else:
        pulse = _pulse(cfg.pulse) if cfg.pulse is not None else None
        stages = []
        for name, body in cfg.stages:
            fwd = pulse if body["input"] == "forward" else None
            bwd = pulse if body["input"] == "backward" else None
            stages.append(Stage(name, body["duration"],
                                ControlDrive(tuple(v * PER_MHZ for v in body["omega_plus_mhz"]),
                                             tuple(v * PER_MHZ for v in body["omega_minus_mhz"])),
                                body["eta_active"], fwd, bwd))
        timeline = Timeline(tuple(stages))
        init = _initial(sc, grid.n_points)
    return dict(timeline=timeline, grid=grid, params=params, init=init, tier=tier,
                dispersion=dispersion, decay=decay, controls=controls)


def simulate(cfg: RunConfig):
    sim = build_simulation(cfg)
    record = run(sim["timeline"], sim["grid"], sim["params"], sim["init"], sim["tier"],
                 sim["dispersion"], sim["decay"])
    summary = analysis.summary(record, sim["params"], *sim["controls"])
    return record, summary


# ---------------------------------------------------------------- writers

def write_detectors(path, record: SimulationRecord):
    with open(path, "w") as fh:
        fh.write("# t_us,fwd_re,fwd_im,fwd_abs2,bwd_re,bwd_im,bwd_abs2\n")
        for t, f, b in zip(record.detector_times, record.detector_fwd, record.detector_bwd):
            fh.write(",".join(_fmt(v) for v in (t, f.real, f.imag, abs(f) ** 2,
                                                  b.real, b.imag, abs(b) ** 2)) + "\n")


def write_profiles(path, xi, times, rows, label: str):
    with open(path, "w") as fh:
        fh.write(f"# {label}: first row xi grid (N values); then t_us followed by re,im for each xi\n")
        fh.write(",".join(_fmt(x) for x in xi) + "\n")
        for t, row in zip(times, rows):
            pairs = np.empty(2 * row.size)
            pairs[0::2] = row.real
            pairs[1::2] = row.imag
            fh.write(_fmt(t) + "," + ",".join(_fmt(v) for v in pairs) + "\n")


def write_stages(path, record: SimulationRecord):
    with open(path, "w") as fh:
        fh.write("# name,t_start_us,t_end_us\n")
        for name, t0, t1 in record.stages:
            fh.write(f"{name},{_fmt(t0)},{_fmt(t1)}\n")


def write_summary(path, summary: dict):
    with open(path, "w") as fh:
        fh.write("# key=value analysis summary\n")
        for key, value in summary.items():
            text = _fmt(value) if isinstance(value, float) else str(value)
            fh.write(f"{key}={text}\n")


def write_outputs(out: Path, record, summary, cfg: RunConfig):
    out.mkdir(parents=True, exist_ok=True)
    write_detectors(out / "detectors.csv", record)
    write_profiles(out / "spinwave.csv", record.xi, record.times, record.s_history, "spinwave S")
    write_profiles(out / "fields_plus.csv", record.xi, record.times, record.e_plus_history,
                   "forward probe E+")
    write_profiles(out / "fields_minus.csv", record.xi, record.times, record.e_minus_history,
                   "backward probe E-")
    write_stages(out / "stages.csv", record)
    write_summary(out / "summary.txt", summary)
    (out / "config.echo").write_text(cfg.to_text())


def _remove_partial(out: Path, created: bool):
    if created and out.exists():
        shutil.rmtree(out, ignore_errors=True)
        return
    for name in OUTPUT_FILES:
        (out / name).unlink(missing_ok=True)


# ---------------------------------------------------------------- readers (analyze)

def read_profiles(path):
    rows = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, skiprows=2)
    with open(path) as fh:
        fh.readline()
        xi = np.array([float(v) for v in fh.readline().split(",")])
    times = rows[:, 0]
    values = rows[:, 1::2] + 1j * rows[:, 2::2]
    return xi, times, values


def load_record(out: Path) -> tuple[SimulationRecord, RunConfig]:
    cfg = parse_config((out / "config.echo").read_text())
    xi, times, s = read_profiles(out / "spinwave.csv")
    _, _, ep = read_profiles(out / "fields_plus.csv")
    _, _, em = read_profiles(out / "fields_minus.csv")
    det = np.loadtxt(out / "detectors.csv", delimiter=",", comments="#", ndmin=2)
    stages = []
    with open(out / "stages.csv") as fh:
        for row in csv.reader(line for line in fh if not line.startswith("#")):
            stages.append((row[0], float(row[1]), float(row[2])))
    params, _ = _physical(cfg)
    if cfg.scenario["preset"] == "fig3":
        params = fig3_params(params)
    norms = np.array([float(analysis.integrate(np.abs(row) ** 2).real) for row in s])
    nan = np.full(times.size, np.nan)
    record = SimulationRecord(
        tier=cfg.run["tier"], dispersion=cfg.run["dispersion"], xi=xi, times=times,
        s_history=s, e_plus_history=ep, e_minus_history=em,
        detector_times=det[:, 0], detector_fwd=det[:, 1] + 1j * det[:, 2],
        detector_bwd=det[:, 4] + 1j * det[:, 5],
        balance=BalanceTrace(times, norms, nan, nan, nan), stages=stages,
        params_echo={k: getattr(params, k) for k in params.__dataclass_fields__})
    return record, cfg


# ---------------------------------------------------------------- commands

def _say(quiet: bool, *msg):
    if not quiet:
        print(*msg)


def _load_config(path, tier: str | None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    cfg = parse_config(text)
    if tier is not None:
        cfg.run["tier"] = tier
    return cfg


def run_command(cfg: RunConfig, out, quiet: bool = False) -> int:
    out = Path(out)
    created = not out.exists()
    try:
        record, summary = simulate(cfg)
        write_outputs(out, record, summary, cfg)
    except (ConfigError, ParameterError) as exc:
        _remove_partial(out, created)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # numerical or I/O failure inside the run
        _remove_partial(out, created)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _say(quiet, f"wrote {out}")
    for key in ("r_bright_per_us", "bright_rate_fit_per_us", "gamma_sl_khz", "gamma_sl_fit_khz",
                "stationarity_sl", "balance_residual"):
        if key in summary:
            _say(quiet, f"  {key} = {summary[key]:.6g}")
    return EXIT_OK


def _sweep_one(args):
    text, parameter, value, out = args
    cfg = parse_config(text).with_value(parameter, value)
    try:
        code = run_command(cfg, out, quiet=True)
    except Exception as exc:
        return "error", {"message": str(exc)}
    if code != EXIT_OK:
        return "error", {}
    summary = {}
    for line in (Path(out) / "summary.txt").read_text().splitlines():
        if line and not line.startswith("#"):
            key, _, value_text = line.partition("=")
            summary[key] = value_text
    return "ok", summary


def sweep_dir_name(index: int, parameter: str, value: float) -> str:
    return f"{index:03d}_{parameter.replace('.', '_')}_{value:.6g}"


def sweep_command(cfg: RunConfig, out, parameter: str, values, jobs: int = 1,
                  quiet: bool = False) -> int:
    out = Path(out)
    # validate the parameter once before fanning out
    cfg.with_value(parameter, values[0])
    out.mkdir(parents=True, exist_ok=True)
    text = cfg.to_text()
    tasks = [(text, parameter, v, str(out / sweep_dir_name(i, parameter, v)))
             for i, v in enumerate(values)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]

    keys = []
    for _, summary in results:
        for k in summary:
            if k not in keys and k != "message":
                keys.append(k)
    with open(out / "sweep_summary.csv", "w") as fh:
        fh.write("# " + ",".join(["index", parameter, "status"] + keys) + "\n")
        for i, (v, (status, summary)) in enumerate(zip(values, results)):
            fh.write(",".join([str(i), _fmt(v), status] + [summary.get(k, "") for k in keys]) + "\n")
    failed = sum(status != "ok" for status, _ in results)
    _say(quiet, f"wrote {len(values)} runs to {out} ({failed} failed)")
    return EXIT_RUNTIME if failed else EXIT_OK


def image_command(args) -> int:
    if args.mode == "reduce":
        if not args.reference or not args.shadow:
            print("error: reduce needs --reference and --shadow frames", file=sys.stderr)
            return EXIT_INVALID
        i0 = imaging.average_frames(imaging.read_pgm(p) for p in args.reference)
        i = imaging.average_frames(imaging.read_pgm(p) for p in args.shadow)
        result = imaging.infer_spinwave_map(i0, i, args.floor)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        imaging.write_map_csv(out / "spinwave_map.csv", result.values)
        (out / "reduce.txt").write_text(f"# key=value\nclamped_pixels={result.clamped}\n"
                                        f"height={result.values.shape[0]}\n"
                                        f"width={result.values.shape[1]}\n")
        _say(args.quiet, f"wrote {out / 'spinwave_map.csv'} ({result.clamped} clamped pixels)")
        return EXIT_OK
    rng = np.random.default_rng(args.seed)
    s_map = rng.uniform(0.0, 2.0, size=(args.size, args.size))
    i0, i = imaging.synthesize_images(s_map, 1000.0, args.k)
    result = imaging.infer_spinwave_map(i0, i)
    err = float(np.max(np.abs(result.values - math.sqrt(args.k) * s_map)))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "roundtrip.txt").write_text(f"# key=value\nmax_error={_fmt(err)}\n")
    _say(args.quiet, f"roundtrip max_error={err:.3g}")
    return EXIT_OK


def analyze_command(out, quiet: bool = False) -> int:
    out = Path(out)
    record, cfg = load_record(out)
    params = PhysicalParams(**record.params_echo)
    _, controls = _physical(cfg)
    summary = analysis.summary(record, params, *controls)
    summary.pop("balance_residual", None)
    write_summary(out / "analysis.txt", summary)
    if not quiet:
        for key, value in summary.items():
            print(f"{key}={_fmt(value) if isinstance(value, float) else value}")
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stationary-light",
                                     description="Stationary-light spinwave simulator")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="simulate one configuration")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--tier", choices=("ideal", "adiabatic", "three_level"))
    p_run.add_argument("--quiet", action="store_true")

    p_sweep = sub.add_parser("sweep", help="run one configuration over a list of values")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--param", help="section.key to vary (overrides [sweep])")
    p_sweep.add_argument("--values", help="comma-separated values (overrides [sweep])")
    p_sweep.add_argument("--jobs", type=int)
    p_sweep.add_argument("--tier", choices=("ideal", "adiabatic", "three_level"))
    p_sweep.add_argument("--quiet", action="store_true")

    p_img = sub.add_parser("image", help="absorption-image reduction")
    p_img.add_argument("mode", choices=("reduce", "roundtrip"))
    p_img.add_argument("--reference", nargs="+", help="I0 frames (plain graymap)")
    p_img.add_argument("--shadow", nargs="+", help="I frames (plain graymap)")
    p_img.add_argument("--floor", type=float, default=1e-12)
    p_img.add_argument("--size", type=int, default=32)
    p_img.add_argument("--k", type=float, default=2.0)
    p_img.add_argument("--seed", type=int, default=0)
    p_img.add_argument("--out")
    p_img.add_argument("--quiet", action="store_true")

    p_an = sub.add_parser("analyze", help="recompute the summary from an output directory")
    p_an.add_argument("--out", required=True)
    p_an.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            return run_command(_load_config(args.config, args.tier), args.out, args.quiet)
        if args.verb == "sweep":
            cfg = _load_config(args.config, args.tier)
            spec = cfg.sweep or {}
            parameter = args.param or spec.get("parameter")
            if args.values is not None:
                values = [parse_number(v) for v in args.values.split(",") if v.strip()]
            else:
                values = list(spec.get("values", ()))
            if not parameter or not values:
                raise ConfigError("sweep needs a parameter and values ([sweep] section or "
                                  "--param/--values)")
            jobs = args.jobs or spec.get("jobs", 1)
            return sweep_command(cfg, args.out, parameter, values, jobs, args.quiet)
        if args.verb == "image":
            if args.out is None and args.mode == "reduce":
                raise ConfigError("image reduce needs --out")
            return image_command(args)
        return analyze_command(args.out, args.quiet)
    except (ConfigError, ParameterError, imaging.ImageFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, NumericError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
