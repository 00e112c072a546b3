"""Grid and time-step convergence tables.

Writes two CSV files:

    convergence_space.csv   field error vs n_points (second order expected)
    convergence_time.csv    spinwave error vs dt against the closed form (RK4)

    python scripts/convergence.py --out out/convergence
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from stationary_light.dynamics import Grid, ideal_closed_form, run
from stationary_light.field_solver import field_coefficients, solve_direction, xi_grid
from stationary_light.model import PAPER_OMEGA, derived_rates, paper_params
from stationary_light.scenario import make_dual_gaussian_spinwave, sl_timeline

SPACE_POINTS = (33, 65, 129, 257, 513)
FINE_POINTS = 2 ** 14 + 1
TIME_STEPS = (0.1, 0.05, 0.025, 0.0125)
T_END = 6.0


def smooth_profile(xi):
    return np.exp(-((xi - 0.4) ** 2) / 0.02) * np.exp(3j * xi) + 0.3 * np.sin(np.pi * xi)


def space_table(points=SPACE_POINTS):
    """Max forward-field error against a 2^14-interval solve, per grid size."""
    params = paper_params()
    c = field_coefficients(params, PAPER_OMEGA, PAPER_OMEGA, "full")
    ref = solve_direction(smooth_profile(xi_grid(FINE_POINTS)), c.alpha_plus, c.beta_plus,
                          0.2, "forward")
    rows = []
    for n in points:
        e = solve_direction(smooth_profile(xi_grid(n)), c.alpha_plus, c.beta_plus, 0.2, "forward")
        err = float(np.max(np.abs(e - ref[::(FINE_POINTS - 1) // (n - 1)])))
        rows.append((n, 1.0 / (n - 1), err))
    return _with_ratios(rows)


def time_table(steps=TIME_STEPS, n_points=256):
    """Max spinwave error over [0, T_END] against the closed form, per dt."""
    params = paper_params()
    r = derived_rates(params, PAPER_OMEGA, PAPER_OMEGA).r_bright
    s0 = make_dual_gaussian_spinwave(phi=0.0, n_points=n_points)
    rows = []
    for dt in steps:
        rec = run(sl_timeline(PAPER_OMEGA, PAPER_OMEGA, T_END), Grid(n_points, dt, 1), params,
                  s0, tier="ideal", decay=False)
        exact = ideal_closed_form(s0, r, rec.times)
        err = float(np.max(np.abs(rec.s_history - exact)))
        rows.append((dt, r * dt, err))
    return _with_ratios(rows)


def _with_ratios(rows):
    out = []
    for i, row in enumerate(rows):
        ratio = rows[i - 1][-1] / row[-1] if i else float("nan")
        out.append(row + (ratio,))
    return out


def write_table(path, header, rows):
    with open(path, "w") as fh:
        fh.write("# " + ",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row) + "\n")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/convergence")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    space = space_table()
    time = time_table()
    write_table(out / "convergence_space.csv", ("n_points", "h", "max_error", "ratio"), space)
    write_table(out / "convergence_time.csv", ("dt_us", "r_dt", "max_error", "ratio"), time)
    for name, rows in (("space", space), ("time", time)):
        print(name)
        for row in rows:
            print("  " + "  ".join(f"{v:.4g}" for v in row))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
