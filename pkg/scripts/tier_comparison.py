"""Three-level vs adiabatic spinwave histories as the detuning shrinks.

Fixed control Rabi frequency, no ground-state decay, equal-phase
two-Gaussian start and an empty excited state.  Both tiers sample the
same 50 instants; the table holds the relative L2 distance of the two
histories per detuning.

    python scripts/tier_comparison.py --out out/tiers
"""

from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np

from stationary_light.dynamics import Grid, run
from stationary_light.model import PAPER_OMEGA, derived_rates, paper_params
from stationary_light.scenario import make_dual_gaussian_spinwave, sl_timeline

RATIOS = (53.33, 35.0, 20.0, 10.0, 5.0)
DURATION = 3.5
SAMPLES = 50
THREE_LEVEL_DT = 5e-4


def compare(ratio, n_points=256, duration=DURATION, omega=PAPER_OMEGA):
    base = paper_params(gamma0_hz=0)
    detuning = ratio * base.Gamma
    params = base.replace(delta_plus=detuning, delta_minus=-detuning)
    r = derived_rates(params, omega, omega).r_bright
    s0 = make_dual_gaussian_spinwave(phi=0.0, n_points=n_points)
    timeline = sl_timeline(omega, omega, duration)
    n_ad = SAMPLES * math.ceil(duration / (0.05 / (r + 1)) / SAMPLES)
    n_3 = SAMPLES * math.ceil(duration / THREE_LEVEL_DT / SAMPLES)
    ad = run(timeline, Grid(n_points, duration / n_ad, n_ad // SAMPLES), params, s0,
             tier="adiabatic")
    three = run(timeline, Grid(n_points, duration / n_3, n_3 // SAMPLES), params, s0,
                tier="three_level")
    err = np.linalg.norm(three.s_history - ad.s_history) / np.linalg.norm(ad.s_history)
    return r, float(err)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/tiers")
    ap.add_argument("--ratios", type=float, nargs="+", default=list(RATIOS),
                    help="detuning in units of the linewidth")
    ap.add_argument("--n-points", type=int, default=256)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "tier_comparison.csv", "w") as fh:
        fh.write("# delta_over_gamma,r_bright_per_us,relative_l2\n")
        for ratio in args.ratios:
            r, err = compare(ratio, args.n_points)
            fh.write(f"{ratio:.10g},{r:.10g},{err:.10g}\n")
            print(f"D/G = {ratio:6.2f}  r_bright = {r:8.3f}/us  relative L2 = {err:.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
