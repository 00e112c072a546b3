"""Initial spinwaves, probe pulses and staged timelines.

Builders here are pure; the only exception is :func:`fig3_timeline`, which
calibrates the programmed sideband phase by running the write stage once
per sideband (the same way the phase is tuned on the experiment).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .field_solver import DEFAULT_POINTS, SpinwaveProfile, xi_grid
from .model import (PAPER_OMEGA, PER_MHZ, ControlDrive, ParameterError,
                    PhysicalParams, stark_shift)


class LeakWarning(RuntimeWarning):
    """Initial spinwave is not negligible at the ensemble faces."""


@dataclass(frozen=True)
class ProbePulse:
    """Gaussian probe with one or two carrier sidebands.

    The envelope is ``exp(-(t - t_c)^2 / (4 tau^2))`` so ``tau`` is the rms
    duration of the intensity.  ``omega_minus_sb=None`` gives a
    single-sideband pulse.
    """

    amplitude: complex = 1.0
    tau: float = 1.0
    center_time: float = 0.0
    omega_plus_sb: float = 0.0
    omega_minus_sb: float | None = None
    relative_phase: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ParameterError(f"pulse tau must be positive, got {self.tau}")

    @property
    def bandwidth(self) -> float:
        """rms spectral width of one sideband's intensity, 1 / (2 tau)."""
        return 0.5 / self.tau

    @property
    def sidebands(self) -> tuple[float, ...]:
        if self.omega_minus_sb is None:
            return (self.omega_plus_sb,)
        return (self.omega_plus_sb, self.omega_minus_sb)

    def check_window(self, eta: float) -> bool:
        ok = all(abs(w) < abs(eta) / 2 for w in self.sidebands)
        if not ok:
            warnings.warn(f"pulse sidebands {self.sidebands} fall outside the gradient "
                          f"window |w| < {abs(eta) / 2:.4g}", RuntimeWarning, stacklevel=2)
        return ok

    def shifted(self, dw: float) -> "ProbePulse":
        """Same pulse with every carrier moved by ``dw``."""
        om = None if self.omega_minus_sb is None else self.omega_minus_sb + dw
        return ProbePulse(self.amplitude, self.tau, self.center_time,
                          self.omega_plus_sb + dw, om, self.relative_phase)

    def single(self, which: int) -> "ProbePulse":
        """One sideband on its own (0: plus, 1: minus), phase included."""
        if which == 0:
            return ProbePulse(self.amplitude, self.tau, self.center_time, self.omega_plus_sb)
        if self.omega_minus_sb is None:
            raise ParameterError("pulse has no second sideband")
        return ProbePulse(self.amplitude * np.exp(1j * self.relative_phase), self.tau,
                          self.center_time, self.omega_minus_sb)

    def with_phase(self, phi: float) -> "ProbePulse":
        return ProbePulse(self.amplitude, self.tau, self.center_time,
                          self.omega_plus_sb, self.omega_minus_sb, phi)

    def to_dict(self) -> dict:
        amp = complex(self.amplitude)
        return {"amplitude": [amp.real, amp.imag], "tau": self.tau,
                "center_time": self.center_time, "omega_plus_sb": self.omega_plus_sb,
                "omega_minus_sb": self.omega_minus_sb, "relative_phase": self.relative_phase}

    @classmethod
    def from_dict(cls, d: dict) -> "ProbePulse":
        re, im = d["amplitude"]
        return cls(complex(re, im), d["tau"], d["center_time"], d["omega_plus_sb"],
                   d["omega_minus_sb"], d["relative_phase"])


def pulse_envelope(pulse: ProbePulse, t):
    """Complex input envelope at time(s) ``t``."""
    u = np.asarray(t, dtype=float) - pulse.center_time
    env = pulse.amplitude * np.exp(-u * u / (4.0 * pulse.tau ** 2))
    carrier = np.exp(1j * pulse.omega_plus_sb * u)
    if pulse.omega_minus_sb is not None:
        carrier = carrier + np.exp(1j * pulse.relative_phase) * np.exp(1j * pulse.omega_minus_sb * u)
    out = env * carrier
    return complex(out) if np.ndim(out) == 0 else out


def pulse_energy(pulse: ProbePulse, n_sigma: float = 12.0, n: int = 20001) -> float:
    """Integral of |E(t)|^2 dt (dense trapezoid; the integrand is smooth and decays)."""
    t = np.linspace(pulse.center_time - n_sigma * pulse.tau,
                    pulse.center_time + n_sigma * pulse.tau, n)
    return float(np.trapezoid(np.abs(pulse_envelope(pulse, t)) ** 2, t))


@dataclass(frozen=True)
class Stage:
    """One segment of the timeline with fixed gradient and control schedule."""

    name: str
    duration: float
    controls: ControlDrive = field(default_factory=ControlDrive)
    eta_active: int = 0
    input_pulse: ProbePulse | None = None
    input_backward: ProbePulse | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ParameterError(f"stage {self.name!r}: duration must be positive, got {self.duration}")
        if self.eta_active not in (-1, 0, 1):
            raise ParameterError(f"stage {self.name!r}: eta_active must be -1, 0 or +1")
        if self.input_pulse is not None and self.input_backward is not None:
            raise ParameterError(f"stage {self.name!r}: at most one input pulse per stage")

    @property
    def dual_control(self) -> bool:
        return max(self.controls.omega_plus) > 0 and max(self.controls.omega_minus) > 0

    def to_dict(self) -> dict:
        return {
            "name": self.name, "duration": self.duration,
            "omega_plus": list(self.controls.omega_plus),
            "omega_minus": list(self.controls.omega_minus),
            "eta_active": self.eta_active,
            "input_pulse": None if self.input_pulse is None else self.input_pulse.to_dict(),
            "input_backward": None if self.input_backward is None else self.input_backward.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Stage":
        return cls(
            d["name"], d["duration"],
            ControlDrive(tuple(d["omega_plus"]), tuple(d["omega_minus"])),
            d["eta_active"],
            None if d.get("input_pulse") is None else ProbePulse.from_dict(d["input_pulse"]),
            None if d.get("input_backward") is None else ProbePulse.from_dict(d["input_backward"]),
        )


@dataclass(frozen=True)
class Timeline:
    stages: tuple[Stage, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.stages)

    def bounds(self) -> list[tuple[str, float, float]]:
        out, t = [], 0.0
        for s in self.stages:
            out.append((s.name, t, t + s.duration))
            t += s.duration
        return out

    def to_json(self) -> str:
        return json.dumps([s.to_dict() for s in self.stages], indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Timeline":
        return cls(tuple(Stage.from_dict(d) for d in json.loads(text)))


def gaussian(xi, center: float, width: float) -> np.ndarray:
    return np.exp(-((np.asarray(xi) - center) ** 2) / (2.0 * width ** 2))


def make_dual_gaussian_spinwave(centers=(0.3, 0.7), width: float = 0.05, phi: float = 0.0,
                                amplitude: complex = 1.0,
                                n_points: int = DEFAULT_POINTS) -> SpinwaveProfile:
    """Two unit-peak Gaussians of rms width ``width`` with relative phase ``phi``."""
    c1, c2 = centers
    if not 0 < c1 < c2 < 1:
        raise ParameterError(f"centers must satisfy 0 < c1 < c2 < 1, got {centers}")
    if not width > 0:
        raise ParameterError("width must be positive")
    xi = xi_grid(n_points)
    edge = max(gaussian(0.0, c1, width), gaussian(1.0, c2, width))
    if edge > 1e-6:
        warnings.warn(f"spinwave is {edge:.2g} of its peak at the faces; the dark-state "
                      "integral is no longer exact", LeakWarning, stacklevel=2)
    values = amplitude * (gaussian(xi, c1, width) + np.exp(1j * phi) * gaussian(xi, c2, width))
    return SpinwaveProfile(values)


def uniform_spinwave(value: complex = 1.0, n_points: int = DEFAULT_POINTS) -> SpinwaveProfile:
    return SpinwaveProfile(np.full(n_points, value, dtype=complex))


def sl_timeline(omega_plus: float, omega_minus: float, duration: float) -> Timeline:
    """Single stationary-light stage, no gradient."""
    return Timeline((Stage("sl", duration, ControlDrive.constant(omega_plus, omega_minus)),))


def paper_experiment(params: PhysicalParams, pulse: ProbePulse, t_write: float, t_sl: float,
                     t_recall: float, omega: float = PAPER_OMEGA, backward: bool = True,
                     t_rephase: float | None = None) -> Timeline:
    """GEM write, stationary light, GEM recall.

    The spinwave written under the gradient carries a linear phase chirp
    whose integral over the ensemble is the input amplitude at the end of
    the write, so it is rephased (gradient reversed, controls off) before
    the counter-propagating controls switch on and dephased again after
    them so the recall echo is complete.  ``t_rephase`` defaults to the time
    from the pulse centre to the end of the write.  ``t_sl = 0`` collapses
    the timeline to a plain GEM store and recall.
    """
    for name, value in (("t_write", t_write), ("t_recall", t_recall)):
        if not value > 0:
            raise ParameterError(f"{name} must be positive")
    if t_sl < 0:
        raise ParameterError("t_sl must be non-negative")
    if t_rephase is None:
        t_rephase = t_write - pulse.center_time
    fwd = ControlDrive.constant(omega, 0.0)
    stages = [Stage("write", t_write, fwd, +1, input_pulse=pulse)]
    if t_sl > 0:
        if t_rephase > 0:
            stages.append(Stage("rephase", t_rephase, ControlDrive(), -1))
        stages.append(Stage("sl", t_sl, ControlDrive.constant(omega, omega if backward else 0.0), 0))
        if t_rephase > 0:
            stages.append(Stage("dephase", t_rephase, ControlDrive(), +1))
    stages.append(Stage("recall", t_recall, fwd, -1))
    return Timeline(tuple(stages))


# Experiment defaults.  tau and the gradient span are not quoted; they are
# chosen so the two sidebands land at xi = 0.25 and 0.75 with rms width
# ~0.11 and the write absorbs >99 % of the pulse.
FIG3_TAU = 4.0
FIG3_CENTER = 36.0
FIG3_T_WRITE = 60.0
FIG3_T_SL = 40.0
FIG3_T_RECALL = 50.0
FIG3_ETA_MHZ = 0.18


def fig3_params(params: PhysicalParams | None = None) -> PhysicalParams:
    from .model import paper_params
    params = params or paper_params()
    if params.eta == 0:
        params = params.replace(eta=FIG3_ETA_MHZ * PER_MHZ)
    return params


def fig3_pulse(params: PhysicalParams, phi: float, tau: float = FIG3_TAU,
               center: float = FIG3_CENTER, light_shift: float = 0.0) -> ProbePulse:
    """Two-sideband pulse storing Gaussians at xi = 1/4 and 3/4.

    ``light_shift`` is the uniform two-photon shift present during the write;
    the carriers are offset by it so the stored pattern stays centred.
    """
    w0 = params.eta / 4.0
    return ProbePulse(1.0, tau, center, w0, -w0, phi).shifted(-light_shift)


def write_light_shift(params: PhysicalParams, omega: float, tier: str) -> float:
    if tier == "ideal":
        return 0.0
    return stark_shift(omega, params.delta_plus, params.Gamma)


def fig3_timeline(params: PhysicalParams, phi: float, omega: float = PAPER_OMEGA,
                  backward: bool = True, t_sl: float = FIG3_T_SL,
                  t_recall: float = FIG3_T_RECALL, tier: str = "adiabatic",
                  dispersion: str = "full", calibrate: bool = True,
                  n_points: int = DEFAULT_POINTS, dt: float = 0.05) -> Timeline:
    """The three-column experiment preset with stored relative phase ``phi``.

    With ``calibrate`` the programmed sideband phase is offset so that the
    stored spinwave is dark for ``phi = pi`` under the dual controls: the
    write is simulated once per sideband and the offset is the relative
    phase of their emitted bright amplitudes.
    """
    pulse = fig3_pulse(params, phi, light_shift=write_light_shift(params, omega, tier))
    timeline = paper_experiment(params, pulse, FIG3_T_WRITE, t_sl, t_recall, omega, backward)
    if calibrate and t_sl > 0:
        offset = sideband_phase_offset(params, timeline, omega, tier, dispersion, n_points, dt)
        pulse = pulse.with_phase(phi - offset)
        timeline = paper_experiment(params, pulse, FIG3_T_WRITE, t_sl, t_recall, omega, backward)
    return timeline


def sideband_phase_offset(params: PhysicalParams, timeline: Timeline, omega: float,
                          tier: str, dispersion: str, n_points: int, dt: float) -> float:
    """Phase picked up by the second sideband relative to the first on storage."""
    from .dynamics import Grid, run
    from .field_solver import field_coefficients, solve_with

    stages = timeline.stages
    idx = [s.name for s in stages].index("sl")
    pulse = stages[0].input_pulse
    grid = Grid(n_points, dt, sample_stride=10 ** 9)
    amps = []
    for which in (0, 1):
        sub = [s if s.input_pulse is None else Stage(s.name, s.duration, s.controls, s.eta_active,
                                                    pulse.with_phase(0.0).single(which))
               for s in stages[:idx]]
        rec = run(Timeline(tuple(sub)), grid, params, tier=tier, dispersion=dispersion)
        s_end = rec.s_history[-1]
        coeffs = field_coefficients(params, omega, omega,
                                    "none" if tier == "ideal" else dispersion)
        f = solve_with(s_end, coeffs)
        amps.append((f.out_plus, f.out_minus))
    (a1, b1), (a2, b2) = amps
    return float(np.angle(np.conj(a1) * a2 + np.conj(b1) * b2))
