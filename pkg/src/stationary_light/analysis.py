"""Derived quantities from simulation records.

Bright/dark split, integrated amplitude, decay fits, shape stationarity,
the Fourier picture of gradient-echo storage and the cross-phase
modulation budget.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .field_solver import DEFAULT_POINTS, SpinwaveProfile, integrate, xi_grid
from .model import ParameterError, PhysicalParams, derived_rates, rate_to_khz
from .scenario import ProbePulse, pulse_envelope


class UndefinedMetricError(ArithmeticError):
    pass


class DivergentIntegralError(ParameterError):
    pass


class DegenerateRatioWarning(RuntimeWarning):
    pass


def _values(s) -> np.ndarray:
    return s.values if isinstance(s, SpinwaveProfile) else np.asarray(s, dtype=complex)


# ---------------------------------------------------------------- bright / dark

def integrated_amplitude(s) -> complex:
    """Trapezoid integral of the spinwave over the ensemble."""
    return complex(integrate(_values(s)))


def bright_dark_decompose(s) -> tuple[complex, SpinwaveProfile]:
    """Split S into its mean (bright) and a zero-integral remainder (dark).

    With xi in [0, 1] the mean and the integral coincide.
    """
    values = _values(s)
    bright = integrated_amplitude(values)
    return bright, SpinwaveProfile(values - bright)


# ---------------------------------------------------------------- decay fits

@dataclass(frozen=True)
class DecayFit:
    rate: float
    amplitude: float
    stderr: float
    window: tuple[float, float]
    residual_rms: float

    def __post_init__(self):
        if not self.window[0] < self.window[1]:
            raise ParameterError(f"fit window must satisfy t_start < t_end, got {self.window}")


def fit_decay_rate(times, values, window=None, min_samples: int = 8) -> DecayFit:
    """Least-squares line through ln(values); the rate is minus the slope."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (float(times[0]), float(times[-1]))
    t0, t1 = window
    sel = (times >= t0) & (times <= t1)
    t, v = times[sel], values[sel]
    if t.size < min_samples:
        raise ParameterError(f"need at least {min_samples} samples in the fit window, got {t.size}")
    if np.any(v <= 0):
        raise ParameterError("values must be positive inside the fit window")
    (slope, intercept), cov = np.polyfit(t, np.log(v), 1, cov="unscaled")
    resid = np.log(v) - (slope * t + intercept)
    dof = max(t.size - 2, 1)
    sigma2 = float(resid @ resid) / dof
    stderr = math.sqrt(max(cov[0, 0] * sigma2, 0.0))
    return DecayFit(rate=-float(slope), amplitude=float(np.exp(intercept)), stderr=stderr,
                    window=(float(t[0]), float(t[-1])),
                    residual_rms=float(np.sqrt(np.mean(resid ** 2))))


def norm_series(record) -> tuple[np.ndarray, np.ndarray]:
    """Per-step spinwave norm integral |S|^2 (plus |P|^2 in the three-level tier)."""
    return record.balance.times, record.balance.stored


def amplitude_series(record) -> tuple[np.ndarray, np.ndarray]:
    """|integral of S| at every recorded sample."""
    return record.times, np.abs(integrate(record.s_history))


def dark_decay_fit(record, t_start: float, t_end: float | None = None) -> DecayFit:
    """Fit of the spinwave norm after the bright transient.

    The norm decays at twice the amplitude rate; ``DecayFit.rate / 2`` is
    the amplitude rate usually quoted.
    """
    t, v = norm_series(record)
    return fit_decay_rate(t, v, (t_start, t[-1] if t_end is None else t_end))


# ---------------------------------------------------------------- stationarity

def stationarity_metric(record, t1: float, t2: float) -> float:
    """L2 distance between the unit-normalised |S| profiles at two times."""
    a = np.abs(record.s_history[record.sample_at(t1)])
    b = np.abs(record.s_history[record.sample_at(t2)])
    na = math.sqrt(integrate(a * a).real)
    nb = math.sqrt(integrate(b * b).real)
    if na == 0 or nb == 0:
        raise UndefinedMetricError("stationarity is undefined for a zero spinwave")
    diff = a / na - b / nb
    return float(math.sqrt(integrate(diff * diff).real))


# ---------------------------------------------------------------- detectors

def detector_energy(record, t0: float, t1: float, which: str = "both") -> float:
    """G times the time integral of the detected probe power in [t0, t1]."""
    t = record.detector_times
    sel = (t >= t0 - 1e-9) & (t <= t1 + 1e-9)
    power = np.zeros(int(sel.sum()))
    if which in ("both", "fwd"):
        power = power + np.abs(record.detector_fwd[sel]) ** 2
    if which in ("both", "bwd"):
        power = power + np.abs(record.detector_bwd[sel]) ** 2
    if power.size < 2:
        return 0.0
    gamma = record.params_echo.get("Gamma", 1.0)
    return float(gamma * np.trapezoid(power, t[sel]))


def stage_energy(record, stage: str, which: str = "both") -> float:
    t0, t1 = record.stage_window(stage)
    return detector_energy(record, t0, t1, which)


def stage_slice(record, name: str) -> slice:
    """Detector samples belonging to one stage.

    A boundary time appears twice in the detector series (end of one stage,
    entry of the next under the new controls); the slice starts at the
    entry sample and stops at the exit sample.
    """
    t0, t1 = record.stage_window(name)
    t = record.detector_times
    tol = 1e-9 * max(1.0, abs(t1))
    start = int(np.nonzero(np.abs(t - t0) <= tol)[0][-1])
    stop = int(np.nonzero(np.abs(t - t1) <= tol)[0][0])
    return slice(start, stop + 1)


def local_maxima(series, rel_height: float = 1e-3, include_start: bool = False) -> np.ndarray:
    """Indices of local maxima higher than ``rel_height`` of the peak.

    With ``include_start`` a series that falls from its first sample counts
    that sample as a maximum.
    """
    y = np.asarray(series, dtype=float)
    if y.size < 3:
        return np.array([], dtype=int)
    floor = rel_height * y.max()
    inner = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]) & (y[1:-1] > floor)
    idx = np.nonzero(inner)[0] + 1
    if include_start and y[0] > y[1] and y[0] > floor:
        idx = np.concatenate([[0], idx])
    return idx


# ---------------------------------------------------------------- GEM Fourier picture

def gem_fourier_oracle(pulse: ProbePulse, eta: float, gamma: float,
                       n_points: int = DEFAULT_POINTS, t_eval: float | None = None,
                       log_phase: float = 0.0, n_sigma: float = 10.0,
                       n_time: int = 4001) -> SpinwaveProfile:
    """Stored spinwave predicted by the Fourier picture of gradient storage.

    S(xi) = sqrt(eta G / 2 pi) * integral exp(i eta (xi - 1/2) t) E(t) dt

    The prefactor makes the map unitary, so the integral of |S|^2 equals G
    times the pulse energy.  ``t_eval`` adds the chirp exp(-i eta (xi - 1/2)
    t_eval) the spinwave has accumulated by that time.

    ``log_phase`` (nu = r_bright / eta for one forward control) multiplies
    by xi^(-i nu).  That is the phase a frequency component collects while
    crossing the part of the ensemble in front of its resonance; it is the
    leading correction to the plain transform once the memory is optically
    thick, and does not change |S|.
    """
    if eta == 0:
        raise ParameterError("the Fourier picture needs a non-zero gradient")
    pulse.check_window(eta)
    xi = xi_grid(n_points)
    t = np.linspace(pulse.center_time - n_sigma * pulse.tau,
                    pulse.center_time + n_sigma * pulse.tau, n_time)
    e = pulse_envelope(pulse, t)
    w = np.full(n_time, t[1] - t[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    kernel = np.exp(1j * eta * np.outer(xi - 0.5, t))
    s = math.sqrt(abs(eta) * gamma / (2 * math.pi)) * (kernel @ (w * e))
    if t_eval is not None:
        s = s * np.exp(-1j * eta * (xi - 0.5) * t_eval)
    if log_phase:
        entry = xi if eta > 0 else 1.0 - xi
        s = s * np.exp(-1j * log_phase * np.log(np.maximum(entry, 1e-300)))
    return SpinwaveProfile(s)


def overlap(a, b) -> float:
    """|<a, b>| / (|a| |b|), insensitive to global phase and scale."""
    a, b = _values(a), _values(b)
    num = abs(integrate(np.conj(a) * b))
    den = math.sqrt(integrate(np.abs(a) ** 2).real * integrate(np.abs(b) ** 2).real)
    if den == 0:
        raise UndefinedMetricError("overlap with a zero profile")
    return float(num / den)


def partial_integral(values, a: float, b: float) -> float:
    """Trapezoid integral of samples over [a, b] with linear interpolation at the ends."""
    values = np.asarray(values, dtype=float)
    xi = xi_grid(values.size)
    inside = xi[(xi > a) & (xi < b)]
    xs = np.concatenate([[a], inside, [b]])
    return float(np.trapezoid(np.interp(xs, xi, values), xs))


def area_relation_check(s, pulse: ProbePulse, gamma: float, half: str = "full") -> float:
    """Measured over predicted stored excitation.

    ``full`` compares the whole ensemble with G times the pulse energy;
    ``lower``/``upper`` compare one half with half of it, which holds when
    the two sidebands are stored in separate halves.
    """
    from .scenario import pulse_energy
    spans = {"lower": (0.0, 0.5), "upper": (0.5, 1.0), "full": (0.0, 1.0)}
    if half not in spans:
        raise ParameterError(f"half must be one of {tuple(spans)}, got {half!r}")
    a, b = spans[half]
    measured = partial_integral(np.abs(_values(s)) ** 2, a, b)
    predicted = gamma * pulse_energy(pulse) * (b - a)
    if predicted == 0:
        warnings.warn("zero pulse: area ratio 0/0 reported as 1", DegenerateRatioWarning, stacklevel=2)
        return 1.0
    return measured / predicted


# ---------------------------------------------------------------- cross-phase modulation

@dataclass(frozen=True)
class XpmParams:
    gamma: float
    delta_s: float
    sigma_over_a: float
    d: float
    omega_c: float = 1.0
    delta_c: float = 100.0

    def __post_init__(self):
        if self.delta_s == 0:
            raise ParameterError("delta_s must be non-zero")
        if not self.sigma_over_a > 0:
            raise ParameterError("sigma_over_a must be positive")
        if self.delta_c == 0:
            raise ParameterError("delta_c must be non-zero")


def xpm_phase_closed(p: XpmParams) -> float:
    return -(p.gamma / p.delta_s) * p.sigma_over_a * p.d / 32.0


def signal_rabi_squared(p: XpmParams, t, t0: float = 0.0):
    """Stationary signal intensity, decaying at 4 G W_c^2 / D_c^2 from t0."""
    ratio = (p.omega_c / p.delta_c) ** 2
    pref = p.d * p.sigma_over_a * p.gamma ** 2 / 2.0 * ratio
    return pref * np.exp(4.0 * p.gamma * ratio * (t0 - np.asarray(t)))


def xpm_phase_numeric(p: XpmParams, t0: float = 0.0, rel_floor: float = 1e-12) -> float:
    """Time integral of the light shift -W_s^2 / (4 D_s) from t0 onwards.

    Integrated adaptively up to where the integrand has fallen to
    ``rel_floor`` of its initial value.
    """
    if p.omega_c <= 0:
        raise DivergentIntegralError("omega_c = 0: no stationary light, the signal never decays "
                                     "and the phase integral diverges")
    rate = 4.0 * p.gamma * (p.omega_c / p.delta_c) ** 2
    if rate <= 0:
        raise DivergentIntegralError("signal decay rate is zero; the phase integral diverges")
    t_end = t0 + math.log(1.0 / rel_floor) / rate

    def light_shift(t):
        return -signal_rabi_squared(p, t, t0) / (4.0 * p.delta_s)

    scale = abs(light_shift(t0)) / rate
    value, _ = quad(light_shift, t0, t_end, epsabs=1e-9 * scale, epsrel=1e-12, limit=200)
    return float(value)


RB87_WAVELENGTH = 780e-9


def paper_xpm_params(waist: float = 13e-6, strength: float = 0.5, d: float = 200.0,
                     gamma: float = 3.0 * 2 * math.pi, delta_over_gamma: float = 2.0,
                     omega_c: float = 2.4 * 2 * math.pi,
                     delta_c: float = 160.0 * 2 * math.pi) -> XpmParams:
    """Effective XPM parameters for a rubidium ensemble focused to ``waist``.

    The cross-section is the resonant two-level value 3 lambda^2 / 2 pi
    scaled by a relative transition ``strength``.
    """
    sigma = 3.0 * RB87_WAVELENGTH ** 2 / (2 * math.pi) * strength
    area = math.pi * waist ** 2
    return XpmParams(gamma, delta_over_gamma * gamma, sigma / area, d, omega_c, delta_c)


# ---------------------------------------------------------------- summary

def summary(record, params: PhysicalParams, omega_plus: float, omega_minus: float) -> dict:
    """Flat key=value block for reports."""
    out = {"tier": record.tier, "dispersion": record.dispersion}
    try:
        rates = derived_rates(params, omega_plus, omega_minus)
        out["r_bright_per_us"] = rates.r_bright
        out["gamma_sl_khz"] = rate_to_khz(rates.gamma_sl)
        out["gamma_prime_per_us"] = rates.gamma_prime
        r = rates.r_bright
    except ParameterError:
        r = 0.0
    out["t_end_us"] = float(record.detector_times[-1])
    out["norm_initial"] = float(record.balance.stored[0])
    out["norm_final"] = float(record.balance.stored[-1])
    out["balance_residual"] = (record.balance.relative_residual()
                               if np.all(np.isfinite(record.balance.loss)) else float("nan"))
    m = integrate(record.s_history)
    out["integrated_amplitude_initial"] = float(abs(m[0]))
    out["integrated_amplitude_final"] = float(abs(m[-1]))
    for name, t0, t1 in record.stages:
        out[f"energy_{name}_fwd"] = detector_energy(record, t0, t1, "fwd")
        out[f"energy_{name}_bwd"] = detector_energy(record, t0, t1, "bwd")
    sl = [(t0, t1) for name, t0, t1 in record.stages if name == "sl"]
    if r > 0 and sl:
        sl0, sl1 = sl[0]
        # bright burst: |integral of S| over the first 3 / r of the stage
        t, amp = amplitude_series(record)
        i0 = record.sample_at(sl0)
        norm0 = math.sqrt(max(integrate(np.abs(record.s_history[i0]) ** 2).real, 0.0))
        if amp[i0] > 1e-6 * norm0:
            try:
                fit = fit_decay_rate(t, amp, (sl0, min(sl0 + 3.0 / r, sl1)))
                out["bright_rate_fit_per_us"] = fit.rate
                out["bright_rate_fit_stderr"] = fit.stderr
            except ParameterError:
                pass
        # long-time dark decay
        start, stop = sl0 + 3.0 / r, sl1
        if stop > start:
            try:
                fit = dark_decay_fit(record, start, stop)
                out["dark_norm_rate_khz"] = rate_to_khz(fit.rate)
                out["gamma_sl_fit_khz"] = rate_to_khz(fit.rate / 2.0)
                out["gamma_sl_fit_stderr_khz"] = rate_to_khz(fit.stderr / 2.0)
            except ParameterError:
                pass
            try:
                out["stationarity_after_transient"] = stationarity_metric(record, start, stop)
            except UndefinedMetricError:
                pass
        try:
            out["stationarity_sl"] = stationarity_metric(record, sl0, sl1)
        except UndefinedMetricError:
            pass
    return out
