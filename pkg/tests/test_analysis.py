import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stationary_light.analysis import (DegenerateRatioWarning, DivergentIntegralError,
                                       UndefinedMetricError, XpmParams, area_relation_check,
                                       bright_dark_decompose, detector_energy, fit_decay_rate,
                                       gem_fourier_oracle, integrated_amplitude, local_maxima,
                                       overlap, paper_xpm_params, partial_integral,
                                       stationarity_metric, summary, xpm_phase_closed,
                                       xpm_phase_numeric)
from stationary_light.dynamics import Grid, run
from stationary_light.field_solver import integrate, xi_grid
from stationary_light.model import ParameterError
from stationary_light.scenario import (ProbePulse, make_dual_gaussian_spinwave, pulse_energy,
                                       sl_timeline)

from conftest import GAMMA_SL_PAPER, R_BRIGHT_PAPER


# ---------------------------------------------------------------- decomposition

def test_uniform_is_all_bright():
    bright, dark = bright_dark_decompose(np.full(64, 0.3 - 0.2j))
    assert bright == pytest.approx(0.3 - 0.2j)
    np.testing.assert_allclose(dark.values, 0, atol=1e-15)


def test_antisymmetric_is_all_dark():
    s = make_dual_gaussian_spinwave(phi=math.pi)
    bright, dark = bright_dark_decompose(s)
    assert abs(bright) < 1e-9 * np.max(np.abs(s.values))
    np.testing.assert_allclose(dark.values, s.values, atol=1e-9)


@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                min_size=16, max_size=40))
def test_decomposition_reconstructs(values):
    s = np.array(values)
    bright, dark = bright_dark_decompose(s)
    np.testing.assert_allclose(bright + dark.values, s, atol=1e-12)
    assert abs(integrated_amplitude(dark)) < 1e-12 * (1 + np.max(np.abs(s)))


# ---------------------------------------------------------------- fits

def test_fit_exact_exponential():
    t = np.linspace(0, 3, 61)
    fit = fit_decay_rate(t, np.exp(-2 * t))
    assert abs(fit.rate - 2.0) < 1e-6
    assert fit.amplitude == pytest.approx(1.0)


def test_fit_with_ripple():
    t = np.linspace(0, 3, 301)
    v = np.exp(-2 * t) * (1 + 0.01 * np.sin(17 * t))
    assert abs(fit_decay_rate(t, v).rate - 2.0) < 0.05


def test_fit_window_and_errors():
    t = np.linspace(0, 10, 101)
    v = np.where(t < 5, np.exp(-t), np.exp(-5) * np.exp(-3 * (t - 5)))
    assert fit_decay_rate(t, v, (5.0, 10.0)).rate == pytest.approx(3.0)
    with pytest.raises(ParameterError, match="positive"):
        fit_decay_rate(t, v - 0.5)
    with pytest.raises(ParameterError, match="samples"):
        fit_decay_rate(t, v, (0.0, 0.3))


@given(st.floats(0.01, 50.0), st.floats(1e-3, 1e3))
def test_fit_recovers_rate(rate, amp):
    t = np.linspace(0, 2.0 / rate, 40)
    fit = fit_decay_rate(t, amp * np.exp(-rate * t))
    assert fit.rate == pytest.approx(rate, rel=1e-8)


# ---------------------------------------------------------------- stationarity and detectors

@pytest.fixture(scope="module")
def bright_record():
    from stationary_light.model import PAPER_OMEGA, paper_params
    s0 = make_dual_gaussian_spinwave(phi=0.0, n_points=128)
    return run(sl_timeline(PAPER_OMEGA, PAPER_OMEGA, 6.0), Grid(128, 0.02, 5), paper_params(),
               s0, dispersion="common")


def test_stationarity_bounds(bright_record):
    assert stationarity_metric(bright_record, 0.0, 0.0) == 0.0
    value = stationarity_metric(bright_record, 0.0, 6.0)
    assert 0.0 < value <= 2.0


def test_stationarity_of_zero_profile(paper, omega):
    rec = run(sl_timeline(omega, omega, 0.1), Grid(32, 0.01), paper, None)
    with pytest.raises(UndefinedMetricError):
        stationarity_metric(rec, 0.0, 0.1)


def test_emission_burst_decays_at_r_bright(bright_record):
    t = bright_record.detector_times
    for series in (bright_record.detector_fwd, bright_record.detector_bwd):
        amp = np.abs(series)
        fit = fit_decay_rate(t, amp, (0.5, 3.0))
        assert fit.rate == pytest.approx(R_BRIGHT_PAPER, rel=0.05)


def test_detector_energy_matches_norm_loss(bright_record):
    b = bright_record.balance
    lost = b.stored[0] - b.stored[-1]
    emitted = detector_energy(bright_record, 0.0, 6.0)
    scattered = np.trapezoid(b.loss, b.times)
    assert emitted + scattered == pytest.approx(lost, rel=1e-3)
    assert detector_energy(bright_record, 0.0, 6.0, "fwd") == pytest.approx(emitted / 2, rel=1e-6)


def test_summary_keys(bright_record, paper, omega):
    out = summary(bright_record, paper, omega, omega)
    for key in ("r_bright_per_us", "gamma_sl_khz", "bright_rate_fit_per_us",
                "gamma_sl_fit_khz", "stationarity_sl", "balance_residual", "energy_sl_fwd"):
        assert key in out
    assert out["r_bright_per_us"] == pytest.approx(R_BRIGHT_PAPER)
    assert out["gamma_sl_khz"] == pytest.approx(GAMMA_SL_PAPER * 1e3)
    assert out["bright_rate_fit_per_us"] == pytest.approx(R_BRIGHT_PAPER, rel=0.02)


def test_local_maxima():
    y = np.array([0.0, 1.0, 0.5, 0.5, 2.0, 1.0, 1e-6, 2e-6, 0.0])
    assert local_maxima(y).tolist() == [1, 4]
    assert local_maxima(y, rel_height=1e-7).tolist() == [1, 4, 7]
    assert local_maxima([3.0, 2.0, 1.0]).size == 0
    assert local_maxima([3.0, 2.0, 1.0], include_start=True).tolist() == [0]


# ---------------------------------------------------------------- GEM picture

ETA = 2 * math.pi * 0.18
GAMMA = 2 * math.pi * 3


def rms_width(xi, weight):
    w = weight / np.trapezoid(weight, xi)
    mean = np.trapezoid(xi * w, xi)
    return mean, math.sqrt(np.trapezoid((xi - mean) ** 2 * w, xi))


def test_single_sideband_gaussian_position_and_width():
    pulse = ProbePulse(1.0, 8.0, 0.0, ETA / 10)
    s = gem_fourier_oracle(pulse, ETA, GAMMA, n_points=2048)
    mean, width = rms_width(s.xi, np.abs(s.values) ** 2)
    assert mean == pytest.approx(0.5 - 0.1, abs=1e-6)
    assert width == pytest.approx(1 / (2 * 8.0 * ETA), rel=1e-4)


def test_dual_sideband_mirror_pair():
    w0 = ETA / 4
    s = gem_fourier_oracle(ProbePulse(1.0, 6.0, 0.0, w0, -w0, math.pi), ETA, GAMMA)
    np.testing.assert_allclose(s.values, -s.values[::-1], atol=1e-10 * np.max(np.abs(s.values)))
    assert s.values[np.argmax(np.abs(s.values))] != 0


def test_oracle_parseval():
    # long enough that both stored Gaussians fit well inside [0, 1]
    pulse = ProbePulse(0.7, 8.0, 30.0, ETA / 4, -ETA / 4, 0.4)
    s = gem_fourier_oracle(pulse, ETA, GAMMA, n_sigma=12)
    assert s.norm2() == pytest.approx(GAMMA * pulse_energy(pulse), rel=1e-3)
    assert area_relation_check(s, pulse, GAMMA, "full") == pytest.approx(1.0, rel=1e-3)
    assert area_relation_check(s, pulse, GAMMA, "lower") == pytest.approx(1.0, rel=1e-3)


def test_oracle_options():
    pulse = ProbePulse(1.0, 5.0, 30.0, ETA / 4)
    plain = gem_fourier_oracle(pulse, ETA, GAMMA)
    chirped = gem_fourier_oracle(pulse, ETA, GAMMA, t_eval=60.0, log_phase=0.5)
    np.testing.assert_allclose(np.abs(chirped.values), np.abs(plain.values), rtol=1e-12)
    assert overlap(plain, chirped) < 0.999
    with pytest.raises(ParameterError):
        gem_fourier_oracle(pulse, 0.0, GAMMA)
    with pytest.warns(RuntimeWarning):
        gem_fourier_oracle(ProbePulse(1.0, 5.0, 0.0, ETA), ETA, GAMMA)


def test_area_check_edge_cases():
    with pytest.warns(DegenerateRatioWarning):
        assert area_relation_check(np.zeros(64), ProbePulse(0.0, 1.0), GAMMA) == 1.0
    with pytest.raises(ParameterError):
        area_relation_check(np.zeros(64), ProbePulse(), GAMMA, "middle")


def test_partial_integral_interpolates():
    xi = xi_grid(11)
    assert partial_integral(xi, 0.0, 1.0) == pytest.approx(0.5)
    assert partial_integral(xi, 0.25, 0.5) == pytest.approx((0.5 ** 2 - 0.25 ** 2) / 2)


def test_overlap_properties(rng):
    a = rng.normal(size=64) + 1j * rng.normal(size=64)
    assert overlap(a, (2 - 3j) * a) == pytest.approx(1.0)
    with pytest.raises(UndefinedMetricError):
        overlap(a, np.zeros(64))


# ---------------------------------------------------------------- cross-phase modulation

def test_xpm_closed_form_value():
    p = XpmParams(gamma=1.0, delta_s=100.0, sigma_over_a=0.1, d=200.0)
    assert xpm_phase_closed(p) == pytest.approx(-6.25e-3, rel=1e-14)
    assert xpm_phase_closed(XpmParams(1.0, 100.0, 0.1, 400.0)) == pytest.approx(-12.5e-3)
    assert xpm_phase_closed(XpmParams(1.0, -100.0, 0.1, 200.0)) == pytest.approx(6.25e-3)


def test_xpm_numeric_matches_closed():
    p = XpmParams(gamma=2.0, delta_s=30.0, sigma_over_a=0.05, d=120.0, omega_c=3.0, delta_c=80.0)
    assert xpm_phase_numeric(p, t0=1.3) == pytest.approx(xpm_phase_closed(p), rel=1e-6)


def test_xpm_divergent_without_control():
    with pytest.raises(DivergentIntegralError):
        xpm_phase_numeric(XpmParams(1.0, 10.0, 0.1, 10.0, omega_c=0.0))


def test_xpm_validation():
    with pytest.raises(ParameterError):
        XpmParams(1.0, 0.0, 0.1, 10.0)
    with pytest.raises(ParameterError):
        XpmParams(1.0, 1.0, -0.1, 10.0)


def test_paper_xpm_order_of_magnitude():
    phase = abs(xpm_phase_closed(paper_xpm_params()))
    assert 1e-4 < phase < 1e-2
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert xpm_phase_numeric(paper_xpm_params()) == pytest.approx(-phase, rel=1e-6)


def test_integral_helper_is_linear(rng):
    a = rng.normal(size=33)
    assert integrate(3 * a) == pytest.approx(3 * integrate(a))
