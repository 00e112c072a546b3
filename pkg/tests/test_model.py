import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stationary_light.model import (PER_MHZ, ControlDrive, ParameterError, PhysicalParams,
                                    SingularParameterError, build_params, control_amplitudes,
                                    delta_tilde, derived_rates, gradient_profile, rate_to_khz,
                                    stark_shift)

from conftest import GAMMA_SL_PAPER, R_BRIGHT_PAPER

TWO_PI = 2 * math.pi


def test_build_params_symmetric_detuning():
    p = build_params({"d": 200, "detuning_mhz": 160, "omega_mhz": 2.4, "gamma0_hz": 500})
    assert p.delta_plus == TWO_PI * 160
    assert p.delta_minus == -TWO_PI * 160
    assert control_amplitudes({"omega_mhz": 2.4}) == (TWO_PI * 2.4, TWO_PI * 2.4)


def test_zero_detuning():
    p = build_params({"d": 10, "detuning_mhz": 0})
    assert p.delta_plus == 0 and p.delta_minus == 0


def test_gamma0_unit_conversion():
    p = build_params({"d": 1, "gamma0_hz": 500})
    assert p.gamma0 == pytest.approx(TWO_PI * 5e-4, rel=1e-15)


@pytest.mark.parametrize("values, field", [
    ({"d": -1}, "d"),
    ({"d": 1, "gamma_mhz": -3}, "gamma"),
    ({"d": 1, "gamma0_hz": -1}, "gamma0"),
])
def test_negative_inputs_name_the_field(values, field):
    with pytest.raises(ParameterError, match=field):
        build_params(values)


def test_unknown_and_conflicting_keys():
    with pytest.raises(ParameterError, match="unknown"):
        build_params({"d": 1, "detunning_mhz": 3})
    with pytest.raises(ParameterError, match="either"):
        build_params({"d": 1, "detuning_mhz": 3, "delta_plus_mhz": 3})


def test_direct_construction_validates():
    with pytest.raises(ParameterError):
        PhysicalParams(d=0.0, Gamma=1.0)


@pytest.mark.parametrize("delta, gamma, expected", [
    (10.0, 0.0, 10 + 0j),
    (0.0, 2.0, -2j),
    (TWO_PI * 160, TWO_PI * 3, complex(TWO_PI * 160, -TWO_PI * 3)),
])
def test_delta_tilde_examples(delta, gamma, expected):
    assert delta_tilde(delta, gamma) == pytest.approx(expected, rel=1e-15)


def test_delta_tilde_singular():
    with pytest.raises(SingularParameterError):
        delta_tilde(0.0, 0.0)


@given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3))
def test_delta_tilde_matches_quotient(delta, gamma):
    quotient = (delta ** 2 + gamma ** 2) / complex(delta, gamma)
    assert delta_tilde(delta, gamma) == pytest.approx(quotient, rel=1e-12, abs=1e-12)


def test_derived_rates_formula():
    p = PhysicalParams(d=100, Gamma=1.0, delta_plus=10.0, delta_minus=-10.0)
    r = derived_rates(p, 0.1, 0.1)
    assert r.gamma_sl == pytest.approx(2e-4, rel=1e-12)
    assert r.r_bright == pytest.approx(1e-2, rel=1e-12)
    assert r.advisory is None


@given(st.floats(1.0, 1e3), st.floats(0.0, 50.0), st.floats(-5.0, 5.0))
def test_symmetric_stark_shifts_cancel(delta, omega, two_photon):
    p = PhysicalParams(d=50, Gamma=2.0, delta_plus=delta, delta_minus=-delta,
                       delta_two_photon=two_photon)
    assert derived_rates(p, omega, omega).delta_prime == pytest.approx(two_photon, abs=1e-12)


def test_paper_rates(paper, omega):
    r = derived_rates(paper, omega, omega)
    assert r.r_bright == pytest.approx(R_BRIGHT_PAPER, rel=1e-12)
    assert r.gamma_sl == pytest.approx(GAMMA_SL_PAPER, rel=1e-12)
    assert abs(r.r_bright / 0.8 - 1) < 0.1
    assert rate_to_khz(r.gamma_sl) == pytest.approx(11.6239, abs=1e-4)


def test_unequal_controls_use_geometric_mean(paper):
    r = derived_rates(paper, 2.0, 8.0)
    same = derived_rates(paper, 4.0, 4.0)
    assert r.r_bright == pytest.approx(same.r_bright)
    assert r.advisory is not None


def test_r_bright_needs_detuning():
    with pytest.raises(SingularParameterError):
        derived_rates(PhysicalParams(d=1, Gamma=1.0), 1.0, 1.0)


def test_stark_shift_sign():
    assert stark_shift(1.0, 10.0, 0.0) == pytest.approx(-0.1)
    assert stark_shift(1.0, -10.0, 0.0) == pytest.approx(0.1)
    assert stark_shift(1.0, 0.0, 0.0) == 0.0


def test_control_drive_ramp():
    drive = ControlDrive((0.0, 2.0), (1.0, 1.0))
    assert drive.at(0.25) == pytest.approx((0.5, 1.0))
    assert not drive.is_constant
    assert ControlDrive.constant(3.0, 0.0).is_constant
    with pytest.raises(ParameterError):
        ControlDrive((-1.0, 0.0), (0.0, 0.0))


def test_gradient_profile_antisymmetric():
    xi = np.linspace(0, 1, 11)
    g = gradient_profile(xi, 2.0)
    assert g[0] == -1.0 and g[-1] == 1.0
    np.testing.assert_allclose(g, -g[::-1], atol=1e-15)


def test_mhz_constant():
    assert PER_MHZ == TWO_PI
