"""Physical parameters, unit conversion and the derived rates of the Raman
stationary-light model.

Internal units: angular frequencies in rad/us, time in us, and the ensemble
length normalised to xi in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# rad/us per unit of ordinary frequency
PER_MHZ = TWO_PI
PER_KHZ = TWO_PI * 1e-3
PER_HZ = TWO_PI * 1e-6

# Rb87 D line: 6.07 MHz FWHM, entered as the half-width.
RB87_GAMMA_MHZ = 3.0


class ParameterError(ValueError):
    """Invalid or inconsistent physical parameter."""


class SingularParameterError(ParameterError):
    pass


@dataclass(frozen=True)
class PhysicalParams:
    """Ensemble and drive constants, all rates in rad/us.

    ``eta`` is the two-photon detuning span of the gradient across the
    ensemble, so the local gradient detuning is ``eta * (xi - 1/2)``.
    """

    d: float
    Gamma: float
    gamma0: float = 0.0
    delta_plus: float = 0.0
    delta_minus: float = 0.0
    delta_two_photon: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        for name in ("d", "Gamma", "gamma0", "delta_plus", "delta_minus",
                     "delta_two_photon", "eta"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if self.d <= 0:
            raise ParameterError(f"d must be positive, got {self.d}")
        if self.Gamma < 0:
            raise ParameterError(f"Gamma must be non-negative, got {self.Gamma}")
        if self.gamma0 < 0:
            raise ParameterError(f"gamma0 must be non-negative, got {self.gamma0}")

    @property
    def symmetric(self) -> bool:
        return self.delta_plus == -self.delta_minus

    def replace(self, **changes) -> "PhysicalParams":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return PhysicalParams(**values)


@dataclass(frozen=True)
class ControlDrive:
    """Control Rabi frequencies over one stage.

    Each amplitude is a linear ramp ``(start, end)`` across the stage; a
    constant drive has ``start == end``.
    """

    omega_plus: tuple[float, float] = (0.0, 0.0)
    omega_minus: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        for name in ("omega_plus", "omega_minus"):
            ramp = getattr(self, name)
            if isinstance(ramp, (int, float)):
                ramp = (float(ramp), float(ramp))
                object.__setattr__(self, name, ramp)
            ramp = tuple(float(v) for v in ramp)
            if len(ramp) != 2:
                raise ParameterError(f"{name} must be a value or a (start, end) pair")
            if min(ramp) < 0 or not all(math.isfinite(v) for v in ramp):
                raise ParameterError(f"{name} amplitudes must be finite and >= 0, got {ramp}")
            object.__setattr__(self, name, ramp)

    @classmethod
    def constant(cls, omega_plus: float, omega_minus: float) -> "ControlDrive":
        return cls((omega_plus, omega_plus), (omega_minus, omega_minus))

    @property
    def is_constant(self) -> bool:
        return (self.omega_plus[0] == self.omega_plus[1]
                and self.omega_minus[0] == self.omega_minus[1])

    def at(self, fraction: float) -> tuple[float, float]:
        """Amplitudes at ``fraction`` in [0, 1] of the stage."""
        u = min(max(fraction, 0.0), 1.0)
        op = self.omega_plus[0] + (self.omega_plus[1] - self.omega_plus[0]) * u
        om = self.omega_minus[0] + (self.omega_minus[1] - self.omega_minus[0]) * u
        return op, om


@dataclass(frozen=True)
class DerivedRates:
    gamma_prime: float
    delta_prime: float
    delta_tilde_plus: complex
    delta_tilde_minus: complex
    r_bright: float
    gamma_sl: float
    advisory: str | None = field(default=None, compare=False)


_PARAM_KEYS = {
    "d", "gamma_mhz", "gamma0_hz", "detuning_mhz", "delta_plus_mhz",
    "delta_minus_mhz", "two_photon_mhz", "eta_mhz",
}
# drive amplitudes travel in the same map but belong to the timeline
_DRIVE_KEYS = {"omega_mhz", "omega_plus_mhz", "omega_minus_mhz"}


def build_params(values: dict) -> PhysicalParams:
    """Convert a map of laboratory-unit quantities into ``PhysicalParams``.

    Frequencies are ordinary frequencies (MHz, or Hz for ``gamma0_hz``) and
    are multiplied by 2*pi.  ``detuning_mhz`` is the symmetric shorthand that
    expands to ``delta_plus = +|D|`` and ``delta_minus = -|D|``.
    """
    unknown = set(values) - _PARAM_KEYS - _DRIVE_KEYS
    if unknown:
        raise ParameterError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    if "d" not in values:
        raise ParameterError("missing required parameter: d")
    d = float(values["d"])
    if d <= 0:
        raise ParameterError(f"d must be positive, got {d}")
    gamma_mhz = float(values.get("gamma_mhz", RB87_GAMMA_MHZ))
    if gamma_mhz < 0:
        raise ParameterError(f"gamma_mhz must be non-negative, got {gamma_mhz}")
    gamma0_hz = float(values.get("gamma0_hz", 0.0))
    if gamma0_hz < 0:
        raise ParameterError(f"gamma0_hz must be non-negative, got {gamma0_hz}")

    if "detuning_mhz" in values:
        if "delta_plus_mhz" in values or "delta_minus_mhz" in values:
            raise ParameterError("give either detuning_mhz or delta_plus_mhz/delta_minus_mhz, not both")
        mag = abs(float(values["detuning_mhz"])) * PER_MHZ
        delta_plus, delta_minus = mag, -mag
    else:
        delta_plus = float(values.get("delta_plus_mhz", 0.0)) * PER_MHZ
        delta_minus = float(values.get("delta_minus_mhz", 0.0)) * PER_MHZ

    return PhysicalParams(
        d=d,
        Gamma=gamma_mhz * PER_MHZ,
        gamma0=gamma0_hz * PER_HZ,
        delta_plus=delta_plus,
        delta_minus=delta_minus,
        delta_two_photon=float(values.get("two_photon_mhz", 0.0)) * PER_MHZ,
        eta=float(values.get("eta_mhz", 0.0)) * PER_MHZ,
    )


def control_amplitudes(values: dict) -> tuple[float, float]:
    """Control Rabi frequencies (rad/us) from the same laboratory map."""
    if "omega_mhz" in values:
        om = float(values["omega_mhz"]) * PER_MHZ
        return om, om
    return (float(values.get("omega_plus_mhz", 0.0)) * PER_MHZ,
            float(values.get("omega_minus_mhz", 0.0)) * PER_MHZ)


def paper_params(**overrides) -> PhysicalParams:
    """The cold-atom experiment: d = 200, |D|/2pi = 160 MHz, gamma0 = 500 Hz."""
    values = {"d": 200.0, "gamma_mhz": RB87_GAMMA_MHZ, "detuning_mhz": 160.0,
              "gamma0_hz": 500.0}
    values.update(overrides)
    return build_params(values)


PAPER_OMEGA = 2.4 * PER_MHZ


def delta_tilde(delta: float, gamma: float) -> complex:
    """Complex detuning (D^2 + G^2) / (D + iG).

    The expression reduces identically to D - iG, which is what is returned;
    evaluating the quotient would only add rounding.
    """
    if delta == 0 and gamma == 0:
        raise SingularParameterError("delta_tilde is singular for delta = gamma = 0")
    return complex(delta, -gamma)


def stark_shift(omega: float, delta: float, gamma: float) -> float:
    """Light shift -|W|^2 D / (G^2 + D^2) contributed by one control field."""
    den = gamma * gamma + delta * delta
    if den == 0:
        return 0.0
    return -omega * omega * delta / den


def scattering_rate(omega: float, delta: float, gamma: float) -> float:
    den = gamma * gamma + delta * delta
    if den == 0:
        return 0.0
    return gamma * omega * omega / den


def derived_rates(params: PhysicalParams, omega_plus: float, omega_minus: float) -> DerivedRates:
    G = params.Gamma
    gamma_prime = (params.gamma0
                   + scattering_rate(omega_plus, params.delta_plus, G)
                   + scattering_rate(omega_minus, params.delta_minus, G))
    delta_prime = (params.delta_two_photon
                   + stark_shift(omega_plus, params.delta_plus, G)
                   + stark_shift(omega_minus, params.delta_minus, G))

    advisory = None
    if omega_plus != omega_minus:
        omega = math.sqrt(omega_plus * omega_minus)
        advisory = ("unequal control amplitudes: r_bright and gamma_sl use the "
                    "geometric mean of the two Rabi frequencies")
    else:
        omega = omega_plus
    delta = 0.5 * (abs(params.delta_plus) + abs(params.delta_minus))
    if delta == 0:
        raise SingularParameterError("r_bright needs a non-zero one-photon detuning")
    ratio = omega * omega / (delta * delta)

    return DerivedRates(
        gamma_prime=gamma_prime,
        delta_prime=delta_prime,
        delta_tilde_plus=delta_tilde(params.delta_plus, G),
        delta_tilde_minus=delta_tilde(params.delta_minus, G),
        r_bright=params.d * G * ratio,
        gamma_sl=params.gamma0 + 2.0 * G * ratio,
        advisory=advisory,
    )


def rate_to_khz(rate: float) -> float:
    """Express a rate in 1/us as the kHz figure quoted for decay rates."""
    return rate * 1e3


def gradient_profile(xi: np.ndarray, eta: float) -> np.ndarray:
    return eta * (np.asarray(xi) - 0.5)
