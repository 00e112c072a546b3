"""Probe envelopes slaved to the spinwave.

Light crosses the ensemble much faster than anything else evolves, so the
two counter-propagating probes are rebuilt from the instantaneous spinwave
by integrating first-order ODEs in xi:

    dE+/dxi = +i (a+ E+ + b+ S),   E+(0) given
    dE-/dxi = -i (a- E- + b- S),   E-(1) given

The integrator is an exponential integrating factor with a trapezoidal
source, so the phase from the dispersive term ``a`` is exact for any grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .model import ParameterError, PhysicalParams, delta_tilde

MIN_POINTS = 16
DEFAULT_POINTS = 512
DISPERSION_MODES = ("full", "common", "none")


class NumericError(ArithmeticError):
    pass


class ResolutionWarning(RuntimeWarning):
    pass


def xi_grid(n_points: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_points)


def trapezoid_weights(n_points: int) -> np.ndarray:
    """Quadrature weights over [0, 1]; half weight on both faces."""
    w = np.full(n_points, 1.0 / (n_points - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def integrate(values: np.ndarray) -> complex:
    """Trapezoid integral over xi in [0, 1] of samples on the uniform grid."""
    values = np.asarray(values)
    h = 1.0 / (values.shape[-1] - 1)
    return h * (values.sum(axis=-1) - 0.5 * (values[..., 0] + values[..., -1]))


@dataclass(frozen=True)
class SpinwaveProfile:
    """Complex spinwave samples on xi_k = k / (N - 1)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 1:
            raise ParameterError("spinwave must be one-dimensional")
        if values.size < MIN_POINTS:
            raise ParameterError(f"spinwave needs at least {MIN_POINTS} points, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise NumericError("spinwave contains non-finite values")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n_points(self) -> int:
        return self.values.size

    @property
    def xi(self) -> np.ndarray:
        return xi_grid(self.n_points)

    def integral(self) -> complex:
        return complex(integrate(self.values))

    def norm2(self) -> float:
        return float(integrate(np.abs(self.values) ** 2).real)

    def __mul__(self, c):
        return SpinwaveProfile(self.values * c)

    __rmul__ = __mul__

    def __add__(self, other):
        return SpinwaveProfile(self.values + _as_array(other))


@dataclass(frozen=True)
class FieldPair:
    e_plus: np.ndarray
    e_minus: np.ndarray
    boundary_in_plus: complex = 0j
    boundary_in_minus: complex = 0j

    @property
    def out_plus(self) -> complex:
        """Forward field leaving the ensemble at xi = 1."""
        return complex(self.e_plus[-1])

    @property
    def out_minus(self) -> complex:
        """Backward field leaving the ensemble at xi = 0."""
        return complex(self.e_minus[0])


@dataclass(frozen=True)
class FieldCoefficients:
    """Dispersion ``alpha`` and coupling ``beta`` for each direction (per unit xi)."""

    alpha_plus: complex
    alpha_minus: complex
    beta_plus: complex
    beta_minus: complex


def _as_array(s) -> np.ndarray:
    if isinstance(s, SpinwaveProfile):
        return s.values
    return np.asarray(s, dtype=complex)


def _linear_source_weights(z: complex, h: float) -> tuple[complex, complex]:
    """Integrals of exp(z u / h) against the hat functions over one cell.

    w0 = h (e^z (z - 1) + 1) / z^2 weights the sample the step starts from,
    w1 = h (e^z - 1) / z - w0 the one it ends on.  Small |z| uses the series.
    """
    if abs(z) < 0.1:
        terms = np.arange(8)
        powers = z ** terms
        fact = np.array([math.factorial(k) for k in range(10)], dtype=float)
        phi1 = np.sum(powers / fact[terms + 1])
        w0 = h * np.sum(powers * (terms + 1) / fact[terms + 2])
    else:
        phi1 = np.expm1(z) / z
        w0 = h * (np.exp(z) * (z - 1) + 1) / (z * z)
    return complex(w0), complex(h * phi1 - w0)


def solve_direction(s, alpha: complex, beta: complex, boundary: complex,
                    direction: str = "forward") -> np.ndarray:
    """Solve dE/dxi = i*sgn*(alpha*E + beta*S) from the entry face.

    ``direction="forward"`` starts at xi = 0 with sgn = +1; ``"backward"``
    starts at xi = 1 with sgn = -1.  Each grid step propagates E exactly
    and integrates the source exactly for S linear between grid points:

        E_next = exp(i a h) E + i b (w0 S_k + w1 S_k+1)

    which is second order in h for smooth S.
    """
    values = _as_array(s)
    if direction not in ("forward", "backward"):
        raise ParameterError(f"direction must be 'forward' or 'backward', got {direction!r}")
    if not (np.all(np.isfinite(values)) and np.isfinite(alpha)
            and np.isfinite(beta) and np.isfinite(boundary)):
        raise NumericError("non-finite input to field solver")
    n = values.size
    h = 1.0 / (n - 1)
    if abs(alpha) * h > 1.0:
        warnings.warn(f"|alpha| h = {abs(alpha) * h:.3g} > 1: field grid under-resolves the dispersion",
                      ResolutionWarning, stacklevel=2)

    src = values if direction == "forward" else values[::-1]
    a = np.exp(1j * alpha * h)
    w0, w1 = _linear_source_weights(1j * alpha * h, h)
    drive = np.empty(n, dtype=complex)
    drive[0] = boundary
    drive[1:] = 1j * beta * (w0 * src[:-1] + w1 * src[1:])
    out = lfilter([1.0], [1.0, -a], drive)
    return out if direction == "forward" else out[::-1]


def field_coefficients(params: PhysicalParams, omega_plus: float, omega_minus: float,
                       dispersion: str = "full") -> FieldCoefficients:
    """Coefficients of the probe equations for the current control amplitudes.

    ``"none"`` is the far-detuned limit: the complex detuning D - iG is
    replaced by D, which removes both the dispersive phase and the
    absorptive part of the same term (a = 0, real b).
    ``"common"`` subtracts the phase shared by the two directions, a pure
    gauge change S -> exp(-i k xi) S that leaves |S| and |E| unchanged.
    """
    if dispersion not in DISPERSION_MODES:
        raise ParameterError(f"dispersion must be one of {DISPERSION_MODES}, got {dispersion!r}")
    sqd = math.sqrt(params.d)
    if dispersion == "none":
        if params.delta_plus == 0 or params.delta_minus == 0:
            raise ParameterError("dispersion 'none' needs non-zero one-photon detunings")
        return FieldCoefficients(0j, 0j, complex(sqd * omega_plus / params.delta_plus),
                                 complex(sqd * omega_minus / params.delta_minus))

    dt_p = delta_tilde(params.delta_plus, params.Gamma)
    dt_m = delta_tilde(params.delta_minus, params.Gamma)
    alpha_p = params.d * params.Gamma / dt_p
    alpha_m = params.d * params.Gamma / dt_m
    if dispersion == "common":
        k = 0.5 * (alpha_p.real - alpha_m.real)
        if abs(alpha_p.real + alpha_m.real) > 1e-9 * max(abs(k), 1.0):
            warnings.warn("common-phase removal assumes delta_plus = -delta_minus; "
                          "a residual dispersive phase remains", RuntimeWarning, stacklevel=2)
        alpha_p = alpha_p - k
        alpha_m = alpha_m + k
    return FieldCoefficients(alpha_p, alpha_m, sqd * omega_plus / dt_p, sqd * omega_minus / dt_m)


def solve_with(s, coeffs: FieldCoefficients, inputs=(0j, 0j)) -> FieldPair:
    """Both probe envelopes for given coefficients and boundary inputs."""
    b_plus, b_minus = complex(inputs[0]), complex(inputs[1])
    e_plus = solve_direction(s, coeffs.alpha_plus, coeffs.beta_plus, b_plus, "forward")
    e_minus = solve_direction(s, coeffs.alpha_minus, coeffs.beta_minus, b_minus, "backward")
    return FieldPair(e_plus, e_minus, b_plus, b_minus)


def solve_fields(s, params: PhysicalParams, omega_plus: float, omega_minus: float,
                 inputs=(0j, 0j), dispersion: str = "full") -> FieldPair:
    coeffs = field_coefficients(params, omega_plus, omega_minus, dispersion)
    return solve_with(s, coeffs, inputs)


def reference_solution(s_coarse: np.ndarray, alpha: complex, beta: complex, boundary: complex,
                       direction: str = "forward", n_fine: int = 4096) -> np.ndarray:
    """Brute-force oracle for ``solve_direction`` on the coarse grid.

    The spinwave is linearly interpolated to ``n_fine`` points and the
    variation-of-constants integral is evaluated by a midpoint sum of
    the fully resolved integrand, independent of the integrating-factor
    recurrence.
    """
    s_coarse = np.asarray(s_coarse, dtype=complex)
    xc = xi_grid(s_coarse.size)
    xf = xi_grid(n_fine)
    sf = np.interp(xf, xc, s_coarse.real) + 1j * np.interp(xf, xc, s_coarse.imag)
    h = xf[1] - xf[0]
    if direction == "backward":
        sf = sf[::-1]
    # E(x) = e^{i a x} [b + i beta int_0^x e^{-i a y} S(y) dy]
    mid = 0.5 * (sf[:-1] + sf[1:])
    ymid = xf[:-1] + 0.5 * h
    integrand = np.exp(-1j * alpha * ymid) * mid
    cum = np.concatenate([[0.0], np.cumsum(integrand) * h])
    ef = np.exp(1j * alpha * xf) * (boundary + 1j * beta * cum)
    if direction == "backward":
        ef = ef[::-1]
    step = (n_fine - 1) // (s_coarse.size - 1)
    if (n_fine - 1) % (s_coarse.size - 1):
        return np.interp(xc, xf, ef.real) + 1j * np.interp(xc, xf, ef.imag)
    return ef[::step]
