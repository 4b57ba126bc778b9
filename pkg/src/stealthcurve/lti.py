"""Scalar plants, rational controllers and their discrete-time realizations.

All polynomials are stored as coefficient sequences in descending powers of z,
the same convention as ``numpy.polyval`` and ``scipy.signal``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Union

import numpy as np

if TYPE_CHECKING:
    from .spectra import FrequencyGrid, SpectrumSamples

STABILITY_MARGIN = 1e-9


class StabilityError(ValueError):
    """Raised when a model violates its stability invariant."""


@dataclass(frozen=True)
class FirstOrderPlant:
    """x[k+1] = a x[k] + b u[k] + w[k],  y[k] = c x[k] + v[k]."""

    a: float
    b: float
    c: float
    sigma_w2: float = 1.0
    sigma_v2: float = 0.0

    def __post_init__(self) -> None:
        for name in ("a", "b", "c", "sigma_w2", "sigma_v2"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"plant.{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.b == 0.0 or self.c == 0.0:
            raise ValueError("plant must be controllable and observable (b != 0 and c != 0)")
        if self.sigma_w2 < 0.0 or self.sigma_v2 < 0.0:
            raise ValueError("noise variances sigma_w2, sigma_v2 must be nonnegative")


def _as_coeffs(values, name: str) -> tuple:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D coefficient list")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} coefficients must be finite")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class RationalTransferFunction:
    """K(z) = numerator(z) / denominator(z), coefficients in descending powers of z."""

    numerator: tuple
    denominator: tuple

    def __post_init__(self) -> None:
        num = list(_as_coeffs(self.numerator, "numerator"))
        den = _as_coeffs(self.denominator, "denominator")
        if den[0] == 0.0:
            raise ValueError("leading denominator coefficient must be nonzero")
        while len(num) > 1 and num[0] == 0.0:
            num.pop(0)
        if len(num) > len(den):
            raise ValueError(
                f"controller is improper: numerator degree {len(num) - 1} "
                f"exceeds denominator degree {len(den) - 1}"
            )
        object.__setattr__(self, "numerator", tuple(num))
        object.__setattr__(self, "denominator", den)

    @classmethod
    def constant(cls, gain: float) -> "RationalTransferFunction":
        return cls((gain,), (1.0,))

    @property
    def order(self) -> int:
        return len(self.denominator) - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.polyval(self.numerator, z) / np.polyval(self.denominator, z)


@dataclass(frozen=True)
class StateSpaceRealization:
    """xi[k+1] = A xi[k] + B e[k],  out[k] = C xi[k] + D e[k]."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=float)
        m = A.shape[0] if A.size else 0
        A = A.reshape(m, m)
        B = np.asarray(self.B, dtype=float).reshape(m, 1)
        C = np.asarray(self.C, dtype=float).reshape(1, m)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", float(self.D))

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def spectral_radius(self) -> float:
        if self.order == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def frequency_response(self, z) -> np.ndarray:
        """Evaluate C (zI - A)^{-1} B + D at every point of ``z``."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.order == 0:
            return np.full(z.shape, self.D, dtype=complex)
        eye = np.eye(self.order)
        out = np.empty(z.shape, dtype=complex)
        for i, zi in enumerate(z):
            out[i] = (self.C @ np.linalg.solve(zi * eye - self.A, self.B))[0, 0]
        return out + self.D


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    poles: np.ndarray
    pole_magnitudes: tuple = field(default=())

    @property
    def spectral_radius(self) -> float:
        return self.pole_magnitudes[0] if self.pole_magnitudes else 0.0


@dataclass(frozen=True)
class OpenLoop:
    """Stable plant driven by a stationary input with spectrum ``input_spectrum``.

    ``input_spectrum=None`` means the input is identically zero.
    """

    plant: FirstOrderPlant
    input_spectrum: Optional["SpectrumSamples"] = None

    def __post_init__(self) -> None:
        if not abs(self.plant.a) < 1.0:
            raise StabilityError(
                f"open-loop model requires a stable plant (|a| < 1), got a={self.plant.a}"
            )
        if self.plant.sigma_w2 == 0.0 and self.plant.sigma_v2 == 0.0:
            if self.input_spectrum is None or not np.any(self.input_spectrum.values > 0):
                raise ValueError(
                    "output spectrum is identically zero: need sigma_w2 > 0, "
                    "sigma_v2 > 0 or a nonzero input spectrum"
                )

    @property
    def spectral_radius(self) -> float:
        return abs(self.plant.a)


@dataclass(frozen=True)
class ClosedLoop:
    """Plant in negative feedback with the output controller u = -K(z) y."""

    plant: FirstOrderPlant
    controller: RationalTransferFunction

    def __post_init__(self) -> None:
        report = check_closed_loop_stability(self.plant, self.controller)
        if not report.stable:
            raise StabilityError(
                "closed-loop system is not stable: pole magnitudes "
                f"{[round(m, 6) for m in report.pole_magnitudes]} must all be < 1"
            )
        if self.plant.sigma_w2 == 0.0 and self.plant.sigma_v2 == 0.0:
            raise ValueError("output spectrum is identically zero: need sigma_w2 > 0 or sigma_v2 > 0")

    @property
    def spectral_radius(self) -> float:
        return check_closed_loop_stability(self.plant, self.controller).spectral_radius


SystemModel = Union[OpenLoop, ClosedLoop]


def plant_frequency_response(plant: FirstOrderPlant, grid: "FrequencyGrid") -> np.ndarray:
    """P(e^{jw}) = bc / (e^{jw} - a) on every grid point."""
    z = grid.z
    if z.size == 0:
        raise ValueError("frequency grid is empty")
    return (plant.b * plant.c) / (z - plant.a)


def characteristic_polynomial(plant: FirstOrderPlant, controller: RationalTransferFunction) -> np.ndarray:
    """(z - a) den_K(z) + b c num_K(z), descending powers."""
    den = np.asarray(controller.denominator)
    num = np.asarray(controller.numerator)
    open_part = np.polymul([1.0, -plant.a], den)
    feedback = np.zeros_like(open_part)
    feedback[len(feedback) - len(num):] = plant.b * plant.c * num
    return open_part + feedback


def check_closed_loop_stability(
    plant: FirstOrderPlant,
    controller: RationalTransferFunction,
    tol: float = STABILITY_MARGIN,
) -> StabilityReport:
    """Closed-loop poles via companion-matrix eigenvalues of the characteristic polynomial."""
    poly = characteristic_polynomial(plant, controller)
    if not np.any(poly != 0.0):
        raise ValueError("degenerate characteristic polynomial (all coefficients zero)")
    poles = np.roots(poly)
    mags = tuple(sorted((float(m) for m in np.abs(poles)), reverse=True))
    stable = all(m < 1.0 - tol for m in mags)
    return StabilityReport(stable=stable, poles=poles, pole_magnitudes=mags)


def realize_controller(controller: RationalTransferFunction) -> StateSpaceRealization:
    """Controllable canonical form of K(z)."""
    den = np.asarray(controller.denominator, dtype=float)
    num = np.asarray(controller.numerator, dtype=float)
    m = len(den) - 1
    if len(num) > m + 1:
        raise ValueError("controller is improper")
    num = np.concatenate([np.zeros(m + 1 - len(num)), num]) / den[0]
    den = den / den[0]
    d = num[0]
    if m == 0:
        return StateSpaceRealization(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), d)
    A = np.zeros((m, m))
    A[0, :] = -den[1:]
    A[1:, :-1] = np.eye(m - 1)
    B = np.zeros((m, 1))
    B[0, 0] = 1.0
    C = (num[1:] - d * den[1:]).reshape(1, m)
    return StateSpaceRealization(A, B, C, d)
