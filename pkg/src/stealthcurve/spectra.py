"""Sampled power spectra on a uniform grid over [0, 2*pi).

Spectra are densities per radian frequency normalized so that the variance of
the process is the grid mean of the samples, (1/2pi) * integral S(w) dw.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg, signal

from .lti import ClosedLoop, OpenLoop, StabilityError, check_closed_loop_stability, plant_frequency_response

ZERO_FLOOR = 1e-300
SYMMETRY_RTOL = 1e-9


@dataclass(frozen=True)
class FrequencyGrid:
    """n uniform points w_j = 2 pi j / n, j = 0..n-1."""

    n: int = 4096

    def __post_init__(self) -> None:
        n = int(self.n)
        if n < 64 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 64, got {self.n}")
        object.__setattr__(self, "n", n)

    @cached_property
    def omega(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n) / self.n

    @cached_property
    def z(self) -> np.ndarray:
        """e^{j w} on the grid, built so that z[n-j] == conj(z[j]) bit for bit."""
        half = self.n // 2
        z = np.empty(self.n, dtype=complex)
        z[: half + 1] = np.exp(1j * self.omega[: half + 1])
        z[0] = 1.0
        z[half] = -1.0
        z[half + 1 :] = np.conj(z[1:half][::-1])
        return z

    def mirror(self, values: np.ndarray) -> np.ndarray:
        """values[n - j] for every j (index 0 maps to itself)."""
        return np.roll(values[::-1], 1)


class SpectrumSamples:
    """Nonnegative, even-symmetric samples of a power spectrum on a FrequencyGrid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: FrequencyGrid, values) -> None:
        v = np.array(values, dtype=float).reshape(-1)
        if v.size != grid.n:
            raise ValueError(f"spectrum has {v.size} samples, grid expects {grid.n}")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectrum samples must be finite")
        if np.any(v < 0.0):
            j = int(np.argmin(v))
            raise ValueError(f"spectrum sample {j} is negative ({v[j]:.3e})")
        mirrored = grid.mirror(v)
        scale = max(float(v.max()), ZERO_FLOOR)
        if np.max(np.abs(v - mirrored)) > SYMMETRY_RTOL * scale:
            raise ValueError("spectrum is not even-symmetric (values[j] != values[n-j])")
        v = 0.5 * (v + mirrored)
        v.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", v)

    def __setattr__(self, name, value):
        raise AttributeError("SpectrumSamples is immutable")

    def __repr__(self) -> str:
        return f"SpectrumSamples(n={self.grid.n}, min={self.values.min():.4g}, max={self.values.max():.4g})"

    def __add__(self, other: "SpectrumSamples") -> "SpectrumSamples":
        _same_grid(self, other)
        return SpectrumSamples(self.grid, self.values + other.values)

    def scaled(self, factor: float) -> "SpectrumSamples":
        return SpectrumSamples(self.grid, factor * self.values)

    @property
    def omega(self) -> np.ndarray:
        return self.grid.omega

    def is_zero(self) -> bool:
        return bool(np.all(self.values < ZERO_FLOOR))


def _same_grid(*spectra: SpectrumSamples) -> None:
    n = spectra[0].grid.n
    for s in spectra[1:]:
        if s.grid.n != n:
            raise ValueError(f"spectra live on different grids ({n} vs {s.grid.n})")


def white_spectrum(grid: FrequencyGrid, variance: float) -> SpectrumSamples:
    return SpectrumSamples(grid, np.full(grid.n, float(variance)))


def ar1_spectrum(grid: FrequencyGrid, a: float, innovation_var: float) -> SpectrumSamples:
    """Spectrum of s[k+1] = a s[k] + e[k] with Var(e) = innovation_var."""
    if not abs(a) < 1.0:
        raise ValueError(f"AR(1) coefficient must satisfy |a| < 1, got {a}")
    return SpectrumSamples(grid, innovation_var / np.abs(grid.z - a) ** 2)


def output_spectrum(model, grid: FrequencyGrid) -> SpectrumSamples:
    """Power spectrum of the unattacked output y for an open- or closed-loop model."""
    plant = model.plant
    z = grid.z
    if isinstance(model, OpenLoop):
        if not abs(plant.a) < 1.0:
            raise StabilityError(f"open-loop plant is unstable (a={plant.a})")
        pole = np.abs(z - plant.a) ** 2
        values = (plant.c**2 * plant.sigma_w2) / pole + plant.sigma_v2
        if model.input_spectrum is not None:
            su = model.input_spectrum
            if su.grid.n != grid.n:
                raise ValueError(f"input spectrum grid ({su.grid.n}) differs from requested grid ({grid.n})")
            values = values + np.abs(plant_frequency_response(plant, grid)) ** 2 * su.values
    elif isinstance(model, ClosedLoop):
        if not check_closed_loop_stability(plant, model.controller).stable:
            raise StabilityError("closed-loop system is not stable")
        open_part = z - plant.a
        loop = open_part + model.controller(z) * plant.b * plant.c
        values = np.abs(plant.c / loop) ** 2 * plant.sigma_w2 + np.abs(open_part / loop) ** 2 * plant.sigma_v2
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    out = SpectrumSamples(grid, values)
    if out.is_zero():
        raise ValueError("output spectrum is identically zero; divergence ratios are undefined")
    return out


def integrate_spectrum(S: SpectrumSamples) -> float:
    """(1/2pi) * integral of S over one period (periodic trapezoid rule)."""
    return float(np.mean(S.values))


def autocovariance_from_spectrum(S: SpectrumSamples, max_lag: int) -> np.ndarray:
    """R(k) = (1/n) sum_j S_j cos(w_j k) for k = 0..max_lag."""
    n = S.grid.n
    if max_lag < 0 or max_lag >= n // 2:
        raise ValueError(f"max_lag must lie in [0, {n // 2 - 1}] for a grid of {n} points, got {max_lag}")
    r = np.fft.fft(S.values).real[: max_lag + 1] / n
    r[0] = integrate_spectrum(S)
    return r


def toeplitz_covariance(S: SpectrumSamples, horizon_k: int) -> np.ndarray:
    """Covariance of a block y_0..y_k of the stationary process with spectrum S."""
    return linalg.toeplitz(autocovariance_from_spectrum(S, horizon_k))


def welch_estimate(
    series,
    grid: FrequencyGrid,
    overlap: float = 0.5,
    segment_len: int | None = None,
) -> SpectrumSamples:
    """Averaged Hann-window periodogram on ``grid`` (segment length = grid.n).

    The estimate is normalized so that its grid mean estimates the series
    variance. The series is assumed zero-mean; no detrending is applied.
    """
    x = np.asarray(series, dtype=float).reshape(-1)
    n = grid.n
    if segment_len is not None and segment_len != n:
        raise ValueError(f"segment_len ({segment_len}) must equal grid.n ({n})")
    if not 0.0 <= overlap < 1.0:
        raise ValueError(f"overlap must lie in [0, 1), got {overlap}")
    if x.size < 2 * n:
        raise ValueError(f"series of length {x.size} is too short for segments of {n} (need >= {2 * n})")
    _, pxx = signal.welch(
        x,
        fs=1.0,
        window="hann",
        nperseg=n,
        noverlap=int(round(overlap * n)),
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    pxx = np.maximum(pxx, 0.0)
    return SpectrumSamples(grid, 0.5 * (pxx + grid.mirror(pxx)))
