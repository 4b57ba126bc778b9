"""Time-domain synthesis of colored Gaussian attacks and paired trajectory simulation.

Random streams are derived from one seed with ``numpy.random.SeedSequence``:
stream 0 drives the process noise w, stream 1 the measurement noise v,
stream 2 the open-loop input u and stream 3 the attack.  Attacked and
unattacked runs consume identical draws, so their difference isolates the
attack path exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal

from .lti import ClosedLoop, OpenLoop, StabilityError, check_closed_loop_stability, realize_controller
from .spectra import SpectrumSamples

STREAM_W, STREAM_V, STREAM_U, STREAM_ATTACK = range(4)
BURN_IN_FACTOR = 10.0


def rng_streams(seed: int) -> list:
    """Four independent generators (w, v, u, attack) derived from ``seed``."""
    children = np.random.SeedSequence(int(seed)).spawn(4)
    return [np.random.default_rng(c) for c in children]


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def synthesize_colored_gaussian(S: SpectrumSamples, length: int, seed=0) -> np.ndarray:
    """Zero-mean stationary Gaussian series whose power spectrum is S.

    White Gaussian noise of length ``length + n`` is shaped in the frequency
    domain by sqrt(S) (linearly interpolated onto the finer FFT grid), and the
    first n samples are discarded.
    """
    n = S.grid.n
    if length <= 0 or length % n:
        raise ValueError(f"length ({length}) must be a positive multiple of grid.n ({n})")
    rng = _as_rng(seed)
    total = length + n
    white = rng.standard_normal(total)
    if S.is_zero():
        return np.zeros(length)
    fine = 2.0 * np.pi * np.arange(total // 2 + 1) / total
    level = np.interp(fine, np.append(S.omega, 2.0 * np.pi), np.append(S.values, S.values[0]))
    series = np.fft.irfft(np.fft.rfft(white) * np.sqrt(level), total)
    return series[n:]


@dataclass(frozen=True)
class SimulationResult:
    x: np.ndarray
    x_hat: np.ndarray
    y: np.ndarray
    y_hat: np.ndarray
    n: np.ndarray
    horizon: int
    seed: int

    @property
    def state_deviation(self) -> np.ndarray:
        return self.x_hat - self.x

    @property
    def output_deviation(self) -> np.ndarray:
        return self.y_hat - self.y


def burn_in_steps(model) -> int:
    rho = model.spectral_radius
    return int(math.ceil(BURN_IN_FACTOR / (1.0 - rho)))


def _closed_loop_filters(model: ClosedLoop):
    """Transfer functions from (w, v, n) to the plant state x for the wired loop u = -K y."""
    p = model.plant
    k = realize_controller(model.controller)
    m = k.order
    A = np.zeros((m + 1, m + 1))
    A[0, 0] = p.a - p.b * k.D * p.c
    A[0, 1:] = -p.b * k.C[0]
    A[1:, 0] = k.B[:, 0] * p.c
    A[1:, 1:] = k.A
    inputs = np.zeros((m + 1, 3))
    inputs[0, 0] = 1.0
    inputs[0, 1] = -p.b * k.D
    inputs[1:, 1] = k.B[:, 0]
    inputs[0, 2] = p.b
    C = np.zeros((1, m + 1))
    C[0, 0] = 1.0
    filters = []
    for i in range(3):
        num, den = signal.ss2tf(A, inputs[:, [i]], C, np.zeros((1, 1)))
        filters.append((num[0], den))
    return filters


def _state_trajectory(model, w, v, u, n, filters) -> np.ndarray:
    p = model.plant
    if isinstance(model, OpenLoop):
        drive = p.b * (u + n) + w
        return signal.lfilter([0.0, 1.0], [1.0, -p.a], drive)
    x = np.zeros_like(w)
    for (num, den), src in zip(filters, (w, v, n)):
        if np.any(src):
            x = x + signal.lfilter(num, den, src)
    return x


def simulate(model, attack: Optional[np.ndarray], horizon: int, seed: int = 0) -> SimulationResult:
    """Paired attacked/unattacked simulation over ``horizon`` recorded steps.

    States start at zero and ``burn_in_steps(model)`` unattacked steps are
    discarded before recording; ``attack[k]`` is injected at recorded step k.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if isinstance(model, OpenLoop):
        if not abs(model.plant.a) < 1.0:
            raise StabilityError("open-loop plant is unstable")
    elif isinstance(model, ClosedLoop):
        if not check_closed_loop_stability(model.plant, model.controller).stable:
            raise StabilityError("closed-loop system is not stable")
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    if attack is not None:
        attack = np.asarray(attack, dtype=float).reshape(-1)
        if attack.size < horizon:
            raise ValueError(f"attack has {attack.size} samples, horizon needs {horizon}")

    p = model.plant
    burn = burn_in_steps(model)
    total = burn + horizon
    rw, rv, ru, _ = rng_streams(seed)
    w = math.sqrt(p.sigma_w2) * rw.standard_normal(total)
    v = math.sqrt(p.sigma_v2) * rv.standard_normal(total)
    u = np.zeros(total)
    if isinstance(model, OpenLoop) and model.input_spectrum is not None:
        su = model.input_spectrum
        blocks = -(-total // su.grid.n) * su.grid.n
        u = synthesize_colored_gaussian(su, blocks, ru)[:total]

    filters = _closed_loop_filters(model) if isinstance(model, ClosedLoop) else None
    zeros = np.zeros(total)
    x = _state_trajectory(model, w, v, u, zeros, filters)
    y = p.c * x + v
    if attack is None:
        x_hat, y_hat = x.copy(), y.copy()
        n_rec = np.zeros(horizon)
    else:
        n_full = zeros.copy()
        n_full[burn:] = attack[:horizon]
        x_hat = _state_trajectory(model, w, v, u, n_full, filters)
        y_hat = p.c * x_hat + v
        n_rec = n_full[burn:].copy()
    rec = slice(burn, total)
    return SimulationResult(
        x=x[rec], x_hat=x_hat[rec], y=y[rec], y_hat=y_hat[rec], n=n_rec, horizon=horizon, seed=int(seed)
    )


def estimate_distortion(result: SimulationResult) -> float:
    """Time average of (x_hat - x)^2."""
    d = result.state_deviation
    return float(np.mean(d * d)) if d.size else 0.0


def estimate_output_distortion(result: SimulationResult) -> float:
    """Time average of (y_hat - y)^2; equals c^2 times the state distortion."""
    d = result.output_deviation
    return float(np.mean(d * d)) if d.size else 0.0
