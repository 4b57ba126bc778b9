"""Gaussian KL divergences and the Itakura-Saito spectral distance (all in nats)."""

from __future__ import annotations

import numpy as np

from .spectra import ZERO_FLOOR, SpectrumSamples, _same_grid

POSITIVITY_RTOL = 1e-12
SYMMETRY_TOL = 1e-12


class RatioUndefinedError(ValueError):
    """The reference spectrum vanishes somewhere, so the spectral ratio is unbounded."""


def _kl_terms(ratio: np.ndarray) -> np.ndarray:
    # ratio - ln(ratio) - 1, written to avoid cancellation near ratio = 1
    excess = ratio - 1.0
    return excess - np.log1p(excess)


def _check_covariance(m: np.ndarray, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    scale = max(float(np.max(np.abs(m))), 1.0)
    if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * scale:
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (m + m.T)


def gaussian_kl(sigma_x, sigma_y) -> float:
    """KL(N(0, sigma_y) || N(0, sigma_x)).

    Computed from the eigenvalues d_i of the whitened matrix
    sigma_x^{-1/2} sigma_y sigma_x^{-1/2} as 0.5 * sum(d_i - ln d_i - 1),
    which equals 0.5 * [tr(sigma_y sigma_x^{-1}) - ln det(sigma_y sigma_x^{-1}) - m].
    """
    sx = _check_covariance(sigma_x, "sigma_x")
    sy = _check_covariance(sigma_y, "sigma_y")
    if sx.shape != sy.shape:
        raise ValueError(f"covariance orders differ: {sx.shape[0]} vs {sy.shape[0]}")
    lam, U = np.linalg.eigh(sx)
    lam_max = float(lam.max())
    if lam_max <= 0.0 or lam[0] <= POSITIVITY_RTOL * lam_max:
        raise ValueError(
            f"sigma_x is singular or near-singular: smallest eigenvalue {lam[0]:.3e} "
            f"(largest {lam_max:.3e})"
        )
    W = U / np.sqrt(lam)
    d = np.linalg.eigvalsh(W.T @ sy @ W)
    if d[0] <= 0.0:
        raise ValueError(f"sigma_y is singular: whitened eigenvalue {d[0]:.3e}; the divergence is infinite")
    return max(0.5 * float(np.sum(_kl_terms(d))), 0.0)


def scalar_gaussian_kl(var_x: float, var_y: float) -> float:
    """KL(N(0, var_y) || N(0, var_x)) for scalar Gaussians."""
    if not var_x > 0.0:
        raise ValueError(f"var_x must be positive, got {var_x}")
    if not var_y > 0.0:
        raise ValueError(f"var_y must be positive (log diverges at 0), got {var_y}")
    lam = np.array([var_x])
    W = 1.0 / np.sqrt(lam)
    d = W * var_y * W
    return max(0.5 * float(np.sum(_kl_terms(d))), 0.0)


def _reference_ratio(S_ref: SpectrumSamples, S_other: SpectrumSamples) -> np.ndarray:
    _same_grid(S_ref, S_other)
    low = S_ref.values < ZERO_FLOOR
    if np.any(low):
        j = int(np.flatnonzero(low)[0])
        raise RatioUndefinedError(
            f"ratio undefined: reference spectrum vanishes at grid index {j} (w={S_ref.omega[j]:.6g})"
        )
    return S_other.values / S_ref.values


def itakura_saito(S_y: SpectrumSamples, S_yhat: SpectrumSamples) -> float:
    """(1/2pi) * integral of {S_yhat/S_y - ln(S_yhat/S_y) - 1}."""
    ratio = _reference_ratio(S_y, S_yhat)
    if np.any(ratio == 0.0):
        return float("inf")
    return max(float(np.mean(_kl_terms(ratio))), 0.0)


def kl_rate(S_y: SpectrumSamples, S_nhat: SpectrumSamples) -> float:
    """KL divergence rate from y to y + nhat for independent stationary Gaussian y, nhat.

    (1/2pi) * integral of 0.5 * {S_nhat/S_y - ln(1 + S_nhat/S_y)}.
    """
    r = _reference_ratio(S_y, S_nhat)
    return max(0.5 * float(np.mean(r - np.log1p(r))), 0.0)
