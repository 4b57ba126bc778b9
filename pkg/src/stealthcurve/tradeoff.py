"""Stealthiness-distortion tradeoff: worst-case attack spectra and their finite-horizon counterpart.

For an output spectrum S_y the least detectable attack that produces a
state distortion D shapes the attack's contribution to the output as

    S_nhat(w) = zeta * S_y(w)**2 / (1 - zeta * S_y(w)),   0 < zeta < 1 / max S_y,

with zeta fixed by mean(S_nhat) = c**2 * D. (zeta is minus the Lagrange
multiplier of the distortion constraint.) The same allocation rule applied to
the eigenvalues of a Toeplitz block covariance gives the finite-horizon
problem, whose per-sample value converges to the spectral one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from .divergence import RatioUndefinedError, kl_rate
from .lti import ClosedLoop, OpenLoop, plant_frequency_response
from .spectra import ZERO_FLOOR, FrequencyGrid, SpectrumSamples, output_spectrum, toeplitz_covariance

BRACKET_MARGIN = 1e-9
MAX_BISECTIONS = 200
RESIDUAL_RTOL = 1e-10
MAX_ORACLE_HORIZON = 8191
OVERFLOW = 1e300


class SolverError(RuntimeError):
    """A numerical solve failed or violated one of its guaranteed properties."""


def _attack_power(t: np.ndarray) -> np.ndarray:
    # t = zeta*S; multiplied by S this is the allocated power zeta*S^2/(1 - zeta*S)
    return t / (1.0 - t)


def _kl_integrand(t: np.ndarray) -> np.ndarray:
    r = t / (1.0 - t)
    return 0.5 * (r - np.log1p(r))


def _positive_levels(values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError(f"{what} is empty")
    if np.any(values < ZERO_FLOOR):
        j = int(np.argmin(values))
        raise RatioUndefinedError(f"{what} must be strictly positive; entry {j} is {values[j]:.3e}")
    return values


def _solve_zeta(levels: np.ndarray, target: float, mean_of: Callable[[float], float], label: str) -> float:
    """Bisection for the unique zeta in (0, 1/max(levels)) with mean_of(zeta) == target.

    ``mean_of`` must be strictly increasing on the open bracket and diverge at
    its upper end. Probes whose value overflows are treated as +inf.
    """
    top = float(levels.max())
    margin = BRACKET_MARGIN
    while True:
        hi = (1.0 - margin) / top
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            g_hi = mean_of(hi)
        if not np.isfinite(g_hi) or g_hi > OVERFLOW or g_hi >= target:
            break
        margin *= 1e-3
        if margin < 1e-15:
            raise SolverError(f"{label}: target {target:.6g} not reachable below zeta*max S = 1")
    lo, g_lo = 0.0, 0.0
    g_hi = np.inf if (not np.isfinite(g_hi) or g_hi > OVERFLOW) else g_hi
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            g_mid = mean_of(mid)
        if not np.isfinite(g_mid) or g_mid > OVERFLOW:
            hi, g_hi = mid, np.inf
            continue
        if not (g_lo <= g_mid <= g_hi):
            raise SolverError(f"{label}: monotone bracket violated at zeta={mid:.17g}")
        if g_mid < target:
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
    zeta = hi if abs(g_hi - target) < abs(target - g_lo) else lo
    if zeta <= 0.0:
        zeta = hi
    residual = abs(mean_of(zeta) - target)
    if residual > RESIDUAL_RTOL * target:
        # near zeta*max S = 1 the spacing of doubles bounds the attainable residual at ~1e-16/(1 - zeta*max S)
        raise SolverError(
            f"{label}: residual {residual:.3e} exceeds {RESIDUAL_RTOL:g} x target {target:.6g} "
            f"(zeta*max S = 1 - {1.0 - zeta * top:.1e}; target not resolvable in double precision)"
        )
    if not 0.0 < zeta * top < 1.0:
        raise SolverError(f"{label}: solved zeta={zeta!r} outside (0, 1/max S)")
    return zeta


def distortion_budget_integral(S_y: SpectrumSamples, zeta: float) -> float:
    """(1/2pi) * integral of zeta S_y^2 / (1 - zeta S_y)."""
    s = S_y.values
    return float(np.mean(s * _attack_power(zeta * s)))


def kl_budget_integral(S_y: SpectrumSamples, zeta: float) -> float:
    """(1/2pi) * integral of 0.5 {zeta S_y/(1 - zeta S_y) - ln[1/(1 - zeta S_y)]}."""
    return float(np.mean(_kl_integrand(zeta * S_y.values)))


def solve_zeta_for_distortion(S_y: SpectrumSamples, budget: float) -> float:
    """zeta with mean(zeta S_y^2 / (1 - zeta S_y)) == budget, budget = c^2 D."""
    if not budget > 0.0:
        raise ValueError(f"distortion budget must be positive, got {budget}")
    s = _positive_levels(S_y.values, "output spectrum")
    return _solve_zeta(s, float(budget), lambda z: float(np.mean(s * _attack_power(z * s))), "distortion")


def solve_zeta_for_kl(S_y: SpectrumSamples, R: float) -> float:
    """zeta whose water-filled attack has KL divergence rate exactly R."""
    if not R > 0.0:
        raise ValueError(f"KL budget must be positive, got {R}")
    s = _positive_levels(S_y.values, "output spectrum")
    return _solve_zeta(s, float(R), lambda z: float(np.mean(_kl_integrand(z * s))), "kl")


def attack_output_spectrum(S_y: SpectrumSamples, zeta: float) -> SpectrumSamples:
    s = S_y.values
    return SpectrumSamples(S_y.grid, s * _attack_power(zeta * s))


def attack_path_response(model, grid: FrequencyGrid) -> np.ndarray:
    """Frequency response from the injected signal n to the output deviation nhat."""
    plant = model.plant
    if isinstance(model, OpenLoop):
        return plant_frequency_response(plant, grid)
    if isinstance(model, ClosedLoop):
        z = grid.z
        return (plant.b * plant.c) / (z - plant.a + model.controller(z) * plant.b * plant.c)
    raise TypeError(f"unsupported model type {type(model).__name__}")


@dataclass(frozen=True)
class TradeoffPoint:
    distortion_D: float
    zeta: float
    kl_rate: float
    S_nhat: SpectrumSamples
    S_n: SpectrumSamples
    S_y: SpectrumSamples


def worst_case_attack(
    model,
    grid: Optional[FrequencyGrid] = None,
    *,
    distortion: Optional[float] = None,
    kl_budget: Optional[float] = None,
) -> TradeoffPoint:
    """Least detectable attack for a distortion target, or most damaging one for a KL budget."""
    if (distortion is None) == (kl_budget is None):
        raise ValueError("give exactly one of distortion= or kl_budget=")
    grid = grid or FrequencyGrid()
    S_y = output_spectrum(model, grid)
    c2 = model.plant.c**2
    if distortion is not None:
        if not distortion > 0.0:
            raise ValueError(f"distortion target must be positive, got {distortion}")
        zeta = solve_zeta_for_distortion(S_y, c2 * distortion)
    else:
        zeta = solve_zeta_for_kl(S_y, kl_budget)
    S_nhat = attack_output_spectrum(S_y, zeta)

    gain2 = np.abs(attack_path_response(model, grid)) ** 2
    if not np.all(np.isfinite(gain2)) or np.any(gain2 < ZERO_FLOOR):
        raise SolverError("attack path response vanishes on the grid; attack spectrum is unbounded")
    S_n = SpectrumSamples(grid, S_nhat.values / gain2)
    D = float(np.mean(S_nhat.values)) / c2
    return TradeoffPoint(
        distortion_D=D,
        zeta=zeta,
        kl_rate=kl_rate(S_y, S_nhat),
        S_nhat=S_nhat,
        S_n=S_n,
        S_y=S_y,
    )


@dataclass(frozen=True)
class CurveTable:
    """Rows (target, D, zeta, kl_rate) sorted by target.

    ``kind`` is "distortion" (targets are D, dependent column kl_min) or
    "kl" (targets are R, dependent column D_max).
    """

    kind: str
    rows: np.ndarray
    points: tuple = field(default=(), repr=False)

    @property
    def targets(self) -> np.ndarray:
        return self.rows[:, 0]

    @property
    def distortion(self) -> np.ndarray:
        return self.rows[:, 1]

    @property
    def zeta(self) -> np.ndarray:
        return self.rows[:, 2]

    @property
    def kl(self) -> np.ndarray:
        return self.rows[:, 3]

    def pairs(self) -> np.ndarray:
        """(D, kl_min) or (R, D_max) columns."""
        if self.kind == "distortion":
            return self.rows[:, [1, 3]]
        return self.rows[:, [3, 1]]


def tradeoff_curve(
    model,
    grid: Optional[FrequencyGrid] = None,
    *,
    distortions: Optional[Sequence[float]] = None,
    kl_budgets: Optional[Sequence[float]] = None,
    include_origin: bool = False,
) -> CurveTable:
    if (distortions is None) == (kl_budgets is None):
        raise ValueError("give exactly one of distortions= or kl_budgets=")
    kind = "distortion" if distortions is not None else "kl"
    targets = np.asarray(distortions if distortions is not None else kl_budgets, dtype=float).reshape(-1)
    if targets.size == 0:
        raise ValueError("no targets given")
    if np.any(targets <= 0.0):
        raise ValueError(f"targets must be positive, got {targets[targets <= 0.0][0]}")
    if np.any(np.diff(targets) <= 0.0):
        raise ValueError("targets must be strictly increasing")
    grid = grid or FrequencyGrid()

    points, rows = [], []
    for t in targets:
        try:
            if kind == "distortion":
                p = worst_case_attack(model, grid, distortion=float(t))
            else:
                p = worst_case_attack(model, grid, kl_budget=float(t))
        except (SolverError, ValueError) as exc:
            raise SolverError(f"target {t:.17g}: {exc}") from exc
        points.append(p)
        rows.append((t, p.distortion_D, p.zeta, p.kl_rate))
    table = np.array(rows)
    dependent = table[:, 3] if kind == "distortion" else table[:, 1]
    if np.any(np.diff(dependent) <= 0.0):
        raise SolverError("tradeoff curve is not strictly increasing; grid too coarse for these targets")
    if include_origin:
        table = np.vstack([np.zeros((1, 4)), table])
    return CurveTable(kind=kind, rows=table, points=tuple(points))


@dataclass(frozen=True)
class WaterfillAllocation:
    zeta: float
    allocations: np.ndarray
    kl_per_channel_sum: float


def waterfill_parallel(lambdas, budget: float) -> WaterfillAllocation:
    """Split a total noise power ``budget`` across parallel Gaussian channels of variances ``lambdas``.

    Minimizes sum_i 0.5 * [N_i / lambda_i - ln(1 + N_i / lambda_i)] subject to
    sum_i N_i = budget; the minimizer is N_i = zeta lambda_i^2 / (1 - zeta lambda_i).
    """
    lam = np.asarray(lambdas, dtype=float).reshape(-1)
    if lam.size == 0:
        raise ValueError("eigenvalue list is empty")
    if np.any(lam <= 0.0):
        raise ValueError(f"channel variances must be positive, smallest is {lam.min():.3e}")
    if not budget > 0.0:
        raise ValueError(f"budget must be positive, got {budget}")
    per_channel = float(budget) / lam.size
    zeta = _solve_zeta(lam, per_channel, lambda z: float(np.mean(lam * _attack_power(z * lam))), "waterfill")
    alloc = lam * _attack_power(zeta * lam)
    r = alloc / lam
    return WaterfillAllocation(
        zeta=zeta,
        allocations=alloc,
        kl_per_channel_sum=float(np.sum(0.5 * (r - np.log1p(r)))),
    )


def finite_horizon_min_kl(S_y: SpectrumSamples, budget: float, horizon_k: int) -> float:
    """Minimum KL divergence per sample over a block y_0..y_k with total attack power (k+1)*budget."""
    if horizon_k < 0 or horizon_k > MAX_ORACLE_HORIZON:
        raise ValueError(f"horizon_k must lie in [0, {MAX_ORACLE_HORIZON}], got {horizon_k}")
    if horizon_k + 1 > S_y.grid.n // 2:
        raise ValueError(f"horizon_k + 1 = {horizon_k + 1} exceeds grid.n / 2 = {S_y.grid.n // 2}")
    sigma = toeplitz_covariance(S_y, horizon_k)
    lam = linalg.eigvalsh(sigma)
    if lam[0] < -1e-10 * max(lam[-1], 1.0):
        raise SolverError(f"Toeplitz covariance is not positive semidefinite (eigenvalue {lam[0]:.3e})")
    if lam[0] <= 0.0:
        raise SolverError(f"Toeplitz covariance is singular (eigenvalue {lam[0]:.3e})")
    m = horizon_k + 1
    return waterfill_parallel(lam, m * budget).kl_per_channel_sum / m
