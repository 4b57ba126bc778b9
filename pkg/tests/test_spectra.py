import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from conftest import ar1_closed_form
from stealthcurve.lti import ClosedLoop, FirstOrderPlant, OpenLoop, RationalTransferFunction
from stealthcurve.spectra import (
    FrequencyGrid,
    SpectrumSamples,
    ar1_spectrum,
    autocovariance_from_spectrum,
    integrate_spectrum,
    output_spectrum,
    toeplitz_covariance,
    welch_estimate,
    white_spectrum,
)


def test_grid_validation():
    for bad in (0, 32, 100, 4095):
        with pytest.raises(ValueError):
            FrequencyGrid(bad)
    g = FrequencyGrid(64)
    assert g.omega[0] == 0.0 and g.omega[-1] == pytest.approx(2 * np.pi * 63 / 64)
    np.testing.assert_array_equal(g.z[1:], np.conj(g.z[1:][::-1]))


def test_spectrum_samples_invariants(grid):
    with pytest.raises(ValueError, match="negative"):
        SpectrumSamples(grid, -np.ones(grid.n))
    asym = np.ones(grid.n)
    asym[1] = 2.0
    with pytest.raises(ValueError, match="symmetric"):
        SpectrumSamples(grid, asym)
    with pytest.raises(ValueError):
        SpectrumSamples(grid, np.ones(grid.n + 1))
    s = white_spectrum(grid, 1.0)
    with pytest.raises((AttributeError, ValueError)):
        s.values[0] = 3.0


# output_spectrum


def test_open_loop_white_noise_only(grid):
    s = output_spectrum(OpenLoop(FirstOrderPlant(0.0, 1, 1, 1.0, 0.0)), grid)
    np.testing.assert_allclose(s.values, 1.0, rtol=1e-15)


def test_open_loop_ar1_endpoints(grid):
    s = output_spectrum(OpenLoop(FirstOrderPlant(0.5, 1, 1, 0.75, 0.0)), grid)
    assert s.values[0] == pytest.approx(3.0, rel=1e-14)
    assert s.values[grid.n // 2] == pytest.approx(1.0 / 3.0, rel=1e-14)


def test_deadbeat_closed_loop_is_white(grid, deadbeat_model):
    s = output_spectrum(deadbeat_model, grid)
    np.testing.assert_allclose(s.values, 1.0, rtol=1e-14)


@given(
    a=st.floats(-0.95, 0.95),
    b=st.floats(0.2, 3.0),
    c=st.floats(-3.0, -0.2) | st.floats(0.2, 3.0),
    w2=st.floats(0.01, 4.0),
    v2=st.floats(0.0, 4.0),
)
@settings(max_examples=40, deadline=None)
def test_open_loop_direct_formula(a, b, c, w2, v2):
    g = FrequencyGrid(512)
    s = output_spectrum(OpenLoop(FirstOrderPlant(a, b, c, w2, v2)), g)
    expected = c * c * w2 / np.abs(np.exp(1j * g.omega) - a) ** 2 + v2
    np.testing.assert_allclose(s.values, expected, rtol=1e-12)


@pytest.mark.parametrize("a,b,c,su2,w2,v2", [(0.5, 1, 1, 1.0, 0.75, 0.0), (-0.8, 2.0, 0.5, 0.3, 1.0, 0.4)])
def test_parseval_matches_lyapunov_variance(grid, a, b, c, su2, w2, v2):
    model = OpenLoop(FirstOrderPlant(a, b, c, w2, v2), white_spectrum(grid, su2))
    var_x = (b * b * su2 + w2) / (1 - a * a)
    assert integrate_spectrum(output_spectrum(model, grid)) == pytest.approx(c * c * var_x + v2, abs=1e-8)


def test_closed_loop_variance_matches_lyapunov(grid, dynamic_loop_model):
    # independent route: stationary covariance of the wired loop from scipy's Lyapunov solver
    from scipy.linalg import solve_discrete_lyapunov

    p = dynamic_loop_model.plant
    # controller (z+0.125)/(z-0.3)*0.8: D=0.8, C*B=0.8*(0.125+0.3)
    d, cb, ak = 0.8, 0.8 * 0.425, 0.3
    A = np.array([[p.a - p.b * d * p.c, -p.b * cb], [p.c, ak]])
    Bw = np.array([[1.0], [0.0]])
    Bv = np.array([[-p.b * d], [1.0]])
    P = solve_discrete_lyapunov(A, p.sigma_w2 * Bw @ Bw.T + p.sigma_v2 * Bv @ Bv.T)
    var_y = p.c**2 * P[0, 0] + p.sigma_v2
    assert integrate_spectrum(output_spectrum(dynamic_loop_model, grid)) == pytest.approx(var_y, rel=1e-10)


def test_open_loop_input_grid_mismatch():
    model = OpenLoop(FirstOrderPlant(0.5, 1, 1), white_spectrum(FrequencyGrid(128), 1.0))
    with pytest.raises(ValueError, match="grid"):
        output_spectrum(model, FrequencyGrid(256))


# integrate_spectrum


def test_integrate_examples(grid):
    assert integrate_spectrum(white_spectrum(grid, 1.0)) == 1.0
    assert integrate_spectrum(white_spectrum(grid, 0.0)) == 0.0
    ar1 = SpectrumSamples(grid, 0.75 / (1.25 - np.cos(grid.omega)))
    assert integrate_spectrum(ar1) == pytest.approx(1.0, abs=1e-9)


# autocovariance / toeplitz


def test_autocovariance_examples(grid):
    r = autocovariance_from_spectrum(white_spectrum(grid, 1.0), 5)
    np.testing.assert_allclose(r, [1, 0, 0, 0, 0, 0], atol=1e-15)

    r = autocovariance_from_spectrum(ar1_spectrum(grid, 0.5, 0.75), 20)
    np.testing.assert_allclose(r, 0.5 ** np.arange(21), atol=1e-9)

    two_term = SpectrumSamples(grid, 2 * np.cos(grid.omega) + 2)
    np.testing.assert_allclose(autocovariance_from_spectrum(two_term, 2), [2, 1, 0], atol=1e-13)


def test_autocovariance_lag_limit(grid):
    s = white_spectrum(grid, 1.0)
    autocovariance_from_spectrum(s, grid.n // 2 - 1)
    with pytest.raises(ValueError, match="max_lag"):
        autocovariance_from_spectrum(s, grid.n // 2)


def test_autocovariance_bounded_by_variance(grid, dynamic_loop_model):
    s = output_spectrum(dynamic_loop_model, grid)
    r = autocovariance_from_spectrum(s, 200)
    assert r[0] == integrate_spectrum(s)
    assert np.all(np.abs(r) <= r[0])


@pytest.mark.parametrize("a", [0.5, -0.7, 0.9])
def test_spectrum_reconstruction_from_autocovariance(grid, a):
    s = ar1_spectrum(grid, a, 1.0)
    lags = grid.n // 4
    r = autocovariance_from_spectrum(s, lags)
    k = np.arange(1, lags + 1)
    rebuilt = r[0] + 2 * np.cos(np.outer(grid.omega, k)) @ r[1:]
    np.testing.assert_allclose(rebuilt, s.values, rtol=1e-6)


def test_toeplitz_examples(grid):
    np.testing.assert_allclose(toeplitz_covariance(white_spectrum(grid, 1.0), 2), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(
        toeplitz_covariance(ar1_spectrum(grid, 0.5, 0.75), 1), [[1, 0.5], [0.5, 1]], atol=1e-9
    )
    np.testing.assert_array_equal(toeplitz_covariance(white_spectrum(grid, 0.0), 3), np.zeros((4, 4)))


@pytest.mark.parametrize("k", [15, 127, 511])
def test_toeplitz_eigenvalues_within_spectrum_range(grid, dynamic_loop_model, k):
    s = output_spectrum(dynamic_loop_model, grid)
    m = toeplitz_covariance(s, k)
    np.testing.assert_allclose(m, m.T, atol=1e-12)
    lam = np.linalg.eigvalsh(m)
    assert lam.min() >= s.values.min() - 1e-8
    assert lam.max() <= s.values.max() + 1e-8


# welch_estimate


def test_welch_white_noise_variance(grid):
    x = np.random.default_rng(11).standard_normal(2**20)
    est = welch_estimate(x, grid, overlap=0.5, segment_len=4096)
    assert 0.98 <= integrate_spectrum(est) <= 1.02
    assert np.median(est.values) == pytest.approx(1.0, rel=0.02)


def test_welch_zero_series(grid):
    est = welch_estimate(np.zeros(3 * grid.n), grid)
    assert np.all(est.values == 0.0)


def test_welch_ar1_matches_closed_form():
    # segment length 256: ~8000 averaged segments keep per-bin scatter near 1%
    g = FrequencyGrid(256)
    rng = np.random.default_rng(5)
    x = signal.lfilter([1.0], [1.0, -0.5], np.sqrt(0.75) * rng.standard_normal(2**20 + 1000))[1000:]
    est = welch_estimate(x, g)
    exact = ar1_closed_form(g)
    mask = exact > 0.1
    assert np.max(np.abs(est.values[mask] / exact[mask] - 1.0)) < 0.10


def test_welch_errors(grid):
    with pytest.raises(ValueError, match="too short"):
        welch_estimate(np.ones(2 * grid.n - 1), grid)
    with pytest.raises(ValueError, match="segment_len"):
        welch_estimate(np.ones(4 * grid.n), grid, segment_len=1024)
    with pytest.raises(ValueError, match="overlap"):
        welch_estimate(np.ones(4 * grid.n), grid, overlap=1.0)


def test_closed_loop_with_sensor_noise_is_positive(grid):
    model = ClosedLoop(FirstOrderPlant(0.9, 1, 1, 0.0, 1.0), RationalTransferFunction.constant(0.4))
    s = output_spectrum(model, grid)
    assert s.values.min() > 0
