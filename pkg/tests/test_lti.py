from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stealthcurve.lti import (
    ClosedLoop,
    FirstOrderPlant,
    OpenLoop,
    RationalTransferFunction,
    StabilityError,
    check_closed_loop_stability,
    plant_frequency_response,
    realize_controller,
)
from stealthcurve.spectra import FrequencyGrid

GRID = FrequencyGrid(256)
nonzero = st.floats(0.1, 5.0) | st.floats(-5.0, -0.1)


def at_omega(plant, omega):
    return plant_frequency_response(plant, SimpleNamespace(z=np.exp(1j * np.atleast_1d(omega))))[0]


@pytest.mark.parametrize(
    "a,b,c,omega,expected",
    [(0.0, 1.0, 1.0, 0.0, 1.0), (0.5, 1.0, 1.0, 0.0, 2.0), (0.5, 2.0, 3.0, np.pi, -4.0)],
)
def test_plant_response_examples(a, b, c, omega, expected):
    assert at_omega(FirstOrderPlant(a, b, c), omega) == pytest.approx(expected + 0j, abs=1e-14)


def test_plant_response_rejects_empty_grid():
    with pytest.raises(ValueError):
        plant_frequency_response(FirstOrderPlant(0.5, 1, 1), SimpleNamespace(z=np.array([], dtype=complex)))


@given(a=st.floats(-0.99, 0.99), b=nonzero, c=nonzero)
@settings(max_examples=50, deadline=None)
def test_plant_magnitude_matches_closed_form(a, b, c):
    p = FirstOrderPlant(a, b, c)
    resp = plant_frequency_response(p, GRID)
    expected = b * b * c * c / (1 + a * a - 2 * a * np.cos(GRID.omega))
    np.testing.assert_allclose(np.abs(resp) ** 2, expected, rtol=1e-12)
    np.testing.assert_array_equal(resp[1:], np.conj(resp[1:][::-1]))


def test_plant_invariants():
    with pytest.raises(ValueError):
        FirstOrderPlant(0.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        FirstOrderPlant(0.5, 1.0, 0.0)
    with pytest.raises(ValueError):
        FirstOrderPlant(0.5, 1.0, 1.0, sigma_w2=-1.0)
    with pytest.raises(StabilityError):
        OpenLoop(FirstOrderPlant(1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        OpenLoop(FirstOrderPlant(0.5, 1.0, 1.0, 0.0, 0.0))


def test_controller_invariants():
    with pytest.raises(ValueError):
        RationalTransferFunction((1.0, 0.0), (1.0,))
    with pytest.raises(ValueError):
        RationalTransferFunction((1.0,), (0.0, 1.0))
    # leading numerator zeros do not count toward the degree
    k = RationalTransferFunction((0.0, 0.0, 2.0), (1.0, -0.5))
    assert k.numerator == (2.0,)


def test_stability_examples():
    r = check_closed_loop_stability(FirstOrderPlant(0.5, 1, 1), RationalTransferFunction.constant(0.5))
    assert r.stable and r.pole_magnitudes == pytest.approx((0.0,), abs=1e-15)

    r = check_closed_loop_stability(FirstOrderPlant(2.0, 1, 1), RationalTransferFunction.constant(0.0))
    assert not r.stable and r.pole_magnitudes == pytest.approx((2.0,))

    r = check_closed_loop_stability(FirstOrderPlant(1.2, 1, 1), RationalTransferFunction.constant(0.5))
    assert r.stable and r.poles[0] == pytest.approx(0.7)


def test_marginal_loop_is_unstable():
    r = check_closed_loop_stability(FirstOrderPlant(1.5, 1, 1), RationalTransferFunction.constant(0.5))
    assert r.pole_magnitudes[0] == pytest.approx(1.0)
    assert not r.stable
    with pytest.raises(StabilityError, match="not stable"):
        ClosedLoop(FirstOrderPlant(1.5, 1, 1), RationalTransferFunction.constant(0.5))


def test_pole_magnitudes_sorted_descending():
    k = RationalTransferFunction((0.8, 0.1), (1.0, -0.3))
    r = check_closed_loop_stability(FirstOrderPlant(1.2, 1, 1), k)
    assert list(r.pole_magnitudes) == sorted(r.pole_magnitudes, reverse=True)
    assert r.stable


@given(
    num=st.lists(st.floats(-2, 2), min_size=1, max_size=3),
    den_tail=st.lists(st.floats(-0.9, 0.9), min_size=2, max_size=2),
    scale=st.floats(0.01, 100.0) | st.floats(-100.0, -0.01),
    a=st.floats(-1.5, 1.5),
)
@settings(max_examples=60, deadline=None)
def test_stability_invariant_to_common_scaling(num, den_tail, scale, a):
    plant = FirstOrderPlant(a, 1.0, 1.0)
    den = [1.0] + den_tail
    base = check_closed_loop_stability(plant, RationalTransferFunction(num, den))
    scaled = check_closed_loop_stability(
        plant, RationalTransferFunction([scale * v for v in num], [scale * v for v in den])
    )
    np.testing.assert_allclose(base.pole_magnitudes, scaled.pole_magnitudes, rtol=1e-7, atol=1e-7)
    if abs(base.spectral_radius - 1.0) > 1e-6:
        assert base.stable == scaled.stable


def test_realize_static_gain():
    ss = realize_controller(RationalTransferFunction.constant(0.5))
    assert ss.order == 0 and ss.D == 0.5


def test_realize_unit_delay():
    ss = realize_controller(RationalTransferFunction((1.0,), (1.0, 0.0)))
    np.testing.assert_array_equal(ss.A, [[0.0]])
    np.testing.assert_array_equal(ss.B, [[1.0]])
    np.testing.assert_array_equal(ss.C, [[1.0]])
    assert ss.D == 0.0


def test_realize_biproper_first_order():
    k = RationalTransferFunction((1.0, 0.1), (1.0, -0.3))
    ss = realize_controller(k)
    assert ss.A[0, 0] == pytest.approx(0.3)
    assert ss.D == pytest.approx(1.0)
    assert (ss.C @ ss.B)[0, 0] == pytest.approx(0.4)
    direct = k(GRID.z)
    np.testing.assert_allclose(ss.frequency_response(GRID.z), direct, rtol=1e-10)


@given(
    num=st.lists(st.floats(-3, 3), min_size=1, max_size=4),
    poles=st.lists(st.floats(-0.95, 0.95), min_size=3, max_size=3),
    lead=st.floats(0.2, 5.0),
)
@settings(max_examples=60, deadline=None)
def test_realization_reproduces_frequency_response(num, poles, lead):
    k = RationalTransferFunction(num, lead * np.poly(poles))
    ss = realize_controller(k)
    z = GRID.z[::8]
    direct = k(z)
    realized = ss.frequency_response(z)
    err = np.abs(realized - direct)
    assert np.all((err <= 1e-10 * np.abs(direct)) | (err <= 1e-12))
