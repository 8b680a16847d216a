import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crosspole.axes import (
    AxisVector,
    Geometry,
    PoleVector,
    axes_to_gaps,
    axes_to_pole_currents,
    gaps_to_axes,
    pole_superposition,
)
from crosspole.magnetics import DomainError

GEO = Geometry(0.1)


@settings(max_examples=200, deadline=None)
@given(
    z=st.floats(5e-3, 40e-3),
    a=st.floats(-0.02, 0.02),
    b=st.floats(-0.02, 0.02),
)
def test_axes_gap_round_trip(z, a, b):
    back = gaps_to_axes(axes_to_gaps(AxisVector(z, a, b), GEO), GEO)
    assert back.z == pytest.approx(z, rel=1e-12)
    assert back.alpha == pytest.approx(a, abs=1e-12)
    assert back.beta == pytest.approx(b, abs=1e-12)


def test_pure_heave_gives_equal_gaps():
    assert axes_to_gaps(AxisVector(0.02, 0.0, 0.0), GEO) == PoleVector(0.02, 0.02, 0.02, 0.02)


def test_tilt_opens_one_side():
    g = axes_to_gaps(AxisVector(0.02, 0.01, 0.0), GEO)
    assert g.v3 - g.v1 == pytest.approx(2 * 0.1 * 0.01)
    assert g.v2 == g.v4 == 0.02


def test_pole_currents_distribution():
    assert axes_to_pole_currents(AxisVector(1.0, 0.5, -0.25)) == PoleVector(0.5, 1.25, 1.5, 0.75)


def test_nonpositive_gap_rejected():
    with pytest.raises(DomainError):
        gaps_to_axes(PoleVector(0.01, 0.0, 0.01, 0.01), GEO)
    with pytest.raises(DomainError):
        Geometry(0.0)


def test_superposition_matches_hand_values():
    K_A, K_B = 12473.0, 9.88
    stiff, gain = pole_superposition(K_A, K_B, GEO)
    r = GEO.r
    assert np.allclose(stiff, np.diag([K_A, K_A * r**2 / 2, K_A * r**2 / 2]), rtol=1e-14, atol=1e-12)
    assert np.allclose(gain, np.diag([K_B, -r * K_B / 2, -r * K_B / 2]), rtol=1e-14, atol=1e-12)


def test_superposition_axes_decouple():
    stiff, gain = pole_superposition(5000.0, 3.0, Geometry(0.07))
    off = ~np.eye(3, dtype=bool)
    assert np.all(np.abs(stiff[off]) < 1e-12 * 5000.0)
    assert np.all(np.abs(gain[off]) < 1e-12 * 3.0)
