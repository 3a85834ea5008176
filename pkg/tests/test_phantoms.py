import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from modradon.phantoms import Ellipse, Phantom, bulls_eye, render, sample_sinogram, shepp_logan
from modradon.geometry import ScanGeometry


def midpoint_line_integral(p, t, phi, n=40000):
    # integrate the density along x . theta = t with the midpoint rule
    s = -1.5 + 3.0 * (np.arange(n) + 0.5) / n
    c, sn = math.cos(phi), math.sin(phi)
    x = t * c - s * sn
    y = t * sn + s * c
    return float(p.density_at(x, y).sum() * 3.0 / n)


@pytest.mark.parametrize("phi", [0.0, 0.4, math.pi / 2, 2.5])
@pytest.mark.parametrize("t", [-0.6, -0.05, 0.0, 0.3, 0.71])
def test_shepp_logan_projection_matches_quadrature(t, phi):
    p = shepp_logan()
    assert p.radon(t, phi) == pytest.approx(midpoint_line_integral(p, t, phi), abs=2e-3)


@pytest.mark.filterwarnings("ignore:ellipse extends beyond")
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.05, 0.4), st.floats(0.05, 0.4),
       st.floats(0, math.pi), st.floats(-1.2, 1.2), st.floats(0, math.pi))
def test_single_ellipse_projection_matches_quadrature(cx, cy, a, b, alpha, t, phi):
    p = Phantom((Ellipse((cx, cy), a, b, alpha, 1.0),))
    assert p.radon(t, phi) == pytest.approx(midpoint_line_integral(p, t, phi, 20000), abs=5e-3)


def test_projection_vanishes_outside_unit_disk():
    p = shepp_logan()
    phi = np.linspace(0, math.pi, 7)
    assert np.all(p.radon(1.01, phi) == 0)


def test_modified_shepp_logan_range():
    img = render(shepp_logan(), 256)
    assert img.max() == pytest.approx(1.0)
    assert img.min() == pytest.approx(0.0)


def test_original_shepp_logan_is_scaled_to_unit_peak():
    img = render(shepp_logan("original"), 256)
    assert img.max() == pytest.approx(1.0)
    assert render(shepp_logan("original", normalized=False), 64).max() == pytest.approx(2.0)


def test_unknown_variant_rejected():
    with pytest.raises(ValueError):
        shepp_logan("toft-ish")


def test_bulls_eye_rings_alternate():
    img = render(bulls_eye(), 201)
    mid = 100
    # radii 0.1, 0.3, 0.5, 0.7 fall in rings of density 0, 1, 0, 1
    row = img[mid]
    xs = -1 + (2 * np.arange(201) + 1) / 201
    vals = [row[np.argmin(np.abs(xs - r))] for r in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert vals == [0.0, 1.0, 0.0, 1.0, 0.0]


def test_scaled_multiplies_projections():
    p = shepp_logan()
    assert p.scaled(3).radon(0.1, 0.2) == pytest.approx(3 * p.radon(0.1, 0.2))


def test_sample_sinogram_shape_and_symmetry():
    g = ScanGeometry.symmetric(20, 8)
    s = sample_sinogram(bulls_eye(), g)
    assert s.shape == (8, 41)
    # radially symmetric phantom: identical rows, even in t
    assert np.allclose(s, s[0])
    assert np.allclose(s[0], s[0][::-1])


def test_outside_unit_disk_warns():
    with pytest.warns(UserWarning):
        Ellipse((0.8, 0.0), 0.5, 0.5)


def test_render_rejects_tiny_grid():
    with pytest.raises(ValueError):
        render(bulls_eye(), 1)
