import math

import numpy as np
import pytest

from nslab.lattice import Lattice


def test_site_count_and_cap():
    assert Lattice(3, 4).n_sites == 64
    with pytest.raises(ValueError, match="cap"):
        Lattice(3, 8)
    assert Lattice(3, 8, max_sites=512).n_sites == 512
    with pytest.raises(ValueError):
        Lattice(2, 4)


def test_minimum_image_distances():
    lat = Lattice(1, 6, 0.5)
    assert lat.distances[0].tolist() == [0.0, 0.5, 1.0, 1.5, 1.0, 0.5]
    lat3 = Lattice(3, 4)
    assert lat3.distances[lat3.site(0, 0, 0), lat3.site(3, 3, 1)] == pytest.approx(math.sqrt(3))


@pytest.mark.parametrize("stencil", ["nn", "fourth"])
def test_hopping_symmetric_with_zero_row_sums(stencil):
    T = Lattice(3, 4).hopping_matrix(1.3, stencil)
    assert np.allclose(T, T.T)
    assert np.allclose(T.sum(axis=1), 0.0, atol=1e-13)


@pytest.mark.parametrize("stencil", ["nn", "fourth"])
def test_plane_waves_are_eigenvectors(stencil):
    lat = Lattice(1, 16, 0.7)
    T = lat.hopping_matrix(2.0, stencil)
    x = lat.positions[:, 0]
    for j in range(8):
        k = 2 * math.pi * j / lat.length
        w = np.exp(1j * k * x)
        assert np.allclose(T @ w, lat.dispersion(k, 2.0, stencil) * w, atol=1e-12)


def test_fourth_order_dispersion_within_two_percent_to_quarter_kmax():
    lat = Lattice(1, 64, 0.5)
    k = np.linspace(1e-3, 0.25 * math.pi / lat.spacing, 50)
    exact = k**2 / 2.0
    assert np.max(np.abs(lat.dispersion(k, 1.0, "fourth") / exact - 1)) < 0.02


def test_nearest_neighbour_stencil_is_coarser():
    lat = Lattice(1, 64, 0.5)
    k = 0.25 * math.pi / lat.spacing
    assert abs(lat.dispersion(k, 1.0, "nn") / (k**2 / 2) - 1) > 0.02
