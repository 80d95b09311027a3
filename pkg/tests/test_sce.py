import math

import numpy as np
import pytest
from scipy.integrate import quad

from nslab.fock import FockVector, build_basis
from nslab.kernels import CouplingSpec
from nslab.lattice import Lattice
from nslab.nse import LatticeNSE
from nslab.sce import (SourceMode, default_orbital, felt_potential, misstep_compare,
                       run_exact_field, run_mean_field_sourced, sce_potential)


def gaussian_potential_quad(r, s, G=1.0, m=1.0):
    """-G m int rho(r') / |r - r'| for a normalized 3D Gaussian of std s, by shell integration."""
    rho = lambda x: (2 * math.pi * s * s) ** -1.5 * math.exp(-x * x / (2 * s * s))
    inner = quad(lambda x: 4 * math.pi * x * x * rho(x), 0, r)[0] if r > 0 else 0.0
    outer = quad(lambda x: 4 * math.pi * x * rho(x), r, math.inf)[0]
    return -G * m * (inner / r + outer if r > 0 else outer)


def one_particle(lat, chi):
    return FockVector(build_basis(lat, 1), np.asarray(chi, dtype=complex))


def test_vacuum_has_no_potential():
    lat = Lattice(1, 6)
    v = build_basis(lat, 0).basis_vector([0] * 6)
    assert np.all(sce_potential(v, 2.0, 1.0) == 0)
    assert np.all(felt_potential(v, 2.0, 1.0) == 0)


def test_potential_of_localized_particle_against_quadrature():
    lat = Lattice(3, 4, max_sites=64)
    chi = np.zeros(64)
    chi[0] = 1.0
    v = sce_potential(one_particle(lat, chi), 0.9, 1.3, 0.8)
    for j in (0, 1, 5, 21):
        r = lat.distances[0, j]
        assert v[j] == pytest.approx(gaussian_potential_quad(r, 0.9, 1.3, 0.8), rel=1e-9)


def test_superposition_of_occupations():
    lat = Lattice(1, 8)
    basis = build_basis(lat, 2)
    a = basis.basis_vector([2, 0, 0, 0, 0, 0, 0, 0])
    b = basis.basis_vector([1, 0, 0, 1, 0, 0, 0, 0])
    single = build_basis(lat, 1)
    e0 = sce_potential(single.basis_vector(np.eye(8, dtype=int)[0]), 2.0, 1.0)
    e3 = sce_potential(single.basis_vector(np.eye(8, dtype=int)[3]), 2.0, 1.0)
    assert np.allclose(sce_potential(a, 2.0, 1.0), 2 * e0)
    mix = FockVector(basis, (a.amplitudes + b.amplitudes) / math.sqrt(2))
    assert np.allclose(sce_potential(mix, 2.0, 1.0), 1.5 * e0 + 0.5 * e3)


def test_sourced_run_matches_lattice_nse():
    lat = Lattice(1, 12)
    c = CouplingSpec.gravity(1.5, 1.0, 2.0)
    chi0 = default_orbital(lat) * np.exp(0.3j * np.arange(12))
    run = run_mean_field_sourced(lat, chi0, c, 0.02, 200)
    _, ref = LatticeNSE(lat, c).evolve(chi0 / np.linalg.norm(chi0), 0.02, 200)
    assert np.max(np.abs(run.orbitals - ref)) < 1e-10
    assert run.mode is SourceMode.MEAN_FIELD_SOURCED
    assert np.allclose(np.linalg.norm(run.orbitals, axis=1), 1.0, atol=1e-13)


def test_exact_density_ignores_coupling():
    lat = Lattice(1, 12)
    chi0 = default_orbital(lat)
    runs = [run_exact_field(lat, chi0, CouplingSpec.gravity(G, 1.0, 2.0), 0.1, 50)
            for G in (0.0, 1.0, 5.0)]
    for r in runs[1:]:
        assert np.max(np.abs(r.densities - runs[0].densities)) < 1e-12


def test_zero_coupling_gives_zero_distance():
    lat = Lattice(1, 12)
    rep, _, _ = misstep_compare(lat, default_orbital(lat), CouplingSpec.gravity(0.0, 1.0, 2.0),
                                2.0, 0.01)
    assert rep.max_distance < 1e-12
    assert rep.crossing_time is None


def test_misstep_grows_with_coupling():
    lat = Lattice(1, 16)
    chi0 = default_orbital(lat)
    d = [misstep_compare(lat, chi0, CouplingSpec.gravity(G, 1.0, 2.0), 3.0, 0.01)[0].max_distance
         for G in (0.25, 1.0)]
    assert d[0] < d[1]
    rep, _, _ = misstep_compare(lat, chi0, CouplingSpec.gravity(1.0, 1.0, 2.0), 3.0, 0.01)
    assert rep.crossing_time is not None and rep.crossing_time < 3.0
    assert np.allclose(rep.norm_a, 1) and np.allclose(rep.norm_b, 1)


def test_fixed_source_is_a_linear_evolution():
    lat = Lattice(1, 10)
    c = CouplingSpec.gravity(1.0, 1.0, 2.0)
    chi0 = default_orbital(lat)
    run = run_mean_field_sourced(lat, chi0, c, 0.05, 40, fixed_source=True)
    v0 = felt_potential(one_particle(lat, chi0), 2.0, 1.0)
    H = lat.hopping_matrix(1.0) + np.diag(v0)
    from scipy.linalg import expm
    exact = expm(-1j * H * 2.0) @ chi0
    assert np.linalg.norm(run.orbitals[-1] - exact) < 1e-3


def test_requires_gravity():
    lat = Lattice(1, 6)
    with pytest.raises(ValueError):
        run_mean_field_sourced(lat, default_orbital(lat), CouplingSpec.coulomb(1.0, 1.0, 2.0),
                               0.1, 2)
