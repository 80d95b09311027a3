import math

import numpy as np
import pytest

from nslab.kernels import CouplingSpec
from nslab.radial import (NoBoundStateError, RadialProblem, hartree_radial_potential,
                          radial_ground_state, radial_solve)


@pytest.mark.parametrize("mu,alpha,r_max", [(1.0, 1.0, 60.0), (0.5, 2.0, 30.0),
                                            (2.0, 0.5, 60.0)])
def test_hydrogen_levels(mu, alpha, r_max):
    p = RadialProblem(mu, alpha, r_max=r_max)
    assert radial_ground_state(p) == pytest.approx(p.hydrogen_energy(), rel=1e-6)


def test_physical_hydrogen_with_reduced_mass():
    # energies in electron masses; 1 / 137.036 fine-structure constant
    alpha = 1 / 137.035999
    mu = 1.0 / (1.0 + 1.0 / 1836.15267)
    p = RadialProblem(mu, alpha, r_max=60.0 / (mu * alpha), n_points=6000)
    assert radial_ground_state(p) == pytest.approx(-0.5 * mu * alpha**2, rel=1e-3)


def test_wavefunction_matches_analytic():
    p = RadialProblem(1.0, 1.0, r_max=40.0)
    sol = radial_solve(p)
    exact = 2.0 * sol.r * np.exp(-sol.r)
    assert np.max(np.abs(sol.u - exact)) < 1e-4
    assert np.trapezoid(sol.u**2, sol.r) == pytest.approx(1.0, abs=1e-12)


def test_no_bound_state_without_attraction():
    with pytest.raises(NoBoundStateError, match="no bound state in window"):
        radial_ground_state(RadialProblem(1.0, 0.0))


def test_hartree_potential_of_hydrogen_density():
    # V_H(r) = 1/r - exp(-2r) (1 + 1/r) for |u|^2 = 4 r^2 exp(-2r)
    r = np.linspace(0.0, 40.0, 40001)
    u = 2 * r * np.exp(-r)
    v = hartree_radial_potential(r, u, CouplingSpec.coulomb(4 * math.pi, 1.0))
    rr = r[1:]
    exact = 1 / rr - np.exp(-2 * rr) * (1 + 1 / rr)
    assert np.max(np.abs(v[1:] - exact)) < 1e-6
    assert v[0] == pytest.approx(1.0, abs=1e-6)
    g = hartree_radial_potential(r, u, CouplingSpec.gravity(1.0, 1.0))
    assert np.allclose(g, -v)


def test_self_interaction_breaks_the_spectrum():
    self_term = CouplingSpec.coulomb(4 * math.pi, 1.0)
    p = RadialProblem(1.0, 1.0, self_interaction=self_term)
    sol = radial_solve(p)
    assert abs(sol.energy / p.hydrogen_energy() - 1) > 0.1
    assert sol.energy < 0


def test_attractive_self_term_deepens_binding():
    p = RadialProblem(1.0, 1.0, self_interaction=CouplingSpec.gravity(0.3, 1.0))
    assert radial_ground_state(p) < p.hydrogen_energy()


def test_validation():
    with pytest.raises(ValueError):
        RadialProblem(0.0, 1.0)
    with pytest.raises(ValueError):
        RadialProblem(1.0, 1.0, n_points=100)
    with pytest.raises(ValueError):
        RadialProblem(1.0, -1.0)
    assert RadialProblem(2.0, 0.5).bohr_radius == 1.0
