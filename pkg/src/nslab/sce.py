"""Semiclassical sourcing of the Newtonian potential by a Fock state.

Two one-particle evolutions from the same lattice orbital:

* ``MEAN_FIELD_SOURCED``: the potential is rebuilt every half step from
  the expectation value of the smeared mass density of the evolving state,
  and the orbital feels it through the smeared coupling.  This is the
  lattice self-gravitating equation.
* ``EXACT_FIELD``: the orbital is the N=1 sector of the linear many-body
  Hamiltonian, where the interaction is a constant self-energy.

A Gaussian of width ``sigma`` centred on every site has the closed-form
Newtonian potential ``-G m erf(r / (sigma sqrt 2)) / r``, so the potential
of the smeared density is an exact lattice sum; averaging it once more over
the smearing function gives the pair kernel ``F_sigma``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .fock import FockVector, build_basis, build_hamiltonian, evolve_exact
from .kernels import CouplingKind, CouplingSpec, f_sigma, gaussian_source_potential
from .lattice import Lattice


class SourceMode(str, enum.Enum):
    MEAN_FIELD_SOURCED = "mean-field-sourced"
    EXACT_FIELD = "exact-field"


def sce_potential(v: FockVector, sigma: float, G: float, mass: float = 1.0) -> np.ndarray:
    """Newtonian potential of <mu_reg> at every site: -G m sum_j <n_j> erf(r_ij/(sigma sqrt2))/r_ij."""
    lat = v.basis.lattice
    if v.basis.n_particles == 0:
        return np.zeros(lat.n_sites)
    green = gaussian_source_potential(lat.distances, sigma)
    return -G * mass * (green @ v.site_occupations())


def felt_potential(v: FockVector, sigma: float, G: float, mass: float = 1.0) -> np.ndarray:
    """Potential energy of one smeared particle at each site, m (smear * V).

    Equals -G m^2 sum_j <n_j> F_sigma(r_ij).
    """
    lat = v.basis.lattice
    if v.basis.n_particles == 0:
        return np.zeros(lat.n_sites)
    return -G * mass**2 * (f_sigma(lat.distances, sigma) @ v.site_occupations())


def _phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    """min over global phases of ||a - e^{i phi} b|| for unit vectors."""
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    ov = np.vdot(b, a)
    phase = ov / abs(ov) if ov != 0 else 1.0
    return float(np.linalg.norm(a - phase * b))


@dataclass
class SemiclassicalRun:
    mode: SourceMode
    coupling: CouplingSpec
    times: np.ndarray = field(repr=False)
    orbitals: np.ndarray = field(repr=False)

    @property
    def densities(self) -> np.ndarray:
        return np.abs(self.orbitals) ** 2


def _gravity_constant(coupling: CouplingSpec) -> float:
    if coupling.kind is not CouplingKind.GRAVITY:
        raise ValueError("semiclassical sourcing is defined for gravity")
    return coupling.strength / coupling.mass**2


def run_mean_field_sourced(lattice: Lattice, chi0: np.ndarray, coupling: CouplingSpec,
                           dt: float, steps: int, stencil: str = "fourth",
                           fixed_source: bool = False) -> SemiclassicalRun:
    """Strang evolution under hopping plus the potential sourced by the state itself.

    With ``fixed_source`` the potential is computed once from the initial
    state and held fixed.
    """
    G = _gravity_constant(coupling)
    basis = build_basis(lattice, 1)
    hop = expm(-1j * dt * lattice.hopping_matrix(coupling.mass, stencil))

    def kick(chi):
        if coupling.strength == 0:
            return np.zeros(lattice.n_sites)
        return felt_potential(FockVector(basis, chi), coupling.sigma, G, coupling.mass)

    chi = np.asarray(chi0, dtype=complex) / np.linalg.norm(chi0)
    v_fixed = kick(chi) if fixed_source else None
    out = [chi.copy()]
    for _ in range(steps):
        v = v_fixed if fixed_source else kick(chi)
        chi = np.exp(-0.5j * dt * v) * chi
        chi = hop @ chi
        v = v_fixed if fixed_source else kick(chi)
        chi = np.exp(-0.5j * dt * v) * chi
        out.append(chi.copy())
    return SemiclassicalRun(SourceMode.MEAN_FIELD_SOURCED, coupling,
                            dt * np.arange(steps + 1), np.array(out))


def run_exact_field(lattice: Lattice, chi0: np.ndarray, coupling: CouplingSpec, dt: float,
                    steps: int, stencil: str = "fourth") -> SemiclassicalRun:
    """N=1 many-body evolution sampled at the same times as the sourced run."""
    basis = build_basis(lattice, 1)
    H = build_hamiltonian(basis, coupling, stencil=stencil)
    v = FockVector(basis, np.asarray(chi0, dtype=complex) / np.linalg.norm(chi0))
    times = dt * np.arange(steps + 1)
    out = [evolve_exact(H, v, t, method="dense").amplitudes for t in times]
    return SemiclassicalRun(SourceMode.EXACT_FIELD, coupling, times, np.array(out))


@dataclass
class MisstepReport:
    times: np.ndarray = field(repr=False)
    l2_distance: np.ndarray = field(repr=False)
    density_overlap: np.ndarray = field(repr=False)
    norm_a: np.ndarray = field(repr=False)
    norm_b: np.ndarray = field(repr=False)
    threshold: float = 0.01

    CSV_COLUMNS = ("t", "l2_distance", "density_overlap", "norm_a", "norm_b")

    @property
    def max_distance(self) -> float:
        return float(self.l2_distance.max())

    @property
    def crossing_time(self) -> float | None:
        """First recorded time at which the distance exceeds the threshold."""
        hit = np.flatnonzero(self.l2_distance > self.threshold)
        return float(self.times[hit[0]]) if hit.size else None

    def write_csv(self, path) -> None:
        cols = np.column_stack([self.times, self.l2_distance, self.density_overlap,
                                self.norm_a, self.norm_b])
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.CSV_COLUMNS) + "\n")
            for row in cols:
                fh.write(",".join("%.17g" % x for x in row) + "\n")


def misstep_compare(lattice: Lattice, chi0: np.ndarray, coupling: CouplingSpec, t: float,
                    dt: float, stencil: str = "fourth", fixed_source: bool = False,
                    threshold: float = 0.01
                    ) -> tuple[MisstepReport, SemiclassicalRun, SemiclassicalRun]:
    """Sourced versus exact one-particle evolution from identical initial data.

    The distance between orbitals is minimized over a global phase, since
    the exact evolution carries the self-energy as a phase exp(-i delta_m t).
    """
    steps = max(1, int(round(t / dt)))
    dt = t / steps
    chi0 = np.asarray(chi0, dtype=complex)
    a = run_mean_field_sourced(lattice, chi0, coupling, dt, steps, stencil, fixed_source)
    b = run_exact_field(lattice, chi0, coupling, dt, steps, stencil)
    dist = np.array([_phase_aligned_distance(x, y) for x, y in zip(a.orbitals, b.orbitals)])
    rho_a, rho_b = a.densities, b.densities
    overlap = np.sum(np.sqrt(rho_a * rho_b), axis=1) / np.sqrt(rho_a.sum(1) * rho_b.sum(1))
    report = MisstepReport(a.times, dist, overlap, np.linalg.norm(a.orbitals, axis=1),
                           np.linalg.norm(b.orbitals, axis=1), threshold)
    return report, a, b


def default_orbital(lattice: Lattice, width: float = 1.5) -> np.ndarray:
    """Real Gaussian lump on site 0, width in lattice spacings."""
    r = lattice.distances[0] / lattice.spacing
    chi = np.exp(-(r**2) / (4.0 * width**2)).astype(complex)
    return chi / np.linalg.norm(chi)


__all__ = ["SourceMode", "SemiclassicalRun", "MisstepReport", "sce_potential", "felt_potential",
           "run_mean_field_sourced", "run_exact_field", "misstep_compare", "default_orbital"]
