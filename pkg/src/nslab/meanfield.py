"""Hartree ansatz on the lattice and its convergence to exact N-body dynamics.

The exact side evolves the symmetrized product state of N copies of an
orbital under the many-body Hamiltonian.  The mean-field side evolves the
orbital alone under the lattice Hartree equation with the interaction
scaled by ``N - 1``.  The two are compared through one-body reduced
density matrices.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln
from scipy.stats import spearmanr

from .fock import (FockBasis, FockVector, build_basis, build_hamiltonian, evolve_exact)
from .kernels import CouplingKind, CouplingSpec, delta_m
from .lattice import Lattice
from .nse import LatticeNSE


@dataclass(frozen=True, eq=False)
class HartreeState:
    lattice: Lattice
    orbital: np.ndarray = field(repr=False)
    n_particles: int = 1

    def __post_init__(self):
        chi = np.asarray(self.orbital, dtype=complex)
        if chi.shape != (self.lattice.n_sites,):
            raise ValueError("orbital length does not match the lattice")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        nrm = np.linalg.norm(chi)
        if nrm == 0:
            raise ValueError("orbital is identically zero")
        object.__setattr__(self, "orbital", chi / nrm)

    def embed(self, basis: FockBasis | None = None) -> FockVector:
        basis = basis or build_basis(self.lattice, self.n_particles)
        return product_embed(self.orbital, self.n_particles, basis)


def product_embed(chi: np.ndarray, N: int, basis: FockBasis) -> FockVector:
    """Symmetrized N-fold product of ``chi`` in the occupation basis.

    The amplitude of ``(n_1, ..., n_M)`` is sqrt(N! / prod n_i!) prod chi_i^n_i.
    """
    chi = np.asarray(chi, dtype=complex)
    if basis.n_particles != N:
        raise ValueError(f"basis holds {basis.n_particles} particles, not {N}")
    if chi.shape != (basis.n_sites,):
        raise ValueError("orbital length does not match the basis lattice")
    chi = chi / np.linalg.norm(chi)
    n = basis.states
    log_weight = 0.5 * (gammaln(N + 1) - gammaln(n + 1).sum(axis=1))
    amps = np.exp(log_weight) * np.prod(chi[None, :] ** n, axis=1)
    return FockVector(basis, amps)


def _hops(basis: FockBasis, i: int, j: int):
    """(source rows, target rows, sqrt(n_i (n_j + 1))) for a_j^+ a_i."""
    states = basis.states
    src = np.nonzero(states[:, i] > 0)[0]
    new = states[src].copy()
    new[:, i] -= 1
    new[:, j] += 1
    amp = np.sqrt((states[src, i] * (states[src, j] + 1)).astype(float))
    return src, basis.index(new), amp


def one_body_rdm(v: FockVector) -> np.ndarray:
    """rho_ij = <a_j^+ a_i> / N, per unit norm.

    With this index order a product state of orbital chi gives chi chi^+.
    """
    basis = v.basis
    N = basis.n_particles
    if N == 0:
        raise ValueError("one-body density matrix is undefined for the vacuum")
    c = v.amplitudes / v.norm()
    M = basis.n_sites
    rho = np.zeros((M, M), dtype=complex)
    p = np.abs(c) ** 2
    rho[np.diag_indices(M)] = p @ basis.states
    for i in range(M):
        for j in range(M):
            if i == j:
                continue
            src, dst, amp = _hops(basis, i, j)
            rho[i, j] = np.sum(np.conj(c[dst]) * amp * c[src])
    return rho / N


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of a - b for Hermitian matrices."""
    d = a - b
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


def hartree_solver(lattice: Lattice, N: int, coupling: CouplingSpec,
                   stencil: str = "fourth") -> LatticeNSE:
    """Lattice Hartree equation whose pair coupling is scaled by N - 1."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return LatticeNSE(lattice, coupling, scale=float(N - 1), stencil=stencil)


def hartree_evolve_lattice(chi0: np.ndarray, N: int, coupling: CouplingSpec, t: float,
                           dt: float, lattice: Lattice, stencil: str = "fourth",
                           record_every: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Orbital trajectory (times, orbitals) of the finite-N Hartree equation."""
    steps = max(1, int(round(t / dt)))
    chi0 = np.asarray(chi0, dtype=complex)
    chi0 = chi0 / np.linalg.norm(chi0)
    return hartree_solver(lattice, N, coupling, stencil).evolve(chi0, t / steps, steps,
                                                                record_every)


def hartree_energy(solver: LatticeNSE, chi: np.ndarray, N: int, coupling: CouplingSpec) -> float:
    """<product state| H |product state> for the orbital chi (self-energy included)."""
    e = N * solver.energy(chi)
    if coupling.strength > 0:
        e += N * delta_m(coupling)
    return e


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    t: float
    trace_distance: float
    fidelity: float
    energy_exact: float
    energy_hartree: float
    wall_ms: float

    @property
    def energy_gap(self) -> float:
        return self.energy_exact - self.energy_hartree


@dataclass
class ConvergenceReport:
    rows: list[ConvergenceRow]
    exponent: float
    spearman: float
    g_total: float
    t_final: float

    CSV_COLUMNS = ("N", "t", "trace_distance", "fidelity", "energy_exact", "energy_hartree",
                   "wall_ms")

    def final_rows(self) -> list[ConvergenceRow]:
        return [r for r in self.rows if r.t == self.t_final]

    def final_distances(self) -> tuple[np.ndarray, np.ndarray]:
        rows = self.final_rows()
        return (np.array([r.N for r in rows], dtype=float),
                np.array([r.trace_distance for r in rows]))

    def write_csv(self, path, include_wall: bool = True) -> None:
        cols = self.CSV_COLUMNS if include_wall else self.CSV_COLUMNS[:-1]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            for r in self.rows:
                vals = [str(r.N)] + ["%.17g" % getattr(r, c) for c in cols[1:]]
                fh.write(",".join(vals) + "\n")

    def summary(self) -> dict:
        n, d = self.final_distances()
        return {"exponent": self.exponent, "spearman": self.spearman, "g_total": self.g_total,
                "t": self.t_final, "N": n.astype(int).tolist(), "trace_distance": d.tolist()}

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def fit_exponent(n: np.ndarray, d: np.ndarray) -> float:
    """Least-squares slope of log d against log N."""
    n, d = np.asarray(n, float), np.asarray(d, float)
    ok = d > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(n[ok]), np.log(d[ok]), 1)[0])


def default_orbital(lattice: Lattice) -> np.ndarray:
    """Real Gaussian bump centred on site 0 with width of one lattice spacing."""
    r = lattice.distances[0] / lattice.spacing
    chi = np.exp(-0.5 * r**2).astype(complex)
    return chi / np.linalg.norm(chi)


def convergence_experiment(M: int, N_list, g_total: float, t: float, dt: float,
                           sigma: float = 2.0, spacing: float = 1.0, mass: float = 1.0,
                           kind: CouplingKind | str = CouplingKind.GRAVITY,
                           chi0: np.ndarray | None = None, n_records: int = 1,
                           stencil: str = "fourth", dim: int = 1,
                           allow_under_resolved: bool = False) -> ConvergenceReport:
    """Exact N-body dynamics of a product state against its Hartree orbital.

    The pair strength is ``g_total / (N - 1)`` so the Hartree equation is
    the same for every N.  Distances are recorded at ``n_records`` evenly
    spaced times ending at ``t``.
    """
    kind = CouplingKind(kind)
    sites = M if dim == 1 else round(M ** (1.0 / 3.0))
    lattice = Lattice(dim, sites, spacing)
    if lattice.n_sites != M:
        raise ValueError(f"M = {M} is not a valid site count in {dim}D")
    chi0 = default_orbital(lattice) if chi0 is None else np.asarray(chi0, dtype=complex)
    chi0 = chi0 / np.linalg.norm(chi0)
    steps = max(1, int(round(t / dt)))
    if steps % n_records:
        raise ValueError("n_records must divide the number of Hartree steps")
    h_dt = t / steps
    record_every = steps // n_records

    rows = []
    for N in sorted(N_list):
        if N < 2:
            raise ValueError("convergence_experiment needs N >= 2")
        t0 = time.perf_counter()
        coupling = CouplingSpec(kind, g_total / (N - 1), sigma, mass)
        basis = build_basis(lattice, N)
        H = build_hamiltonian(basis, coupling, stencil=stencil,
                              allow_under_resolved=allow_under_resolved)
        solver = hartree_solver(lattice, N, coupling, stencil)
        times, orbitals = solver.evolve(chi0, h_dt, steps, record_every)
        psi = product_embed(chi0, N, basis)
        e_exact = H.expectation(psi)
        prev_t = 0.0
        for tk, chi in zip(times[1:], orbitals[1:]):
            psi = evolve_exact(H, psi, tk - prev_t)
            prev_t = tk
            rho = one_body_rdm(psi)
            dist = trace_distance(rho, np.outer(chi, chi.conj()))
            overlap = np.vdot(product_embed(chi, N, basis).amplitudes, psi.amplitudes)
            rows.append(ConvergenceRow(N, float(tk), dist, float(abs(overlap) ** 2),
                                       H.expectation(psi), hartree_energy(solver, chi, N, coupling),
                                       0.0))
        wall = (time.perf_counter() - t0) * 1e3
        rows[-n_records:] = [ConvergenceRow(**{**asdict(r), "wall_ms": wall})
                             for r in rows[-n_records:]]

    t_final = rows[-1].t
    final = [r for r in rows if r.t == t_final]
    n = np.array([r.N for r in final], dtype=float)
    d = np.array([r.trace_distance for r in final])
    rho_s = float(spearmanr(n, d).statistic) if len(final) > 2 and np.ptp(d) > 0 else float("nan")
    return ConvergenceReport(rows, fit_exponent(n, d), rho_s, g_total, t_final)


__all__ = ["HartreeState", "ConvergenceRow", "ConvergenceReport", "product_embed",
           "one_body_rdm", "trace_distance", "hartree_solver", "hartree_evolve_lattice",
           "hartree_energy", "fit_exponent", "default_orbital", "convergence_experiment"]
