"""Second-quantized weak-field Hamiltonians on a small lattice.

Bosons on ``M`` sites with fixed particle number ``N``.  The Hamiltonian is

    H = m N [rest mass] + sum_ij T_ij a_i^+ a_j + H_int,

where on the N-particle sector the interaction is diagonal in occupation
numbers and equals the regularized pair energy summed over unordered pairs
plus ``N * delta_m``.  Two particles on one site interact through the
analytic ``F_sigma(0)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .kernels import CouplingKind, CouplingSpec, delta_m, gaussian_density
from .krylov import expm_multiply_hermitian
from .lattice import Lattice

DEFAULT_MAX_DIMENSION = 2_000_000
DENSE_LIMIT = 2000


class DimensionError(ValueError):
    def __init__(self, dimension: int, cap: int):
        super().__init__(f"Fock dimension {dimension} exceeds the cap of {cap}")
        self.dimension = dimension


def fock_dimension(n_sites: int, n_particles: int) -> int:
    return math.comb(n_particles + n_sites - 1, n_particles)


def _occupations(M: int, N: int) -> np.ndarray:
    """All occupation vectors, descending lexicographic order ((N,0,..,0) first)."""
    dim = fock_dimension(M, N)
    out = np.zeros((dim, M), dtype=np.int64)
    row = 0

    def fill(site: int, remaining: int, prefix: list[int]):
        nonlocal row
        if site == M - 1:
            out[row, :site] = prefix
            out[row, site] = remaining
            row += 1
            return
        for n in range(remaining, -1, -1):
            prefix.append(n)
            fill(site + 1, remaining - n, prefix)
            prefix.pop()

    if M == 0:
        return out
    fill(0, N, [])
    return out


@dataclass(frozen=True, eq=False)
class FockBasis:
    lattice: Lattice
    n_particles: int
    states: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.states.shape[0]

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    @cached_property
    def _rank_table(self) -> np.ndarray:
        # table[r, s] = C(r + s, s); r < N keeps every entry below the dimension
        N, M = self.n_particles, self.n_sites
        t = np.zeros((max(N, 1), M + 1), dtype=np.int64)
        for r in range(max(N, 1)):
            for s in range(M + 1):
                t[r, s] = math.comb(r + s, s)
        return t

    def index(self, occ: np.ndarray) -> np.ndarray:
        """Basis positions of occupation rows ``occ`` (shape (k, M) or (M,))."""
        occ = np.asarray(occ, dtype=np.int64)
        single = occ.ndim == 1
        occ = np.atleast_2d(occ)
        if occ.shape[1] != self.n_sites:
            raise ValueError("occupation vector length does not match the lattice")
        if np.any(occ < 0) or np.any(occ.sum(axis=1) != self.n_particles):
            raise ValueError("occupation vector not in this N-particle basis")
        M = self.n_sites
        remaining = self.n_particles - np.cumsum(occ, axis=1) + occ
        rank = np.zeros(occ.shape[0], dtype=np.int64)
        # states before n at site k: sum over larger values v of n_k, counted
        # by the hockey-stick identity C(R_k - n_k - 1 + s, s), s = M - k - 1
        for k in range(M - 1):
            gap = remaining[:, k] - occ[:, k]
            s = M - k - 1
            pos = gap > 0
            rank[pos] += self._rank_table[gap[pos] - 1, s]
        return int(rank[0]) if single else rank

    def vector(self, amplitudes) -> "FockVector":
        return FockVector(self, np.asarray(amplitudes, dtype=complex))

    def basis_vector(self, occ) -> "FockVector":
        amps = np.zeros(self.dimension, dtype=complex)
        amps[self.index(np.asarray(occ))] = 1.0
        return FockVector(self, amps)


def build_basis(lattice: Lattice, n_particles: int,
                max_dimension: int = DEFAULT_MAX_DIMENSION) -> FockBasis:
    if n_particles < 0:
        raise ValueError("particle number must be >= 0")
    dim = fock_dimension(lattice.n_sites, n_particles)
    if dim > max_dimension:
        raise DimensionError(dim, max_dimension)
    states = _occupations(lattice.n_sites, n_particles)
    states.setflags(write=False)
    return FockBasis(lattice, n_particles, states)


@dataclass(frozen=True, eq=False)
class FockVector:
    basis: FockBasis
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dimension,):
            raise ValueError(f"{amps.shape[0] if amps.ndim else 0} amplitudes for a basis of "
                             f"dimension {self.basis.dimension}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("non-finite amplitudes")
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "FockVector":
        return FockVector(self.basis, self.amplitudes / self.norm())

    def __add__(self, other: "FockVector") -> "FockVector":
        _same_basis(self, other)
        return FockVector(self.basis, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "FockVector") -> "FockVector":
        _same_basis(self, other)
        return FockVector(self.basis, self.amplitudes - other.amplitudes)

    def __rmul__(self, c: complex) -> "FockVector":
        return FockVector(self.basis, c * self.amplitudes)

    def site_occupations(self) -> np.ndarray:
        """<n_i> for every site, per unit norm."""
        p = np.abs(self.amplitudes) ** 2
        return (p @ self.basis.states) / p.sum()


def _same_basis(a: FockVector, b: FockVector):
    if a.basis is not b.basis and (a.basis.lattice != b.basis.lattice
                                   or a.basis.n_particles != b.basis.n_particles):
        raise ValueError("vectors live in different Fock bases")


@dataclass(eq=False)
class ManyBodyOperator:
    """Sparse Hermitian operator on a fixed-N Fock basis."""

    basis: FockBasis
    matrix: sp.csr_matrix = field(repr=False)
    coupling: CouplingSpec | None = None
    hopping: np.ndarray | None = field(default=None, repr=False)
    _eig: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_error(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(abs(d).max()) if d.nnz else 0.0

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        if self._eig is None:
            self._eig = np.linalg.eigh(self.dense())
        return self._eig

    def expectation(self, v: FockVector) -> float:
        a = v.amplitudes
        return float(np.vdot(a, self.matrix @ a).real / np.vdot(a, a).real)

    def to_csv(self, path) -> None:
        """Coordinate triples (row, col, re, im), one nonzero per line."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "col", "re", "im"])
            for k in order:
                z = complex(coo.data[k])
                w.writerow([int(coo.row[k]), int(coo.col[k]), f"{z.real:.17g}", f"{z.imag:.17g}"])


def read_operator_csv(path, basis: FockBasis) -> sp.csr_matrix:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    rows, cols = data[:, 0].astype(int), data[:, 1].astype(int)
    return sp.csr_matrix((data[:, 2] + 1j * data[:, 3], (rows, cols)),
                         shape=(basis.dimension, basis.dimension))


def interaction_diagonal(basis: FockBasis, coupling: CouplingSpec) -> np.ndarray:
    """Interaction energy of each occupation vector, self-energy included."""
    if coupling.kind is CouplingKind.COULOMB_EXTERNAL:
        raise ValueError("an external Coulomb source is not a pair interaction")
    n = basis.states.astype(float)
    N = basis.n_particles
    if coupling.strength == 0.0:
        return np.zeros(basis.dimension)
    w = coupling.sign * coupling.strength * basis.lattice.pair_kernel(coupling.sigma)
    # sum_{i<j} n_i n_j W_ij + sum_i C(n_i, 2) W_ii
    pairs = 0.5 * np.einsum("si,ij,sj->s", n, w, n) - 0.5 * n @ np.diag(w)
    return pairs + N * delta_m(coupling)


def build_hamiltonian(basis: FockBasis, coupling: CouplingSpec, include_rest_mass: bool = False,
                      include_kinetic: bool = True, stencil: str = "fourth",
                      allow_under_resolved: bool = False) -> ManyBodyOperator:
    lat = basis.lattice
    if coupling.strength > 0 and coupling.sigma <= 0:
        raise ValueError("a positive smearing width sigma is required")
    if (coupling.strength > 0 and coupling.sigma < 2.0 * lat.spacing
            and not allow_under_resolved):
        raise ValueError(f"sigma = {coupling.sigma} is below two lattice spacings "
                         f"({2.0 * lat.spacing}); pass allow_under_resolved=True to override")
    m = coupling.mass
    dim = basis.dimension
    states = basis.states
    N = basis.n_particles

    diag = interaction_diagonal(basis, coupling)
    if include_rest_mass:
        diag = diag + m * N
    t = lat.hopping_matrix(m, stencil) if include_kinetic else np.zeros((lat.n_sites,) * 2)
    diag = diag + states @ np.diag(t)

    rows, cols, vals = [np.arange(dim)], [np.arange(dim)], [diag.astype(complex)]
    if N > 0:
        ii, jj = np.nonzero(t)
        for i, j in zip(ii, jj):
            if i == j:
                continue
            src = np.nonzero(states[:, j] > 0)[0]
            if src.size == 0:
                continue
            new = states[src].copy()
            new[:, j] -= 1
            new[:, i] += 1
            dst = basis.index(new)
            # a_i^+ a_j |n> = sqrt(n_j (n_i + 1)) |n - e_j + e_i>
            amp = t[i, j] * np.sqrt((states[src, j] * (states[src, i] + 1)).astype(float))
            rows.append(dst)
            cols.append(src)
            vals.append(amp.astype(complex))
    mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(dim, dim))
    return ManyBodyOperator(basis, mat, coupling, t)


def number_operator(basis: FockBasis) -> ManyBodyOperator:
    n = basis.states.sum(axis=1).astype(complex)
    return ManyBodyOperator(basis, sp.diags(n, format="csr"))


def one_particle_matrix(H: ManyBodyOperator) -> np.ndarray:
    if H.basis.n_particles != 1:
        raise ValueError(f"one_particle_matrix needs the N=1 sector, got N={H.basis.n_particles}")
    # N=1 states are e_0, e_1, ... in order, so rows are sites
    return H.dense()


def two_particle_matrix(H: ManyBodyOperator) -> np.ndarray:
    if H.basis.n_particles != 2:
        raise ValueError(f"two_particle_matrix needs the N=2 sector, got N={H.basis.n_particles}")
    return H.dense()


def evolve_exact(H: ManyBodyOperator, v: FockVector, t: float, method: str = "auto",
                 tol: float = 1e-12) -> FockVector:
    """exp(-i H t) v, by dense eigendecomposition or Lanczos."""
    if v.basis is not H.basis and v.basis.dimension != H.dimension:
        raise ValueError("state and operator dimensions differ")
    if t == 0:
        return FockVector(v.basis, v.amplitudes.copy())
    if method == "auto":
        method = "dense" if H.dimension < DENSE_LIMIT else "krylov"
    if method == "dense":
        evals, evecs = H.eigh()
        out = evecs @ (np.exp(-1j * t * evals) * (evecs.conj().T @ v.amplitudes))
    elif method == "krylov":
        out = expm_multiply_hermitian(H.matrix, v.amplitudes, -t, tol=tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return FockVector(v.basis, out)


def mass_density_expectation(v: FockVector, sigma: float, mass: float = 1.0) -> np.ndarray:
    """<v| mu_reg(r) |v> at every lattice site, normalized by <v|v>.

    mu_reg(r) = m sum_j smear(r - r_j) n_j with the Gaussian smearing
    function sampled at minimum-image distances.
    """
    lat = v.basis.lattice
    if v.basis.n_particles == 0:
        return np.zeros(lat.n_sites)
    smear = gaussian_density(lat.distances, sigma, lat.dim)
    return mass * smear @ v.site_occupations()


def number_expectation(v: FockVector) -> float:
    p = np.abs(v.amplitudes) ** 2
    return float(p @ v.basis.states.sum(axis=1) / p.sum())


def linearity_check(H: ManyBodyOperator, v1: FockVector, v2: FockVector,
                    a: complex, b: complex, t: float, method: str = "auto") -> float:
    """|| U(av1 + bv2) - a U v1 - b U v2 || with U = exp(-iHt)."""
    _same_basis(v1, v2)
    mixed = evolve_exact(H, a * v1 + b * v2, t, method)
    split = a * evolve_exact(H, v1, t, method) + b * evolve_exact(H, v2, t, method)
    return (mixed - split).norm()
