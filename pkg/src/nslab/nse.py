"""Split-step solvers for the self-gravitating and Hartree-Coulomb equations.

The field obeys

    i d/dt psi = -lap psi / 2m + V[psi] psi,
    V[psi](r) = sign * strength * int |psi(r')|^2 / |r - r'| dr'

with ``sign = -1`` for gravity and ``+1`` for Coulomb repulsion.  The
potential is recomputed from the instantaneous density at every half-kick.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .kernels import (BoundaryCondition, CouplingKind, CouplingSpec, Grid, PoissonSolver,
                      fft_workers)
from .lattice import Lattice

log = logging.getLogger(__name__)


class NonFiniteFieldError(FloatingPointError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class WaveField:
    grid: Grid
    amplitude: np.ndarray = field(repr=False)
    mass: float = 1.0

    def __post_init__(self):
        amp = np.asarray(self.amplitude, dtype=complex)
        if amp.shape != self.grid.shape:
            raise ValueError(f"amplitude shape {amp.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "amplitude", amp)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def norm(self) -> float:
        return self.grid.integrate(self.density)

    def normalized(self, total: float = 1.0) -> "WaveField":
        return self.with_amplitude(self.amplitude * math.sqrt(total / self.norm()))

    def with_amplitude(self, amplitude: np.ndarray) -> "WaveField":
        return WaveField(self.grid, amplitude, self.mass)

    def inner(self, other: "WaveField") -> complex:
        return complex(np.vdot(self.amplitude, other.amplitude) * self.grid.cell_volume)

    def distance(self, other: "WaveField") -> float:
        return math.sqrt(self.grid.integrate(np.abs(self.amplitude - other.amplitude) ** 2))


def gaussian_packet(grid: Grid, width: float, center=None, velocity=None,
                    mass: float = 1.0) -> WaveField:
    """Normalized Gaussian with density std ``width``, optional offset and boost."""
    center = np.zeros(grid.dim) if center is None else np.atleast_1d(np.asarray(center, float))
    r2 = sum((c - x0) ** 2 for c, x0 in zip(grid.coords, center))
    amp = np.exp(-r2 / (4.0 * width**2)).astype(complex)
    if velocity is not None:
        v = np.atleast_1d(np.asarray(velocity, float))
        amp *= np.exp(1j * mass * sum(c * vi for c, vi in zip(grid.coords, v)))
    return WaveField(grid, amp, mass).normalized()


@dataclass(frozen=True)
class EvolutionParams:
    dt: float
    steps: int
    bc: BoundaryCondition = BoundaryCondition.ISOLATED
    record_every: int = 1
    scheme: str = "strang"

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundaryCondition(self.bc))
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 1 <= self.record_every <= self.steps:
            raise ValueError("record_every must lie in [1, steps]")
        if self.scheme != "strang":
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def total_time(self) -> float:
        return self.dt * self.steps


@dataclass(frozen=True)
class Observables:
    time: float
    norm: float
    energy: float
    rms_width: float
    peak_density: float
    center_of_mass: tuple[float, ...]


@dataclass
class Trajectory:
    observables: list[Observables]
    snapshots: list[tuple[float, WaveField]]
    final: WaveField

    @property
    def times(self) -> np.ndarray:
        return np.array([o.time for o in self.observables])

    @property
    def energies(self) -> np.ndarray:
        return np.array([o.energy for o in self.observables])

    @property
    def energy_drift(self) -> float:
        """Largest relative deviation of the energy from its initial value."""
        e = self.energies
        return float(np.max(np.abs(e - e[0])) / max(abs(e[0]), np.finfo(float).tiny))


def stable_dt(grid: Grid, mass: float) -> float:
    """Default step rule dt = 0.5 m h^2."""
    return 0.5 * mass * grid.spacing**2


class SplitStep:
    """Strang propagator (kick / spectral drift / kick) for a fixed grid and coupling."""

    def __init__(self, grid: Grid, coupling: CouplingSpec, mass: float,
                 bc: BoundaryCondition | str = BoundaryCondition.ISOLATED):
        if coupling.kind is CouplingKind.COULOMB_EXTERNAL:
            raise ValueError("self-consistent solvers need a gravity or repulsive Coulomb coupling")
        self.grid = grid
        self.coupling = coupling
        self.mass = mass
        self.poisson = PoissonSolver(grid, bc)
        self._drift_cache: dict[float, np.ndarray] = {}

    def potential(self, density: np.ndarray) -> np.ndarray:
        if self.coupling.strength == 0.0:
            return np.zeros(self.grid.shape)
        # poisson returns -G int rho / |r - r'|
        return self.poisson(density, -self.coupling.sign * self.coupling.strength)

    def _drift(self, dt: float) -> np.ndarray:
        d = self._drift_cache.get(dt)
        if d is None:
            d = np.exp(-1j * dt * self.grid.k2 / (2.0 * self.mass))
            self._drift_cache[dt] = d
        return d

    def kinetic_apply(self, amp: np.ndarray) -> np.ndarray:
        w = fft_workers()
        return sfft.ifftn(self.grid.k2 / (2.0 * self.mass) * sfft.fftn(amp, workers=w), workers=w)

    def step(self, amp: np.ndarray, dt: float, v: np.ndarray | None = None,
             index: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Advance ``amp`` by dt; returns (new amplitude, potential of new density).

        ``v`` may carry the potential of ``amp``'s density from the previous step.
        """
        w = fft_workers()
        if v is None:
            v = self.potential(np.abs(amp) ** 2)
        amp = amp * np.exp(-0.5j * dt * v)
        amp = sfft.ifftn(self._drift(dt) * sfft.fftn(amp, workers=w), workers=w)
        v = self.potential(np.abs(amp) ** 2)
        amp = amp * np.exp(-0.5j * dt * v)
        if not np.all(np.isfinite(amp)):
            raise NonFiniteFieldError(f"non-finite amplitude after step {index}")
        return amp, v

    def energy_terms(self, amp: np.ndarray) -> tuple[float, float]:
        """(kinetic, interaction) with the factor 1/2 on the self-sourced interaction."""
        g = self.grid
        spec = sfft.fftn(amp, workers=fft_workers())
        kin = float(np.sum(g.k2 * np.abs(spec) ** 2)) / (2.0 * self.mass) * g.cell_volume / amp.size
        rho = np.abs(amp) ** 2
        pot = 0.5 * g.integrate(self.potential(rho) * rho)
        return kin, pot

    def energy(self, amp: np.ndarray) -> float:
        return sum(self.energy_terms(amp))

    def observe(self, t: float, amp: np.ndarray) -> Observables:
        g = self.grid
        rho = np.abs(amp) ** 2
        norm = g.integrate(rho)
        com = tuple(g.integrate(c * rho) / norm for c in g.coords)
        var = sum(g.integrate((c - c0) ** 2 * rho) / norm for c, c0 in zip(g.coords, com))
        return Observables(t, norm, self.energy(amp), math.sqrt(max(var, 0.0)),
                           float(rho.max()), com)


def _check_finite(psi: WaveField):
    if not np.all(np.isfinite(psi.amplitude)):
        raise NonFiniteFieldError("non-finite amplitude in initial field (step 0)")


def nse_step(psi: WaveField, coupling: CouplingSpec, dt: float,
             bc: BoundaryCondition | str = BoundaryCondition.ISOLATED) -> WaveField:
    """One Strang step of the self-gravitating equation."""
    if coupling.kind is not CouplingKind.GRAVITY:
        raise ValueError("nse_step needs a gravity coupling")
    _check_finite(psi)
    amp, _ = SplitStep(psi.grid, coupling, psi.mass, bc).step(psi.amplitude, dt, index=1)
    return psi.with_amplitude(amp)


def hartree_step(chi: WaveField, coupling: CouplingSpec, dt: float,
                 bc: BoundaryCondition | str = BoundaryCondition.ISOLATED) -> WaveField:
    """One Strang step of the time-dependent Hartree (Schrodinger-Coulomb) equation."""
    if coupling.kind is not CouplingKind.COULOMB_REPULSIVE:
        raise ValueError("hartree_step needs a repulsive Coulomb coupling")
    _check_finite(chi)
    amp, _ = SplitStep(chi.grid, coupling, chi.mass, bc).step(chi.amplitude, dt, index=1)
    return chi.with_amplitude(amp)


def evolve(psi0: WaveField, coupling: CouplingSpec, params: EvolutionParams,
           keep_snapshots: bool = True) -> Trajectory:
    """Real-time evolution, recording observables (and snapshots) every ``record_every`` steps."""
    _check_finite(psi0)
    solver = SplitStep(psi0.grid, coupling, psi0.mass, params.bc)
    amp = psi0.amplitude
    obs = [solver.observe(0.0, amp)]
    snaps = [(0.0, psi0)] if keep_snapshots else []
    v = None
    for n in range(1, params.steps + 1):
        amp, v = solver.step(amp, params.dt, v, index=n)
        if n % params.record_every == 0 or n == params.steps:
            t = n * params.dt
            obs.append(solver.observe(t, amp))
            if keep_snapshots:
                snaps.append((t, psi0.with_amplitude(amp)))
    return Trajectory(obs, snaps, psi0.with_amplitude(amp))


def propagate(psi0: WaveField, coupling: CouplingSpec, dt: float, steps: int,
              bc: BoundaryCondition | str = BoundaryCondition.ISOLATED) -> WaveField:
    """Final state only; no observables."""
    solver = SplitStep(psi0.grid, coupling, psi0.mass, bc)
    amp, v = psi0.amplitude, None
    for n in range(1, steps + 1):
        amp, v = solver.step(amp, dt, v, index=n)
    return psi0.with_amplitude(amp)


@dataclass
class GroundState:
    psi: WaveField
    energy: float
    chemical_potential: float
    residual: float
    iterations: int
    energy_history: list[float]


def ground_state(psi0: WaveField, coupling: CouplingSpec, itol: float = 1e-9,
                 bc: BoundaryCondition | str = BoundaryCondition.ISOLATED,
                 max_iter: int = 5000, step: float = 1.0) -> GroundState:
    """Lowest stationary state by a preconditioned, normalized gradient flow.

    Each iterate is ``psi - tau P (H psi - mu psi)``, renormalized, with
    ``P = (k^2/2m + shift)^-1``.  tau is halved whenever the energy would
    rise by more than rounding noise, so the energy sequence is
    non-increasing.  Stops once the relative energy change is below
    ``itol`` and the stationarity residual ``||H psi - mu psi||`` (energy
    units, unit norm) is below ``itol`` as well.
    """
    if coupling.kind is not CouplingKind.GRAVITY:
        raise ValueError("ground_state needs a gravity coupling")
    if not np.any(psi0.amplitude):
        raise ValueError("initial field is identically zero")
    _check_finite(psi0)
    g = psi0.grid
    solver = SplitStep(g, coupling, psi0.mass, bc)
    w = fft_workers()
    kin_diag = g.k2 / (2.0 * psi0.mass)
    e_floor = (2.0 * math.pi / g.length) ** 2 / (2.0 * psi0.mass)

    def normalize(a):
        return a / math.sqrt(g.integrate(np.abs(a) ** 2))

    def evaluate(a):
        rho = np.abs(a) ** 2
        v = solver.potential(rho)
        spec = sfft.fftn(a, workers=w)
        ha = sfft.ifftn(kin_diag * spec, workers=w) + v * a
        kin = float(np.sum(kin_diag * np.abs(spec) ** 2)) * g.cell_volume / a.size
        pot = g.integrate(v * rho)
        mu = kin + pot
        res = ha - mu * a
        return kin + 0.5 * pot, mu, res, math.sqrt(g.integrate(np.abs(res) ** 2))

    amp = normalize(psi0.amplitude)
    energy, mu, res, resid = evaluate(amp)
    history = [energy]
    tau = step
    for it in range(1, max_iter + 1):
        shift = max(-mu, 0.0) + e_floor
        direction = sfft.ifftn(sfft.fftn(res, workers=w) / (kin_diag + shift), workers=w)
        while True:
            trial = normalize(amp - tau * direction)
            e_new, mu_new, res_new, resid_new = evaluate(trial)
            noise = 64 * np.finfo(float).eps * max(abs(energy), e_floor)
            if e_new <= energy + noise or tau < 1e-8:
                break
            tau *= 0.5
        d_e = abs(e_new - energy)
        amp, energy, mu, res, resid = trial, e_new, mu_new, res_new, resid_new
        history.append(energy)
        tau = min(step, 2.0 * tau)
        if d_e <= itol * max(abs(energy), e_floor) and resid <= itol:
            return GroundState(psi0.with_amplitude(amp), energy, mu, resid, it, history)
    raise ConvergenceError(f"ground state not converged after {max_iter} iterations", resid)


def stationarity_residual(psi: WaveField, coupling: CouplingSpec,
                          bc: BoundaryCondition | str = BoundaryCondition.ISOLATED
                          ) -> tuple[float, float]:
    """(||H psi - mu psi|| / ||psi||, mu) evaluated independently of the solver loop."""
    solver = SplitStep(psi.grid, coupling, psi.mass, bc)
    a = psi.amplitude
    ha = solver.kinetic_apply(a) + solver.potential(np.abs(a) ** 2) * a
    nrm2 = psi.norm()
    mu = (np.vdot(a, ha) * psi.grid.cell_volume).real / nrm2
    r = psi.grid.integrate(np.abs(ha - mu * a) ** 2)
    return math.sqrt(r / nrm2), mu


def linearity_violation(psi1: WaveField, psi2: WaveField, a: complex, b: complex,
                        coupling: CouplingSpec, t: float, dt: float,
                        bc: BoundaryCondition | str = BoundaryCondition.ISOLATED) -> float:
    """L2 distance between evolving a superposition and superposing evolutions.

    Inputs are normalized first; the superposition is normalized before it
    is evolved and the superposed evolutions are normalized afterwards.
    """
    steps = max(1, int(round(t / dt)))
    dt = t / steps
    p1, p2 = psi1.normalized(), psi2.normalized()
    mixed = p1.with_amplitude(a * p1.amplitude + b * p2.amplitude)
    if mixed.norm() == 0:
        raise ValueError("superposition vanishes")
    evolved_mix = propagate(mixed.normalized(), coupling, dt, steps, bc)
    e1 = propagate(p1, coupling, dt, steps, bc)
    e2 = propagate(p2, coupling, dt, steps, bc) if b != 0 else p2
    combo = p1.with_amplitude(a * e1.amplitude + b * e2.amplitude).normalized()
    return evolved_mix.distance(combo)


def two_lump_state(n: int = 32, spacing: float = 0.5, separation: float = 4.0,
                   width: float = 1.0, mass: float = 1.0) -> tuple[WaveField, WaveField]:
    """Two Gaussians displaced along x, symmetric about the isolated-domain centre."""
    grid = Grid(3, n, spacing)
    c = -0.5 * spacing
    left = gaussian_packet(grid, width, [c - separation / 2, c, c], mass=mass)
    right = gaussian_packet(grid, width, [c + separation / 2, c, c], mass=mass)
    return left, right


def two_lump_violation(G: float = 1.0, steps: int = 40, **lump) -> float:
    """Default nonlinearity probe: equal-weight superposition of two lumps."""
    p1, p2 = two_lump_state(**lump)
    dt = stable_dt(p1.grid, p1.mass)
    a = 1.0 / math.sqrt(2.0)
    return linearity_violation(p1, p2, a, a, CouplingSpec.gravity(G, p1.mass), steps * dt, dt)


class LatticeNSE:
    """Self-consistent orbital equation on a site lattice.

        i d/dt chi_i = sum_j T_ij chi_j + V_i chi_i,
        V_i = sign * strength * scale * sum_j F_sigma(r_ij) |chi_j|^2 + offset

    Strang split with the hopping propagated exactly through the
    eigendecomposition of T.  ``scale`` carries finite-N bookkeeping for the
    Hartree ansatz; ``offset`` is a constant on-site energy.
    """

    def __init__(self, lattice: Lattice, coupling: CouplingSpec, scale: float = 1.0,
                 offset: float = 0.0, stencil: str = "fourth", hopping: np.ndarray | None = None):
        if coupling.kind is CouplingKind.COULOMB_EXTERNAL:
            raise ValueError("self-consistent solvers need a gravity or repulsive Coulomb coupling")
        self.lattice = lattice
        self.coupling = coupling
        self.hopping = lattice.hopping_matrix(coupling.mass, stencil) if hopping is None else hopping
        g = coupling.sign * coupling.strength * scale
        self.kernel = g * lattice.pair_kernel(coupling.sigma) if g != 0 else np.zeros_like(self.hopping)
        self.offset = offset
        self._evals, self._evecs = np.linalg.eigh(self.hopping)
        self._hop_cache: dict[float, np.ndarray] = {}

    def potential(self, chi: np.ndarray) -> np.ndarray:
        return self.kernel @ (np.abs(chi) ** 2) + self.offset

    def hop(self, dt: float) -> np.ndarray:
        u = self._hop_cache.get(dt)
        if u is None:
            u = (self._evecs * np.exp(-1j * dt * self._evals)) @ self._evecs.conj().T
            self._hop_cache[dt] = u
        return u

    def step(self, chi: np.ndarray, dt: float) -> np.ndarray:
        chi = chi * np.exp(-0.5j * dt * self.potential(chi))
        chi = self.hop(dt) @ chi
        return chi * np.exp(-0.5j * dt * self.potential(chi))

    def energy(self, chi: np.ndarray) -> float:
        """<T> + offset + (1/2) <V_int>, per unit norm."""
        rho = np.abs(chi) ** 2
        kin = float(np.vdot(chi, self.hopping @ chi).real)
        return kin + self.offset * float(rho.sum()) + 0.5 * float(rho @ self.kernel @ rho)

    def evolve(self, chi0: np.ndarray, dt: float, steps: int,
               record_every: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Returns (times, orbitals) with orbitals stacked along axis 0."""
        chi = np.asarray(chi0, dtype=complex)
        times, out = [0.0], [chi.copy()]
        for n in range(1, steps + 1):
            chi = self.step(chi, dt)
            if not np.all(np.isfinite(chi)):
                raise NonFiniteFieldError(f"non-finite orbital after step {n}")
            if n % record_every == 0 or n == steps:
                times.append(n * dt)
                out.append(chi.copy())
        return np.array(times), np.array(out)

    def ground_state(self, chi0: np.ndarray, tol: float = 1e-12,
                     max_iter: int = 200000) -> np.ndarray:
        """Normalized gradient flow on the same equation; the fixed point is exactly stationary."""
        chi = np.asarray(chi0, dtype=complex)
        chi = chi / np.linalg.norm(chi)
        tau0 = 1.0 / (np.abs(self._evals).max() + np.abs(self.kernel).sum(axis=1).max()
                      + abs(self.offset) + 1e-300)
        tau = tau0
        energy = self.energy(chi)
        for _ in range(max_iter):
            h_chi = self.hopping @ chi + self.potential(chi) * chi
            mu = float(np.vdot(chi, h_chi).real)
            res = h_chi - mu * chi
            if np.linalg.norm(res) < tol:
                return chi
            while True:
                trial = chi - tau * res
                trial /= np.linalg.norm(trial)
                e_new = self.energy(trial)
                noise = 64 * np.finfo(float).eps * max(abs(energy), tau0 ** -1)
                if e_new <= energy + noise or tau < 1e-12 * tau0:
                    break
                tau *= 0.5
            chi, energy = trial, e_new
            tau = min(tau0, 2.0 * tau)
        raise ConvergenceError("lattice gradient flow did not converge", float(np.linalg.norm(res)))


def lattice_nse_evolve(chi0: np.ndarray, lattice: Lattice, coupling: CouplingSpec,
                       dt: float, steps: int, record_every: int = 1, stencil: str = "fourth"):
    """Lattice self-gravitating (or self-repelling) orbital trajectory."""
    return LatticeNSE(lattice, coupling, stencil=stencil).evolve(chi0, dt, steps, record_every)


__all__ = [
    "WaveField", "EvolutionParams", "Observables", "Trajectory", "GroundState",
    "SplitStep", "LatticeNSE", "gaussian_packet", "stable_dt", "nse_step", "hartree_step",
    "evolve", "propagate", "ground_state", "stationarity_residual", "linearity_violation",
    "lattice_nse_evolve", "two_lump_state", "two_lump_violation", "NonFiniteFieldError",
    "ConvergenceError",
]
