"""s-wave radial eigenvalue solver used as the hydrogen oracle.

Solves

    -(1/2 mu) u'' + [-alpha / r + V_self[u](r)] u = E u,   u(0) = u(r_max) = 0

by Numerov shooting from the origin.  The ground state is bracketed by
node counting and the sign of u(r_max), refined by bisection.  When a
self-interaction is present the Hartree potential of the particle's own
radial density is iterated to self-consistency with linear mixing.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import bisect

from .kernels import CouplingKind, CouplingSpec

log = logging.getLogger(__name__)

_RESCALE = 1e150


class NoBoundStateError(ValueError):
    def __init__(self):
        super().__init__("no bound state in window")


@dataclass(frozen=True)
class RadialProblem:
    reduced_mass: float
    external_coulomb_strength: float
    self_interaction: CouplingSpec | None = None
    r_max: float = 60.0
    n_points: int = 4000

    def __post_init__(self):
        if not self.reduced_mass > 0:
            raise ValueError("reduced_mass must be > 0")
        if not self.external_coulomb_strength >= 0:
            raise ValueError("external_coulomb_strength must be >= 0")
        if not self.r_max > 0:
            raise ValueError("r_max must be > 0")
        if self.n_points < 1000:
            raise ValueError("n_points must be >= 1000")
        if (self.self_interaction is not None
                and self.self_interaction.kind is CouplingKind.COULOMB_EXTERNAL):
            raise ValueError("the self term needs a gravity or repulsive Coulomb coupling")

    @property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, self.r_max, self.n_points + 1)

    @property
    def bohr_radius(self) -> float:
        return 1.0 / (self.reduced_mass * self.external_coulomb_strength)

    def hydrogen_energy(self) -> float:
        """Exact Coulomb ground energy -mu alpha^2 / 2."""
        return -0.5 * self.reduced_mass * self.external_coulomb_strength**2


@dataclass
class RadialSolution:
    energy: float
    r: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    iterations: int = 0


def _shoot(E: float, mu: float, alpha: float, v_extra: np.ndarray, h: float):
    """Numerov integration from r = 0; returns (u, node count).

    ``v_extra`` is the regular part of the potential sampled on the grid.
    The first point uses the small-r limit f u -> -2 mu alpha.
    """
    n = v_extra.size - 1
    h2 = h * h
    r = np.arange(1, n + 1) * h
    # plain Python floats: the recurrence is sequential and scalar
    f = 2.0 * mu * (-alpha / r + v_extra[1:] - E)
    g = (1.0 - h2 * f / 12.0).tolist()
    hf = (h2 * f).tolist()
    u = [0.0] * (n + 1)
    u1 = h * (1.0 - mu * alpha * h)
    u[1] = u1
    w_prev = h2 * mu * alpha / 6.0
    w = g[0] * u1
    ui = u1
    nodes = 0
    scale_at = []
    for i in range(1, n):
        w_next = 2.0 * w - w_prev + hf[i - 1] * ui
        u_next = w_next / g[i]
        if u_next * ui < 0.0:
            nodes += 1
        u[i + 1] = u_next
        ui = u_next
        w_prev, w = w, w_next
        if abs(w) > _RESCALE:
            w_prev /= _RESCALE
            w /= _RESCALE
            ui /= _RESCALE
            scale_at.append(i + 1)
    out = np.array(u)
    for j in scale_at:
        out[: j + 1] /= _RESCALE
    return out, nodes


def _lowest_eigenvalue(mu: float, alpha: float, v_extra: np.ndarray, h: float,
                       e_guess: float) -> tuple[float, np.ndarray]:
    if _shoot(0.0, mu, alpha, v_extra, h)[1] == 0:
        raise NoBoundStateError()
    lo = -abs(e_guess) if e_guess else -1.0
    while _shoot(lo, mu, alpha, v_extra, h)[1] > 0:
        lo *= 2.0

    def below(e):
        # +1 strictly below the ground level: no node and u(r_max) > 0
        u, nodes = _shoot(e, mu, alpha, v_extra, h)
        return 1.0 if nodes == 0 and u[-1] > 0 else -1.0

    energy = bisect(below, lo, 0.0, xtol=1e-16 * abs(lo), rtol=4 * np.finfo(float).eps,
                    maxiter=400)
    u, _ = _shoot(energy, mu, alpha, v_extra, h)
    # past the physical peak |u| decays to a minimum, then the unstable
    # growing solution takes over; cut it there
    a = np.abs(u)
    falling = np.flatnonzero(np.diff(a[1:]) < 0)
    peak = int(falling[0]) + 1 if falling.size else 0
    cut = peak + int(np.argmin(a[peak:]))
    u[cut:] = 0.0
    u /= math.sqrt(np.trapezoid(u**2, dx=h))
    return energy, u


def hartree_radial_potential(r: np.ndarray, u: np.ndarray, coupling: CouplingSpec) -> np.ndarray:
    """sign * strength * [(1/r) int_0^r u^2 + int_r^inf u^2 / r'] for normalized u.

    The smearing width of the coupling is not applied; the radial density
    is already smooth on the grid scale.
    """
    rho = u**2
    inner = cumulative_trapezoid(rho, r, initial=0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(r > 0, rho / np.where(r > 0, r, 1.0), 0.0)
    outer_cum = cumulative_trapezoid(integrand, r, initial=0.0)
    outer = outer_cum[-1] - outer_cum
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(r > 0, inner / np.where(r > 0, r, 1.0), 0.0) + outer
    v[0] = outer[0]
    return coupling.sign * coupling.strength * v


def radial_solve(problem: RadialProblem, mixing: float = 0.5, tol: float = 1e-10,
                 max_iter: int = 500) -> RadialSolution:
    """Ground state of the radial problem, self-consistent when a self term is set."""
    mu, alpha = problem.reduced_mass, problem.external_coulomb_strength
    r = problem.r
    h = r[1] - r[0]
    zero = np.zeros_like(r)
    guess = -0.5 * mu * alpha**2 if alpha > 0 else -1.0
    energy, u = _lowest_eigenvalue(mu, alpha, zero, h, guess)
    if problem.self_interaction is None:
        return RadialSolution(energy, r, u, 1)
    # start from a hydrogenic density four times wider than the bare orbital;
    # strong self-screening of the compact one can leave nothing bound
    a = 4.0 / (mu * alpha) if alpha > 0 else 4.0
    rho = 4.0 / a**3 * r**2 * np.exp(-2.0 * r / a)
    rho /= np.trapezoid(rho, dx=h)
    energy, u = _lowest_eigenvalue(
        mu, alpha, hartree_radial_potential(r, np.sqrt(rho), problem.self_interaction), h, energy)
    beta = mixing
    for it in range(1, max_iter + 1):
        trial = (1.0 - beta) * rho + beta * u**2
        v_self = hartree_radial_potential(r, np.sqrt(trial), problem.self_interaction)
        try:
            e_new, u_new = _lowest_eigenvalue(mu, alpha, v_self, h, energy)
        except NoBoundStateError:
            beta *= 0.5
            if beta < 1e-6:
                raise
            continue
        done = abs(e_new - energy) <= tol * abs(e_new)
        rho, energy, u = trial, e_new, u_new
        beta = min(mixing, 2.0 * beta)
        if done:
            return RadialSolution(energy, r, u, it)
    log.warning("self-consistent radial iteration stopped at max_iter=%d", max_iter)
    return RadialSolution(energy, r, u, max_iter)


def radial_ground_state(problem: RadialProblem) -> float:
    """Lowest eigenvalue of the (possibly self-interacting) radial problem."""
    return radial_solve(problem).energy


__all__ = ["RadialProblem", "RadialSolution", "NoBoundStateError", "radial_ground_state",
           "radial_solve", "hartree_radial_potential"]
