"""Interaction kernels, Gaussian smearing and the Newtonian Poisson solver.

Natural units (hbar = 1) throughout.  A coupling's ``strength`` is the
coefficient multiplying 1/r in the pair energy: ``G m**2`` for gravity and
``e**2 / 4pi`` for Coulomb.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from scipy.special import erf

SQRT_PI = math.sqrt(math.pi)

# below this r/sigma the Taylor series replaces erf(x)/r
_SERIES_CUTOFF = 1e-3


def fft_workers() -> int:
    """Thread count for FFTs, from ``NSLAB_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("NSLAB_THREADS", "1")))
    except ValueError:
        return 1


class CouplingKind(str, enum.Enum):
    GRAVITY = "gravity"
    COULOMB_REPULSIVE = "coulomb"
    COULOMB_EXTERNAL = "coulomb-external"

    @property
    def sign(self) -> int:
        """Sign of the pair energy: -1 attractive, +1 repulsive."""
        return 1 if self is CouplingKind.COULOMB_REPULSIVE else -1


class BoundaryCondition(str, enum.Enum):
    ISOLATED = "isolated"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class CouplingSpec:
    """Kind, strength (coefficient of 1/r), smearing width and particle mass."""

    kind: CouplingKind
    strength: float
    sigma: float = 0.0
    mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", CouplingKind(self.kind))
        if not self.strength >= 0.0 or not math.isfinite(self.strength):
            raise ValueError(f"strength must be finite and >= 0, got {self.strength}")
        if not self.sigma >= 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not self.mass > 0.0:
            raise ValueError(f"mass must be > 0, got {self.mass}")

    @property
    def sign(self) -> int:
        return self.kind.sign

    @classmethod
    def gravity(cls, G: float, mass: float, sigma: float = 0.0) -> "CouplingSpec":
        return cls(CouplingKind.GRAVITY, G * mass**2, sigma, mass)

    @classmethod
    def coulomb(cls, e2: float, mass: float, sigma: float = 0.0) -> "CouplingSpec":
        """Repulsive Coulomb coupling from the squared charge ``e**2``."""
        return cls(CouplingKind.COULOMB_REPULSIVE, e2 / (4.0 * math.pi), sigma, mass)

    def with_strength(self, strength: float) -> "CouplingSpec":
        return CouplingSpec(self.kind, strength, self.sigma, self.mass)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with coordinates in [-L/2, L/2) along each axis.

    The origin sits at index ``n // 2`` on every axis.
    """

    dim: int
    n: int
    spacing: float

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise ValueError(f"dim must be 1 or 3, got {self.dim}")
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"points per axis must be a power of two, got {self.n}")
        if not self.spacing > 0.0:
            raise ValueError(f"spacing must be > 0, got {self.spacing}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def length(self) -> float:
        return self.n * self.spacing

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def k_max(self) -> float:
        return math.pi / self.spacing

    @cached_property
    def axis(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.spacing

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def r(self) -> np.ndarray:
        """Distance of every point from the origin (already minimum-image)."""
        return np.sqrt(sum(c**2 for c in self.coords))

    @cached_property
    def k_axis(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 in unshifted FFT layout."""
        ks = np.meshgrid(*([self.k_axis] * self.dim), indexing="ij")
        return sum(k**2 for k in ks)

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.cell_volume)


@dataclass(frozen=True, eq=False)
class SmearingKernel:
    sigma: float
    grid: Grid
    samples: np.ndarray = field(repr=False)
    under_resolved: bool = False

    @property
    def dim(self) -> int:
        return self.grid.dim

    def total(self) -> float:
        return self.grid.integrate(self.samples)

    @cached_property
    def _spectrum(self) -> np.ndarray:
        # origin moved to index 0 so the convolution does not translate
        return sfft.fftn(np.fft.ifftshift(self.samples)) * self.grid.cell_volume

    def convolve(self, f: np.ndarray) -> np.ndarray:
        """Periodic convolution of ``f`` with the kernel."""
        out = sfft.ifftn(sfft.fftn(f, workers=fft_workers()) * self._spectrum,
                         workers=fft_workers())
        return out.real if np.isrealobj(f) else out


def gaussian_smearing(sigma: float, grid: Grid) -> SmearingKernel:
    if not sigma > 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    r = grid.r
    norm = (2.0 * np.pi * sigma**2) ** (-grid.dim / 2.0)
    samples = norm * np.exp(-(r**2) / (2.0 * sigma**2))
    samples.setflags(write=False)
    return SmearingKernel(sigma, grid, samples, under_resolved=sigma < 2.0 * grid.spacing)


def gaussian_density(r: np.ndarray | float, width: float, dim: int = 3) -> np.ndarray:
    """Normalized Gaussian of standard deviation ``width`` evaluated at radius ``r``."""
    r = np.asarray(r, dtype=float)
    return (2.0 * np.pi * width**2) ** (-dim / 2.0) * np.exp(-(r**2) / (2.0 * width**2))


def f_sigma(r, sigma: float):
    """Regularized pair kernel erf(r / 2 sigma) / r.

    Finite at the origin, where it equals 1 / (sigma sqrt(pi)).  Scalars in,
    scalar out; arrays in, array out.
    """
    if not sigma > 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    scalar = np.ndim(r) == 0
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    out = np.empty_like(r)
    small = r < _SERIES_CUTOFF * sigma
    rs = r[~small]
    out[~small] = erf(rs / (2.0 * sigma)) / rs
    z2 = (r[small] / (2.0 * sigma)) ** 2
    # erf(z)/z = 2/sqrt(pi) (1 - z^2/3 + z^4/10 - z^6/42 + z^8/216)
    series = 1.0 + z2 * (-1.0 / 3.0 + z2 * (1.0 / 10.0 + z2 * (-1.0 / 42.0 + z2 / 216.0)))
    out[small] = series / (sigma * SQRT_PI)
    return float(out) if scalar else out


def gaussian_source_potential(r, width: float):
    """Potential per unit source of a Gaussian blob of std ``width``: erf(r / (width sqrt 2)) / r.

    Same function as the pair kernel at ``sigma = width / sqrt(2)``.
    """
    return f_sigma(r, width / math.sqrt(2.0))


def delta_m(coupling: CouplingSpec) -> float:
    """Self-energy counterterm absorbed into the renormalized mass.

    ``-G m^2 / (sigma sqrt(pi))`` for gravity, ``+e^2 / (4 pi^{3/2} sigma)``
    for repulsive Coulomb.  Diverges as sigma -> 0.
    """
    if coupling.kind is CouplingKind.COULOMB_EXTERNAL:
        raise ValueError("an external Coulomb source carries no self-energy")
    if coupling.sigma <= 0.0:
        raise ValueError("delta_m diverges at sigma = 0; a positive smearing width is required")
    return coupling.sign * coupling.strength / (coupling.sigma * SQRT_PI)


# integral of 1/|r| over the unit cube centred on the origin
_CUBE_INV_R = 3.0 * math.log((math.sqrt(3.0) + 1.0) / (math.sqrt(3.0) - 1.0)) - math.pi / 2.0


class PoissonSolver:
    """Solves lap V = 4 pi G rho on a fixed grid.

    ``ISOLATED`` convolves with the free-space kernel -G/|r| on a doubled,
    zero-padded grid (3D only).  ``PERIODIC`` divides by -k^2 with the
    k = 0 mode removed, after subtracting the mean density.
    """

    def __init__(self, grid: Grid, bc: BoundaryCondition | str = BoundaryCondition.ISOLATED):
        self.grid = grid
        self.bc = BoundaryCondition(bc)
        if self.bc is BoundaryCondition.ISOLATED and grid.dim != 3:
            raise ValueError("isolated boundaries need the 3D 1/r kernel; use periodic in 1D")

    @cached_property
    def _green_hat(self) -> np.ndarray:
        g = self.grid
        n2 = 2 * g.n
        idx = np.arange(n2)
        d = np.minimum(idx, n2 - idx) * g.spacing
        dd = np.meshgrid(d, d, d, indexing="ij", sparse=True)
        r = np.sqrt(dd[0] ** 2 + dd[1] ** 2 + dd[2] ** 2)
        with np.errstate(divide="ignore"):
            green = np.where(r > 0, 1.0 / r, 0.0)
        # self-cell: cell average of 1/r
        green[0, 0, 0] = _CUBE_INV_R / g.spacing
        return sfft.rfftn(green * g.cell_volume, workers=fft_workers())

    @cached_property
    def _inv_k2(self) -> np.ndarray:
        k2 = self.grid.k2
        with np.errstate(divide="ignore"):
            inv = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
        return inv

    def __call__(self, density: np.ndarray, G: float) -> np.ndarray:
        density = np.asarray(density, dtype=float)
        if density.shape != self.grid.shape:
            raise ValueError(f"density shape {density.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(density)):
            raise ValueError("density contains non-finite values")
        w = fft_workers()
        if self.bc is BoundaryCondition.PERIODIC:
            rho_hat = sfft.fftn(density - density.mean(), workers=w)
            return sfft.ifftn(-4.0 * np.pi * G * rho_hat * self._inv_k2, workers=w).real
        n = self.grid.n
        rho_hat = sfft.rfftn(density, s=(2 * n,) * 3, workers=w)
        v = sfft.irfftn(rho_hat * self._green_hat, s=(2 * n,) * 3, workers=w)
        return -G * v[:n, :n, :n]


def poisson_solve(density: np.ndarray, G: float, grid: Grid,
                  bc: BoundaryCondition | str = BoundaryCondition.ISOLATED) -> np.ndarray:
    """One-shot wrapper around :class:`PoissonSolver`."""
    return PoissonSolver(grid, bc)(density, G)
