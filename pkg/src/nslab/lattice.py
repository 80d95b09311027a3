"""Periodic site lattice shared by the many-body and lattice mean-field code."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kernels import f_sigma

DEFAULT_MAX_SITES = 64

# second-derivative stencils: coefficients for offsets 0, 1, 2, ... (times 1/h^2)
STENCILS = {
    "nn": (-2.0, 1.0),
    "fourth": (-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0),
}


@dataclass(frozen=True)
class Lattice:
    """``sites_per_axis**dim`` sites with spacing ``spacing`` and periodic wrap.

    Sites are numbered in C order over ``(ix, iy, iz)``.
    """

    dim: int
    sites_per_axis: int
    spacing: float = 1.0
    max_sites: int = DEFAULT_MAX_SITES

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise ValueError(f"dim must be 1 or 3, got {self.dim}")
        if self.sites_per_axis < 1:
            raise ValueError("sites_per_axis must be >= 1")
        if not self.spacing > 0:
            raise ValueError("spacing must be > 0")
        if self.n_sites > self.max_sites:
            raise ValueError(
                f"lattice has {self.n_sites} sites, above the cap of {self.max_sites}")

    @property
    def n_sites(self) -> int:
        return self.sites_per_axis**self.dim

    @property
    def length(self) -> float:
        return self.sites_per_axis * self.spacing

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @cached_property
    def indices(self) -> np.ndarray:
        """(M, dim) integer site coordinates."""
        axes = np.meshgrid(*([np.arange(self.sites_per_axis)] * self.dim), indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=1)

    @cached_property
    def positions(self) -> np.ndarray:
        return self.indices * self.spacing

    @cached_property
    def distances(self) -> np.ndarray:
        """(M, M) minimum-image distances between sites."""
        n = self.sites_per_axis
        d = np.abs(self.indices[:, None, :] - self.indices[None, :, :])
        d = np.minimum(d, n - d) * self.spacing
        return np.sqrt(np.sum(d.astype(float) ** 2, axis=-1))

    def site(self, *idx: int) -> int:
        """Flat index of the site at integer coordinates ``idx``."""
        return int(np.ravel_multi_index(tuple(i % self.sites_per_axis for i in idx),
                                        (self.sites_per_axis,) * self.dim))

    def pair_kernel(self, sigma: float) -> np.ndarray:
        """Matrix of F_sigma(r_ij) with the analytic value on the diagonal."""
        return f_sigma(self.distances, sigma)

    def hopping_matrix(self, mass: float, stencil: str = "fourth") -> np.ndarray:
        """Dense single-particle kinetic matrix -(1/2m) lap on the periodic lattice.

        Offsets that wrap onto the same site (small lattices) are summed.
        """
        coeffs = STENCILS[stencil]
        n = self.sites_per_axis
        M = self.n_sites
        lap = np.zeros((M, M))
        idx = self.indices
        shape = (n,) * self.dim
        rows = np.arange(M)
        for axis in range(self.dim):
            lap[rows, rows] += coeffs[0]
            for off, c in enumerate(coeffs[1:], start=1):
                for s in (off, -off):
                    shifted = idx.copy()
                    shifted[:, axis] = (shifted[:, axis] + s) % n
                    cols = np.ravel_multi_index(tuple(shifted.T), shape)
                    np.add.at(lap, (rows, cols), c)
        lap = 0.5 * (lap + lap.T)
        return -lap / (2.0 * mass * self.spacing**2)

    def dispersion(self, k: np.ndarray, mass: float, stencil: str = "fourth") -> np.ndarray:
        """Analytic eigenvalue of :meth:`hopping_matrix` for plane wave ``k`` along one axis."""
        coeffs = STENCILS[stencil]
        x = np.asarray(k) * self.spacing
        lap = coeffs[0] + sum(2.0 * c * np.cos(j * x) for j, c in enumerate(coeffs[1:], start=1))
        return -lap / (2.0 * mass * self.spacing**2)
