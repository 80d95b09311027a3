"""Newton-Schrodinger and Hartree solvers side by side with the linear lattice field theory."""

__version__ = "0.1.0"
