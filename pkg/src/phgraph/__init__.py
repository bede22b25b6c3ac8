"""Port-Hamiltonian systems on graphs."""

__version__ = "0.1.0"
