"""Quantum replica exchange: Gibbs-sampling Lindbladians, swap generators,
spectral gaps and mixing times by exact diagonalization, with a classical
Glauber/parallel-tempering baseline."""

__version__ = "0.1.0"
