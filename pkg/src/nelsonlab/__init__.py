"""Numerical laboratory for a cutoff model of nonrelativistic particles
Yukawa-coupled to a scalar Bose field on a truncated Fock x lattice space."""

__version__ = "0.1.0"
