"""Classical limit objects: freely evolving mode amplitudes, the classical
wave A(t,x), and the induced time-dependent multiplication operators.

The classical field is a finite mode sum
    A(t,x) = (2 pi)^{-d/2} sum_j w_j (2 omega_j)^{-1/2}
             ( alpha_j e^{i(k_j.x - omega_j t)} + c.c. ),
exact for finitely many modes; its time derivative is obtained analytically
(factor -i omega inside the sum), never by numerical differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fockcore import CutoffMask, FockBasis, ModeGrid
from .latticeparticle import ParticleLattice


@dataclass(frozen=True)
class ClassicalFieldSpec:
    """Per-mode amplitudes alpha(k_j) over a mode grid.

    The weighted norms sum w|alpha|^2 and sum w omega |alpha|^2 are stored
    for bound bookkeeping (finite automatically on a finite grid).
    """

    grid: ModeGrid
    alphas: np.ndarray
    mask: CutoffMask | None = None
    norm_sq: float = field(init=False)
    energy_norm_sq: float = field(init=False)

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=complex).ravel()
        if alphas.shape[0] != self.grid.n_modes:
            raise ValueError(
                f"{alphas.shape[0]} amplitudes for {self.grid.n_modes} modes")
        if not np.all(np.isfinite(alphas)):
            raise ValueError("amplitudes must be finite")
        alphas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "norm_sq", self.grid.norm_sq(alphas))
        object.__setattr__(self, "energy_norm_sq",
                           self.grid.norm_sq(alphas, omega_power=0.5))


def evolve_alpha(spec: ClassicalFieldSpec, t: float) -> np.ndarray:
    """Free mode evolution alpha_j(t) = alpha_j e^{-i omega_j t}."""
    return spec.alphas * np.exp(-1j * spec.grid.omegas * t)


def field_A(spec: ClassicalFieldSpec, t: float, x,
            mask: CutoffMask | None = None, derivative: bool = False):
    """Classical wave A(t,x), or its analytic time derivative.

    x is a position vector of length d or an array of them, shape (n, d).
    The optional mask restricts the mode sum (the cutoff field A_sigma).
    """
    grid = spec.grid
    x = np.atleast_2d(np.asarray(x, dtype=float))
    chi = mask.indicator() if mask is not None else np.ones(grid.n_modes)
    coeff = ((2 * np.pi) ** (-grid.dim / 2)
             * grid.weights * (2 * grid.omegas) ** (-0.5) * chi)
    modal = spec.alphas * np.exp(-1j * grid.omegas * t)
    if derivative:
        modal = modal * (-1j * grid.omegas)
    vals = 2 * np.real(np.exp(1j * (x @ grid.modes.T)) @ (coeff * modal))
    return float(vals[0]) if vals.shape == (1,) else vals


def site_diagonal(spec: ClassicalFieldSpec, lat: ParticleLattice, t: float,
                  derivative: bool = False,
                  mask: CutoffMask | None = None) -> np.ndarray:
    """sum_j A(t, x_j) sampled over the particle configuration space."""
    diag = np.zeros(lat.n_config)
    for j in range(lat.n_particles):
        diag += field_A(spec, t, lat.particle_coordinates(j),
                        mask=mask, derivative=derivative)
    return diag


def build_A_operator(spec: ClassicalFieldSpec, lat: ParticleLattice,
                     basis: FockBasis, t: float, derivative: bool = False,
                     mask: CutoffMask | None = None) -> sp.csr_matrix:
    """Multiplication operator sum_j A(t, x_j) on the composite space.

    Hermitian and diagonal; identity on the Fock factor.
    """
    diag = site_diagonal(spec, lat, t, derivative=derivative, mask=mask)
    full = np.kron(diag, np.ones(basis.dim)).astype(complex)
    return sp.diags(full).tocsr()
