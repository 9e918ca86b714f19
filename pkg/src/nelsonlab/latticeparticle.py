"""Periodic lattice for p nonrelativistic particles: kinetic energy, gradients,
and diagonal multiplication operators.

The particle configuration space is the tensor product of p copies of a
d-dimensional periodic lattice with L sites per axis and spacing h, flattened
in C order over the d*p axes (particle-major, axis-minor).  Finite-difference
stencils keep every operator sparse and give exact (anti)symmetry: the
second-difference Laplacian is symmetric PSD and the central-difference
gradient is antisymmetric, so i*grad is Hermitian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class ParticleLattice:
    """Geometry and particle content of the lattice factor."""

    dim: int
    sites: int
    spacing: float
    n_particles: int
    mass: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("spatial dimension must be >= 1")
        if self.sites < 2:
            raise ValueError("need at least 2 sites per axis")
        if self.spacing <= 0:
            raise ValueError("lattice spacing must be positive")
        if self.n_particles < 1:
            raise ValueError("particle count must be >= 1")
        if self.mass <= 0:
            raise ValueError("particle mass must be positive")

    @property
    def n_axes(self) -> int:
        return self.dim * self.n_particles

    @property
    def n_config(self) -> int:
        return self.sites ** self.n_axes

    @property
    def axis_coords(self) -> np.ndarray:
        """Coordinates h*(0..L-1) along a single axis."""
        return self.spacing * np.arange(self.sites)

    def particle_coordinates(self, particle: int) -> np.ndarray:
        """Position vector x_particle per configuration, shape (n_config, d)."""
        if not 0 <= particle < self.n_particles:
            raise ValueError(f"particle index {particle} out of range")
        shape = (self.sites,) * self.n_axes
        out = np.empty((self.n_config, self.dim))
        for ax in range(self.dim):
            idx = np.indices(shape)[particle * self.dim + ax]
            out[:, ax] = self.spacing * idx.ravel()
        return out

    def phase_diagonal(self, k: np.ndarray, particle: int) -> np.ndarray:
        """Diagonal of exp(-i k . x_particle) over the configuration space."""
        x = self.particle_coordinates(particle)
        return np.exp(-1j * (x @ np.asarray(k, dtype=float)))


def _axis_operator(op1d: sp.spmatrix, axis: int, n_axes: int,
                   sites: int) -> sp.csr_matrix:
    """Embed a 1D operator on one flattened axis of the configuration space."""
    left = sp.identity(sites ** axis, format="csr", dtype=complex)
    right = sp.identity(sites ** (n_axes - axis - 1), format="csr", dtype=complex)
    return sp.kron(sp.kron(left, op1d, format="csr"), right, format="csr")


def _shift(sites: int) -> sp.csr_matrix:
    """Periodic shift: (S psi)(n) = psi(n+1 mod L)."""
    rows = np.arange(sites)
    cols = (rows + 1) % sites
    return sp.csr_matrix((np.ones(sites), (rows, cols)),
                         shape=(sites, sites), dtype=complex)


def build_kinetic(lat: ParticleLattice) -> sp.csr_matrix:
    """Kinetic energy -(2M)^{-1} sum_j Laplacian_j, second-difference stencil.

    Per axis the stencil eigenvalue on the plane wave e^{i theta n} is
    2(1 - cos theta)/(2 M h^2); constant vectors are in the kernel.
    """
    up = _shift(lat.sites)
    stencil = (2 * sp.identity(lat.sites, dtype=complex) - up - up.T) \
        / (2 * lat.mass * lat.spacing**2)
    out = sp.csr_matrix((lat.n_config, lat.n_config), dtype=complex)
    for ax in range(lat.n_axes):
        out = out + _axis_operator(stencil.tocsr(), ax, lat.n_axes, lat.sites)
    return out.tocsr()


def build_gradient(lat: ParticleLattice, axis: int,
                   particle: int) -> sp.csr_matrix:
    """Central-difference partial derivative along one particle axis.

    (D psi)(n) = (psi(n+1) - psi(n-1))/(2h), periodic; exactly antisymmetric.
    """
    if not 0 <= axis < lat.dim:
        raise ValueError(f"axis {axis} out of range [0, {lat.dim})")
    if not 0 <= particle < lat.n_particles:
        raise ValueError(f"particle {particle} out of range [0, {lat.n_particles})")
    up = _shift(lat.sites)
    d1 = (up - up.T) / (2 * lat.spacing)
    return _axis_operator(d1.tocsr(), particle * lat.dim + axis,
                          lat.n_axes, lat.sites)


def build_position_multiplier(lat: ParticleLattice, samples,
                              mode: str) -> sp.csr_matrix:
    """Diagonal multiplication operator over particle positions.

    mode='sum' adds a per-site function over each particle coordinate:
    samples is an array of L^d values (flattened C order over the d axes)
    or a callable on position vectors of shape (n, d).

    mode='pair' sums a function of the coordinate difference over unordered
    particle pairs: samples must be a callable on difference vectors (the
    raw x_j - x_l, not wrapped, matching products of site-sampled phases).
    Empty pair sum (p=1) gives the zero operator.
    """
    if mode not in ("sum", "pair"):
        raise ValueError(f"mode must be 'sum' or 'pair', got {mode!r}")
    if mode == "sum":
        diag = np.zeros(lat.n_config, dtype=complex)
        if callable(samples):
            for j in range(lat.n_particles):
                diag += np.asarray(samples(lat.particle_coordinates(j)),
                                   dtype=complex)
        else:
            values = np.asarray(samples, dtype=complex).ravel()
            if values.shape[0] != lat.sites ** lat.dim:
                raise ValueError(
                    f"need {lat.sites ** lat.dim} per-site samples, "
                    f"got {values.shape[0]}")
            shape = (lat.sites,) * lat.n_axes
            site_shape = (lat.sites,) * lat.dim
            grid_vals = values.reshape(site_shape)
            for j in range(lat.n_particles):
                # broadcast the per-site table onto particle j's axes
                expand = [None] * lat.n_axes
                for ax in range(lat.dim):
                    expand[j * lat.dim + ax] = slice(None)
                view = grid_vals[tuple(
                    sl if sl is not None else np.newaxis for sl in expand)]
                diag += np.broadcast_to(view, shape).ravel()
    else:
        if not callable(samples):
            raise ValueError("pair mode requires a callable on difference vectors")
        diag = np.zeros(lat.n_config, dtype=complex)
        coords = [lat.particle_coordinates(j) for j in range(lat.n_particles)]
        for j in range(lat.n_particles):
            for l in range(j + 1, lat.n_particles):
                diag += np.asarray(samples(coords[j] - coords[l]), dtype=complex)
    return sp.diags(diag).tocsr()
