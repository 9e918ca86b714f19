"""Model operators on the composite (lattice^p x Fock) space.

Assembles the coupled Hamiltonian H_sigma = H0 + H_I, the dressing
transformation T/Q with its self-energy shift, the dressed Hamiltonian with
its gradient, quadratic, and pair-potential correction terms, and coherent
displacement (Weyl) operators.

Composite-layout convention: state vectors are kron(particle, fock), i.e. the
Fock index is the fast axis.  Position-dependent smearing coefficients
c(x) = c0 * e^{-i k . x_j} enter as (phase multiplier on the lattice factor)
tensor (ladder operator on the Fock factor); the smeared annihilator always
carries the conjugated profile, so only one conjugation convention exists in
the code base.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm as dense_expm

from .fockcore import (CutoffMask, FockBasis, ModeGrid, build_boson_energy,
                       build_ladder)
from .latticeparticle import (ParticleLattice, build_gradient, build_kinetic,
                              build_position_multiplier)

# dense-block exponentials are materialized only below this entry budget;
# beyond it the exponential is applied per vector by the Krylov propagator
DENSE_EXP_ENTRY_BUDGET = 50_000_000


@dataclass(frozen=True)
class ModelParams:
    """Scalar model constants."""

    lam: float          # particle-field coupling strength
    mu: float           # boson mass
    mass: float         # particle mass M
    n_particles: int    # p
    sigma: float        # UV cutoff
    sigma0: float       # dressing infrared threshold

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("coupling lambda must be >= 0")
        if not 0 < self.sigma0 < self.sigma:
            raise ValueError(
                f"need 0 < sigma0 < sigma, got sigma0={self.sigma0}, "
                f"sigma={self.sigma}")
        if self.mu < 0:
            raise ValueError("boson mass mu must be >= 0")
        if self.mass <= 0:
            raise ValueError("particle mass must be positive")
        if self.n_particles < 1:
            raise ValueError("particle count must be >= 1")


@dataclass(frozen=True)
class CouplingProfile:
    """Per-mode complex base amplitude of a position-modulated coupling.

    The full coefficient of mode j at particle position x is
    base_j * e^{-i k_j . x}; kind records which closed form produced base.
    """

    kind: str
    base: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=complex)
        base.setflags(write=False)
        object.__setattr__(self, "base", base)


def coupling_profile(params: ModelParams, grid: ModeGrid,
                     kind: str) -> CouplingProfile:
    """Closed-form coupling amplitudes.

    interaction: f0 = lambda (2 pi)^{-d/2} (2 omega)^{-1/2}.
    dressing: g0 = -(1 - chi_{sigma0}) (omega + k^2/2M)^{-1} f0; vanishes on
    modes at or below the infrared threshold.
    """
    d = grid.dim
    omg = grid.omegas
    f0 = params.lam * (2 * np.pi) ** (-d / 2) * (2 * omg) ** (-0.5)
    if kind == "interaction":
        return CouplingProfile(kind=kind, base=f0)
    if kind == "dressing":
        ksq = np.sum(grid.modes**2, axis=1)
        below_ir = CutoffMask.from_grid(grid, params.sigma0).indicator()
        g0 = -(1.0 - below_ir) * f0 / (omg + ksq / (2 * params.mass))
        return CouplingProfile(kind=kind, base=g0)
    raise ValueError(f"kind must be 'interaction' or 'dressing', got {kind!r}")


def smeared_annihilator(base, grid: ModeGrid, lat: ParticleLattice,
                        basis: FockBasis, mask: CutoffMask,
                        particle=None, mode_factor=None) -> sp.csr_matrix:
    """a(c~) for the position-modulated profile c_j(x) = base_j e^{-i k_j.x}.

    Sums over all particles unless one is selected; mode_factor multiplies
    base per mode (used for the k-weighted dressing couplings).  The result
    is sum_j sqrt(w_j) conj(base_j) chi_j e^{+i k_j . x} (x) a_j.
    """
    base = np.asarray(base, dtype=complex)
    if mode_factor is not None:
        base = base * np.asarray(mode_factor)
    particles = range(lat.n_particles) if particle is None else [particle]
    chi = mask.indicator()
    out = sp.csr_matrix((lat.n_config * basis.dim,) * 2, dtype=complex)
    for m in range(grid.n_modes):
        if chi[m] == 0 or base[m] == 0:
            continue
        a_m = build_ladder(basis, m, "annihilate")
        amp = np.sqrt(grid.weights[m]) * np.conj(base[m])
        for j in particles:
            # conj of e^{-ik.x_j} is e^{+ik.x_j}
            phase = lat.phase_diagonal(-grid.modes[m], j)
            out = out + amp * sp.kron(sp.diags(phase), a_m, format="csr")
    return out.tocsr()


def build_free_hamiltonian(grid: ModeGrid, lat: ParticleLattice,
                           basis: FockBasis) -> sp.csr_matrix:
    """H0 = particle kinetic energy + field kinetic energy."""
    i_fock = sp.identity(basis.dim, format="csr", dtype=complex)
    i_part = sp.identity(lat.n_config, format="csr", dtype=complex)
    return (sp.kron(build_kinetic(lat), i_fock, format="csr")
            + sp.kron(i_part, build_boson_energy(basis, grid), format="csr"))


def build_interaction(params: ModelParams, grid: ModeGrid,
                      lat: ParticleLattice, basis: FockBasis,
                      mask: CutoffMask) -> sp.csr_matrix:
    """Yukawa interaction H_I = a(f~ chi) + a*(f chi), manifestly Hermitian."""
    ann = smeared_annihilator(coupling_profile(params, grid, "interaction").base,
                              grid, lat, basis, mask)
    return (ann + ann.conj().T).tocsr()


def build_hamiltonian(params: ModelParams, grid: ModeGrid,
                      lat: ParticleLattice, basis: FockBasis,
                      mask: CutoffMask) -> sp.csr_matrix:
    """Full cutoff Hamiltonian H_sigma = H0 + H_I."""
    return (build_free_hamiltonian(grid, lat, basis)
            + build_interaction(params, grid, lat, basis, mask)).tocsr()


def self_energy(params: ModelParams, grid: ModeGrid,
                mask: CutoffMask) -> float:
    """Per-particle dressing energy shift, a nonpositive quadrature sum.

    E = -lambda^2 (2 pi)^{-d} sum_j w_j (2 omega_j)^{-1}
        (omega_j + k_j^2/2M)^{-1} chi_j.
    """
    d = grid.dim
    ksq = np.sum(grid.modes**2, axis=1)
    terms = (grid.weights / (2 * grid.omegas)
             / (grid.omegas + ksq / (2 * params.mass))) * mask.indicator()
    return float(-params.lam**2 * (2 * np.pi) ** (-d) * np.sum(terms))


def pair_potential(params: ModelParams, grid: ModeGrid, x) -> float:
    """Dressing-induced particle pair potential at coordinate difference x.

    q(x) = -2 lambda^2 (2 pi)^{-d} sum_j w_j (2 omega_j)^{-1}
           (omega_j + k_j^2/2M)^{-2} (omega_j + k_j^2/M)
           (chi_sigma - chi_sigma0)_j cos(k_j . x).
    Real and even in x; zero when the two masks coincide.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    ksq = np.sum(grid.modes**2, axis=1)
    band = (CutoffMask.from_grid(grid, params.sigma).indicator()
            - CutoffMask.from_grid(grid, params.sigma0).indicator())
    weight = (grid.weights / (2 * grid.omegas)
              * (grid.omegas + ksq / params.mass)
              / (grid.omegas + ksq / (2 * params.mass))**2 * band)
    vals = -2 * params.lam**2 * (2 * np.pi) ** (-grid.dim) \
        * (np.cos(x @ grid.modes.T) @ weight)
    return float(vals[0]) if vals.shape == (1,) else vals


def _block_expm_diagonal_in_position(generator_blocks) -> sp.csr_matrix:
    """expm of an operator that is block diagonal over particle positions."""
    return sp.block_diag([dense_expm(b) for b in generator_blocks],
                         format="csr")


def build_dressing(params: ModelParams, grid: ModeGrid, lat: ParticleLattice,
                   basis: FockBasis, mask: CutoffMask):
    """Dressing generator T = a(g~ chi) - a*(g chi) and unitary Q = exp(-T).

    T contains no particle derivatives, so it is block diagonal over the
    particle configuration; Q is built exactly as a dense exponential per
    position block.  For entry counts beyond the dense budget Q is returned
    as a lazy per-vector exponential instead.
    """
    g0 = coupling_profile(params, grid, "dressing").base
    ann = smeared_annihilator(g0, grid, lat, basis, mask)
    t_op = (ann - ann.conj().T).tocsr()
    if lat.n_config * basis.dim**2 <= DENSE_EXP_ENTRY_BUDGET:
        chi = mask.indicator()
        blocks = []
        dim_f = basis.dim
        ladders = [build_ladder(basis, m, "annihilate").toarray()
                   for m in range(grid.n_modes)]
        # phase sum over particles, per mode, per configuration
        phase_sums = np.array(
            [sum(lat.phase_diagonal(-grid.modes[m], j)
                 for j in range(lat.n_particles))
             for m in range(grid.n_modes)])
        for cfg in range(lat.n_config):
            block = np.zeros((dim_f, dim_f), dtype=complex)
            for m in range(grid.n_modes):
                if chi[m] == 0 or g0[m] == 0:
                    continue
                c = np.sqrt(grid.weights[m]) * np.conj(g0[m]) * phase_sums[m, cfg]
                block += c * ladders[m] - np.conj(c) * ladders[m].conj().T
            blocks.append(dense_expm(-block))
        q_op = sp.block_diag(blocks, format="csr")
    else:
        from .propagators import OperatorExponential
        q_op = OperatorExponential(t_op, scale=-1.0)
    return t_op, q_op


@dataclass(frozen=True)
class DressedHamiltonian:
    """Dressed Hamiltonian with its five summands kept separately."""

    free: sp.csr_matrix            # H0
    interaction_ir: sp.csr_matrix  # interaction restricted below sigma0
    gradient_term: sp.csr_matrix   # particle-momentum/field cross coupling
    quadratic_term: sp.csr_matrix  # field-quadratic correction
    pair_term: sp.csr_matrix       # dressing-induced pair potential

    @cached_property
    def total(self) -> sp.csr_matrix:
        return (self.free + self.interaction_ir + self.gradient_term
                + self.quadratic_term + self.pair_term).tocsr()


def build_dressed_hamiltonian(params: ModelParams, grid: ModeGrid,
                              lat: ParticleLattice, basis: FockBasis,
                              mask: CutoffMask) -> DressedHamiltonian:
    """H' = H0 + H_I(below sigma0) + gradient + quadratic + pair terms.

    gradient term: (i/M) sum_{j,axis} { grad_j,ax a(k_ax g_j~ chi)
                                        + a*(k_ax g_j chi) grad_j,ax };
    quadratic term: (2M)^{-1} sum_{j,axis} { B^2 + B*^2 + 2 B* B } with
    B = a(k_ax g_j~ chi), the k-vector dot product summed over axes;
    pair term: sum over unordered particle pairs of the pair potential at
    the raw coordinate difference.
    """
    g0 = coupling_profile(params, grid, "dressing").base
    ir_mask = CutoffMask.from_grid(grid, params.sigma0)
    i_fock = sp.identity(basis.dim, format="csr", dtype=complex)
    dim = lat.n_config * basis.dim

    grad_term = sp.csr_matrix((dim, dim), dtype=complex)
    quad_term = sp.csr_matrix((dim, dim), dtype=complex)
    for j in range(lat.n_particles):
        for ax in range(lat.dim):
            b = smeared_annihilator(g0, grid, lat, basis, mask,
                                    particle=j, mode_factor=grid.modes[:, ax])
            b_dag = b.conj().T.tocsr()
            grad = sp.kron(build_gradient(lat, ax, j), i_fock, format="csr")
            grad_term = grad_term + (1j / params.mass) * (grad @ b + b_dag @ grad)
            quad_term = quad_term + (1 / (2 * params.mass)) * (
                b @ b + b_dag @ b_dag + 2 * b_dag @ b)

    if lat.n_particles >= 2:
        q_of = lambda diff: pair_potential(params, grid, diff)
        pair = sp.kron(build_position_multiplier(lat, q_of, "pair"),
                       i_fock, format="csr")
    else:
        pair = sp.csr_matrix((dim, dim), dtype=complex)

    return DressedHamiltonian(
        free=build_free_hamiltonian(grid, lat, basis),
        interaction_ir=build_interaction(params, grid, lat, basis, ir_mask),
        gradient_term=grad_term.tocsr(),
        quadratic_term=quad_term.tocsr(),
        pair_term=pair.tocsr(),
    )


def weyl(basis: FockBasis, grid: ModeGrid, displacement) -> sp.csr_matrix:
    """Coherent displacement C(alpha) = exp(a*(alpha) - a(alpha~)).

    Acts on the Fock factor only; each mode j is displaced by
    sqrt(w_j) alpha_j.  Built as a dense exponential of the anti-Hermitian
    generator, so it is exactly unitary on the truncated space.
    """
    alpha = np.asarray(displacement, dtype=complex).ravel()
    if alpha.shape[0] != basis.n_modes:
        raise ValueError(
            f"displacement length {alpha.shape[0]} != {basis.n_modes} modes")
    gen = np.zeros((basis.dim, basis.dim), dtype=complex)
    for j in range(basis.n_modes):
        if alpha[j] == 0:
            continue
        a_j = build_ladder(basis, j, "annihilate").toarray()
        amp = np.sqrt(grid.weights[j])
        gen += amp * (alpha[j] * a_j.conj().T - np.conj(alpha[j]) * a_j)
    return sp.csr_matrix(dense_expm(gen))
