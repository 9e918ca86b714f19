"""Time evolution: Krylov matrix-exponential application and the four
propagator families.

U is the autonomous evolution of the full cutoff Hamiltonian (with its
self-energy phase removed); V solves the time-dependent limiting equation
i d/dt V = (H0 + A(t)) V by midpoint-frozen-generator stepping with adaptive
step doubling (global order 2); W conjugates U by coherent displacements of
the rescaled field; Z additionally conjugates by the dressing unitary.
Backward propagation is conjugate stepping (negative time step), never a
matrix inverse, so unitarity is preserved throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm as dense_expm


class ConvergenceError(RuntimeError):
    """Raised when an iterative propagation step fails to converge.

    Carries the best available residual estimate in .residual.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual estimate {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class PropagationConfig:
    """Numerical knobs for the propagator family."""

    steps: int = 64              # initial step count for V
    step_tol: float = 1e-6       # doubling stop criterion for V
    max_doublings: int = 10
    krylov_dim: int = 48         # max Arnoldi subspace size per substep
    krylov_tol: float = 1e-10

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.max_doublings < 1:
            raise ValueError("max_doublings must be >= 1")
        if self.step_tol <= 0 or self.krylov_tol <= 0:
            raise ValueError("tolerances must be positive")


class _NotConverged(Exception):
    def __init__(self, residual):
        self.residual = residual


def _as_matvec(op) -> Callable[[np.ndarray], np.ndarray]:
    if callable(op) and not sp.issparse(op) and not isinstance(op, np.ndarray):
        return op
    return lambda v: op @ v


def _arnoldi_exp(matvec, psi, z, tol, max_dim):
    """One Krylov approximation of exp(z H) psi with a posteriori estimate."""
    beta = np.linalg.norm(psi)
    if beta == 0 or z == 0:
        return psi.copy()
    n = psi.shape[0]
    max_dim = min(max_dim, n)
    basis = np.empty((max_dim + 1, n), dtype=complex)
    hess = np.zeros((max_dim + 1, max_dim), dtype=complex)
    basis[0] = psi / beta
    for j in range(max_dim):
        w = matvec(basis[j])
        # modified Gram-Schmidt with one reorthogonalization pass
        for _ in range(2):
            for i in range(j + 1):
                c = np.vdot(basis[i], w)
                hess[i, j] += c
                w -= c * basis[i]
        h_next = np.linalg.norm(w)
        hess[j + 1, j] = h_next
        m = j + 1
        if h_next < 1e-14 * beta:
            # happy breakdown: the Krylov space is invariant, result exact
            y = dense_expm(z * hess[:m, :m])[:, 0]
            return beta * (y @ basis[:m])
        basis[m] = w / h_next
        if m == max_dim or m % 6 == 0:
            y = dense_expm(z * hess[:m, :m])[:, 0]
            err = abs(z) * h_next * abs(y[m - 1]) * beta
            if err <= tol * beta:
                return beta * (y @ basis[:m])
    raise _NotConverged(err)


def expm_apply(op, psi: np.ndarray, z: complex, tol: float = 1e-10,
               max_krylov: int = 48, max_substeps: int = 4096) -> np.ndarray:
    """exp(z * op) applied to psi by Arnoldi with adaptive substepping.

    op may be a sparse/dense matrix or a matvec callable.  The time step is
    halved until the per-substep Krylov error estimate meets the tolerance;
    persistent non-convergence raises ConvergenceError with the estimate.
    """
    matvec = _as_matvec(op)
    psi = np.asarray(psi, dtype=complex)
    n_sub = 1
    residual = np.inf
    while n_sub <= max_substeps:
        try:
            v = psi
            for _ in range(n_sub):
                v = _arnoldi_exp(matvec, v, z / n_sub, tol / n_sub, max_krylov)
            return v
        except _NotConverged as exc:
            residual = exc.residual
            n_sub *= 2
    raise ConvergenceError("Krylov exponential did not converge", residual)


class OperatorExponential:
    """Lazy exp(scale * G), applied per vector by the Krylov exponential."""

    def __init__(self, generator: sp.spmatrix, scale: complex = 1.0,
                 tol: float = 1e-10):
        self.generator = generator.tocsr()
        self.scale = scale
        self.tol = tol
        self._adjoint = self.generator.conj().T.tocsr()

    def apply(self, psi: np.ndarray, dagger: bool = False) -> np.ndarray:
        if dagger:
            return expm_apply(self._adjoint, psi, np.conj(self.scale),
                              tol=self.tol)
        return expm_apply(self.generator, psi, self.scale, tol=self.tol)


def apply_block_operator(op, psi: np.ndarray, fock_dim: int,
                         dagger: bool = False) -> np.ndarray:
    """Apply an operator living on the Fock factor to a composite vector."""
    mat = op.toarray() if sp.issparse(op) else np.asarray(op)
    blocks = psi.reshape(-1, fock_dim)
    out = blocks @ (mat.conj() if dagger else mat.T)
    return out.ravel()


def apply_composite(op, psi: np.ndarray, dagger: bool = False) -> np.ndarray:
    """Apply a composite-space operator (sparse matrix or lazy exponential)."""
    if isinstance(op, OperatorExponential):
        return op.apply(psi, dagger=dagger)
    if dagger:
        return op.conj().T @ psi
    return op @ psi


@dataclass
class EvolutionSystem:
    """Everything the propagator family needs, prebuilt and immutable.

    displacement_w(t) and displacement_z(t) give the per-mode coherent
    arguments for the dressed frames (the latter cutoff-masked);
    site_potential(t) samples the classical wave over the particle
    configuration for the limiting propagator.
    """

    hamiltonian: sp.csr_matrix
    energy_shift: float
    free_hamiltonian: sp.csr_matrix
    fock_dim: int
    weyl_factory: Callable[[np.ndarray], sp.csr_matrix]
    site_potential: Optional[Callable[[float], np.ndarray]] = None
    displacement_w: Optional[Callable[[float], np.ndarray]] = None
    displacement_z: Optional[Callable[[float], np.ndarray]] = None
    dressing: object = None
    _weyl_cache: dict = field(default_factory=dict, repr=False)

    def weyl_matrix(self, t: float, masked: bool) -> np.ndarray:
        key = (t, masked)
        if key not in self._weyl_cache:
            disp = (self.displacement_z if masked else self.displacement_w)(t)
            mat = self.weyl_factory(disp)
            self._weyl_cache[key] = mat.toarray() if sp.issparse(mat) else mat
        return self._weyl_cache[key]


def propagate_U(system: EvolutionSystem, t: float, psi: np.ndarray,
                config: PropagationConfig = PropagationConfig()) -> np.ndarray:
    """exp(-i t (H - shift)) psi; the scalar shift enters as a global phase."""
    v = expm_apply(system.hamiltonian, psi, -1j * t,
                   tol=config.krylov_tol, max_krylov=config.krylov_dim)
    return np.exp(1j * t * system.energy_shift) * v


def _v_fixed_steps(system: EvolutionSystem, t: float, s: float,
                   psi: np.ndarray, n_steps: int,
                   config: PropagationConfig) -> np.ndarray:
    h0 = system.free_hamiltonian
    ones_f = np.ones(system.fock_dim)
    dt = (t - s) / n_steps
    v = np.asarray(psi, dtype=complex)
    for i in range(n_steps):
        t_mid = s + (i + 0.5) * dt
        diag = np.kron(system.site_potential(t_mid), ones_f)
        matvec = lambda u: h0 @ u + diag * u
        v = expm_apply(matvec, v, -1j * dt,
                       tol=config.krylov_tol, max_krylov=config.krylov_dim)
    return v


def propagate_V_fixed(system: EvolutionSystem, t: float, s: float,
                      psi: np.ndarray, n_steps: int,
                      config: PropagationConfig = PropagationConfig()
                      ) -> np.ndarray:
    """Midpoint stepping with a fixed step count (for order measurements)."""
    if system.site_potential is None:
        raise ValueError("EvolutionSystem.site_potential is required for V")
    return _v_fixed_steps(system, t, s, psi, n_steps, config)


def propagate_V(system: EvolutionSystem, t: float, s: float, psi: np.ndarray,
                config: PropagationConfig = PropagationConfig()) -> np.ndarray:
    """Limiting propagator: i d/dt V = (H0 + A(t)) V, adaptive step doubling.

    Doubles the step count until successive results differ by less than
    step_tol; raises ConvergenceError carrying the last distance otherwise.
    Both time directions are supported.
    """
    if system.site_potential is None:
        raise ValueError("EvolutionSystem.site_potential is required for V")
    if t == s:
        return np.asarray(psi, dtype=complex).copy()
    n = config.steps
    prev = _v_fixed_steps(system, t, s, psi, n, config)
    for _ in range(config.max_doublings):
        n *= 2
        cur = _v_fixed_steps(system, t, s, psi, n, config)
        dist = np.linalg.norm(cur - prev)
        if dist < config.step_tol:
            return cur
        prev = cur
    raise ConvergenceError(
        "step doubling for the limiting propagator did not converge", dist)


def propagate_W(system: EvolutionSystem, t: float, s: float, psi: np.ndarray,
                config: PropagationConfig = PropagationConfig()) -> np.ndarray:
    """Coherent-frame propagator C(alpha_l(t))† U(t-s) C(alpha_l(s))."""
    if system.displacement_w is None:
        raise ValueError("EvolutionSystem.displacement_w is required for W")
    v = apply_block_operator(system.weyl_matrix(s, masked=False), psi,
                             system.fock_dim)
    v = propagate_U(system, t - s, v, config)
    return apply_block_operator(system.weyl_matrix(t, masked=False), v,
                                system.fock_dim, dagger=True)


def propagate_Z(system: EvolutionSystem, t: float, s: float, psi: np.ndarray,
                config: PropagationConfig = PropagationConfig()) -> np.ndarray:
    """Dressed coherent-frame propagator Q† C_sig(t)† U(t-s) C_sig(s) Q."""
    if system.displacement_z is None or system.dressing is None:
        raise ValueError(
            "EvolutionSystem.displacement_z and .dressing are required for Z")
    v = apply_composite(system.dressing, np.asarray(psi, dtype=complex))
    v = apply_block_operator(system.weyl_matrix(s, masked=True), v,
                             system.fock_dim)
    v = propagate_U(system, t - s, v, config)
    v = apply_block_operator(system.weyl_matrix(t, masked=True), v,
                             system.fock_dim, dagger=True)
    return apply_composite(system.dressing, v, dagger=True)
