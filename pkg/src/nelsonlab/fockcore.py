"""Truncated bosonic Fock space: basis enumeration, ladder operators, smearing.

The Fock factor of the composite Hilbert space is spanned by occupation
multi-indices n = (n_1, ..., n_m) over a finite momentum grid, truncated by a
hard cap on the total occupation sum(n) <= N_max.  A continuum smearing
function f(k) enters through per-mode coefficients sqrt(w_j) f(k_j), so that
every discrete L2 norm is sum_j w_j |f(k_j)|^2 and the canonical commutator
[a(f~), a*(f)] = ||f||^2 holds exactly below the truncation boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class ModeGrid:
    """Discretized boson momentum grid with quadrature weights.

    modes has shape (m, d); weights shape (m,).  The dispersion
    omega_j = sqrt(|k_j|^2 + mu^2) is precomputed and cached.
    """

    modes: np.ndarray
    weights: np.ndarray
    mu: float
    omegas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        modes = np.atleast_2d(np.asarray(self.modes, dtype=float))
        if modes.shape[0] == 1 and modes.shape[1] > 1 and np.ndim(self.modes) == 1:
            # a flat list of scalars means m modes in d=1, not one mode in d=m
            modes = modes.T
        weights = np.asarray(self.weights, dtype=float).ravel()
        if modes.shape[0] != weights.shape[0]:
            raise ValueError(
                f"{modes.shape[0]} modes but {weights.shape[0]} weights")
        if np.any(weights <= 0):
            raise ValueError("all quadrature weights must be positive")
        if self.mu < 0:
            raise ValueError("boson mass mu must be >= 0")
        omegas = np.sqrt(np.sum(modes**2, axis=1) + self.mu**2)
        if np.any(omegas <= 0):
            raise ValueError(
                "omega must be positive for every mode; "
                "mu=0 with a zero momentum mode is rejected")
        # duplicate modes would double-count quadrature weight silently
        seen = {tuple(row) for row in modes}
        if len(seen) != modes.shape[0]:
            raise ValueError("mode list contains duplicates")
        modes.setflags(write=False)
        weights.setflags(write=False)
        omegas.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "omegas", omegas)

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    @property
    def dim(self) -> int:
        return self.modes.shape[1]

    def norm_sq(self, coeffs, omega_power: float = 0.0) -> float:
        """Discrete weighted norm sum w |omega^s f|^2 of per-mode coefficients."""
        c = np.asarray(coeffs)
        return float(np.sum(self.weights * self.omegas**(2 * omega_power)
                            * np.abs(c)**2))


@dataclass(frozen=True)
class CutoffMask:
    """Sharp momentum cutoff chi_sigma: flag_j = (|k_j| <= sigma)."""

    sigma: float
    flags: np.ndarray

    @classmethod
    def from_grid(cls, grid: ModeGrid, sigma: float) -> "CutoffMask":
        if sigma <= 0:
            raise ValueError("cutoff sigma must be positive")
        flags = np.sqrt(np.sum(grid.modes**2, axis=1)) <= sigma
        flags.setflags(write=False)
        return cls(sigma=sigma, flags=flags)

    def indicator(self) -> np.ndarray:
        return self.flags.astype(float)


@dataclass(frozen=True)
class FockBasis:
    """Graded-lexicographic enumeration of occupation multi-indices."""

    n_modes: int
    n_max: int
    states: tuple
    index: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def rank(self, state) -> int:
        return self.index[tuple(state)]

    def unrank(self, i: int):
        return self.states[i]

    def vector(self, state) -> np.ndarray:
        """Unit basis vector for a given occupation multi-index."""
        v = np.zeros(self.dim, dtype=complex)
        v[self.rank(state)] = 1.0
        return v


def enumerate_fock_basis(m: int, n_max: int) -> FockBasis:
    """All occupations (n_1,...,n_m) with sum <= n_max, graded-lex ordered.

    Ordering is by total occupation first, then lexicographic; the vacuum is
    state 0.  |states| = binomial(m + n_max, m).
    """
    if m < 1:
        raise ValueError("mode count m must be >= 1")
    if n_max < 0:
        raise ValueError("occupation cap n_max must be >= 0")
    states = []

    def fill(prefix, budget):
        if len(prefix) == m:
            states.append(tuple(prefix))
            return
        for n in range(budget + 1):
            fill(prefix + (n,), budget - n)

    fill((), n_max)
    states.sort(key=lambda s: (sum(s), s))
    assert len(states) == comb(m + n_max, m)
    return FockBasis(n_modes=m, n_max=n_max, states=tuple(states),
                     index={s: i for i, s in enumerate(states)})


def build_ladder(basis: FockBasis, j: int, kind: str) -> sp.csr_matrix:
    """Single-mode ladder operator a_j or a_j† on the Fock factor.

    Creation entries that would push the total occupation past n_max are
    dropped, which keeps a_j† exactly the conjugate transpose of a_j.
    """
    if not 0 <= j < basis.n_modes:
        raise ValueError(f"mode index {j} out of range [0, {basis.n_modes})")
    if kind not in ("annihilate", "create"):
        raise ValueError(f"kind must be 'annihilate' or 'create', got {kind!r}")
    rows, cols, vals = [], [], []
    for i, s in enumerate(basis.states):
        if kind == "annihilate":
            if s[j] > 0:
                t = s[:j] + (s[j] - 1,) + s[j + 1:]
                rows.append(basis.index[t])
                cols.append(i)
                vals.append(np.sqrt(s[j]))
        else:
            t = s[:j] + (s[j] + 1,) + s[j + 1:]
            if t in basis.index:
                rows.append(basis.index[t])
                cols.append(i)
                vals.append(np.sqrt(s[j] + 1))
    return sp.csr_matrix((vals, (rows, cols)),
                         shape=(basis.dim, basis.dim), dtype=complex)


def build_boson_energy(basis: FockBasis, grid: ModeGrid) -> sp.csr_matrix:
    """Field kinetic energy H02 = sum_j omega_j n_j, diagonal in occupation."""
    if basis.n_modes != grid.n_modes:
        raise ValueError(
            f"basis has {basis.n_modes} modes, grid has {grid.n_modes}")
    diag = np.array([np.dot(s, grid.omegas) for s in basis.states])
    return sp.diags(diag.astype(complex)).tocsr()


def total_number(basis: FockBasis) -> sp.csr_matrix:
    """Total occupation operator sum_j a_j† a_j."""
    diag = np.array([float(sum(s)) for s in basis.states])
    return sp.diags(diag.astype(complex)).tocsr()


def smear(basis: FockBasis, grid: ModeGrid, coeffs, kind: str) -> sp.csr_matrix:
    """Smeared ladder operator over the mode grid.

    kind='annihilate' builds sum_j sqrt(w_j) conj(f_j) a_j (the annihilator
    smeared against the conjugate profile, matching the single internal
    conjugation convention); kind='create' is its adjoint
    sum_j sqrt(w_j) f_j a_j†.
    """
    if kind not in ("annihilate", "create"):
        raise ValueError(f"kind must be 'annihilate' or 'create', got {kind!r}")
    c = np.asarray(coeffs, dtype=complex).ravel()
    if c.shape[0] != basis.n_modes:
        raise ValueError(
            f"coefficient length {c.shape[0]} != mode count {basis.n_modes}")
    if basis.n_modes != grid.n_modes:
        raise ValueError("basis/grid mode count mismatch")
    out = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for j in range(basis.n_modes):
        if c[j] == 0:
            continue
        amp = np.sqrt(grid.weights[j])
        a_j = build_ladder(basis, j, "annihilate")
        if kind == "annihilate":
            out = out + amp * np.conj(c[j]) * a_j
        else:
            out = out + amp * c[j] * a_j.conj().T.tocsr()
    return out.tocsr()
