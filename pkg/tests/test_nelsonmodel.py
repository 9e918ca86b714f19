import numpy as np
import pytest
from scipy.linalg import expm as dense_expm

import nelsonlab.nelsonmodel as nm
from _oracles import (E_EXAMPLE, G0_EXAMPLE, coherent_amplitude,
                      pair_potential_oracle, self_energy_oracle)
from nelsonlab.fockcore import (CutoffMask, ModeGrid, enumerate_fock_basis,
                                total_number)
from nelsonlab.latticeparticle import ParticleLattice


def setup_small(lam=0.2, sites=8, p=1, n_max=3, mu=1.0, mass=1.0,
                modes=(0.5, -0.5, 1.5, -1.5), sigma=2.0, sigma0=1.0):
    grid = ModeGrid(modes=list(modes), weights=[1.0] * len(modes), mu=mu)
    lat = ParticleLattice(dim=1, sites=sites, spacing=1.0, n_particles=p,
                          mass=mass)
    params = nm.ModelParams(lam=lam, mu=mu, mass=mass, n_particles=p,
                            sigma=sigma, sigma0=sigma0)
    basis = enumerate_fock_basis(grid.n_modes, n_max)
    mask = CutoffMask.from_grid(grid, sigma)
    return params, grid, lat, basis, mask


def test_params_validation():
    with pytest.raises(ValueError):
        nm.ModelParams(lam=-0.1, mu=1, mass=1, n_particles=1,
                       sigma=2, sigma0=1)
    with pytest.raises(ValueError):
        nm.ModelParams(lam=0.1, mu=1, mass=1, n_particles=1,
                       sigma=1, sigma0=1)


# ---------------------------------------------------------------------------
# coupling profiles

def test_zero_coupling_profiles():
    params, grid, *_ = setup_small(lam=0.0)
    for kind in ("interaction", "dressing"):
        assert np.all(nm.coupling_profile(params, grid, kind).base == 0)


def test_dressing_vanishes_below_threshold():
    params, grid, *_ = setup_small()
    g = nm.coupling_profile(params, grid, "dressing").base
    # |k| = 0.5 modes are at or below sigma0 = 1
    assert g[0] == 0 and g[1] == 0
    assert g[2] != 0 and g[3] != 0


def test_dressing_amplitude_frozen_value():
    grid = ModeGrid(modes=[0.5, 2.0], weights=[1.0, 1.0], mu=1.0)
    params = nm.ModelParams(lam=0.1, mu=1.0, mass=1.0, n_particles=1,
                            sigma=3.0, sigma0=1.0)
    g = nm.coupling_profile(params, grid, "dressing").base
    assert np.isclose(g[1].real, G0_EXAMPLE, rtol=1e-14)
    assert g[1].imag == 0


# ---------------------------------------------------------------------------
# interaction and Hamiltonian

def test_interaction_zero_coupling():
    params, grid, lat, basis, mask = setup_small(lam=0.0)
    assert nm.build_interaction(params, grid, lat, basis, mask).nnz == 0


def test_interaction_hermitian():
    params, grid, lat, basis, mask = setup_small()
    h_i = nm.build_interaction(params, grid, lat, basis, mask)
    assert np.abs((h_i - h_i.conj().T).toarray()).max() < 1e-15


def test_interaction_square_on_vacuum_matches_phase_sum():
    # <x, vac| H_I^2 |x, vac> = sum_m w |f0 chi|^2 |sum_j e^{-ik x_j}|^2
    params, grid, lat, basis, mask = setup_small(
        sites=4, p=2, n_max=2, modes=(0.5, 1.5))
    h_i = nm.build_interaction(params, grid, lat, basis, mask).toarray()
    sq = h_i @ h_i
    f0 = nm.coupling_profile(params, grid, "interaction").base
    vac = basis.rank((0, 0))
    for cfg in range(lat.n_config):
        xs = [lat.particle_coordinates(j)[cfg, 0] for j in range(2)]
        expected = sum(
            grid.weights[m] * abs(f0[m]) ** 2
            * abs(sum(np.exp(-1j * grid.modes[m, 0] * x) for x in xs)) ** 2
            for m in range(grid.n_modes))
        i = cfg * basis.dim + vac
        assert np.isclose(sq[i, i].real, expected)


def test_hamiltonian_free_at_zero_coupling():
    params, grid, lat, basis, mask = setup_small(lam=0.0)
    h = nm.build_hamiltonian(params, grid, lat, basis, mask)
    h0 = nm.build_free_hamiltonian(grid, lat, basis)
    assert np.abs((h - h0).toarray()).max() == 0


def test_hamiltonian_hermitian():
    params, grid, lat, basis, mask = setup_small()
    h = nm.build_hamiltonian(params, grid, lat, basis, mask).toarray()
    scale = np.abs(h).max()
    assert np.abs(h - h.conj().T).max() < 1e-12 * scale


def test_ground_state_second_order_perturbation():
    # E(lam) - E_pt(lam) should shrink like lam^4 (odd orders vanish since
    # the interaction flips boson-number parity)
    def gs_gap(lam):
        params, grid, lat, basis, mask = setup_small(
            lam=lam, sites=6, n_max=2, modes=(0.5, -0.5, 1.5))
        h = nm.build_hamiltonian(params, grid, lat, basis, mask).toarray()
        h0 = nm.build_free_hamiltonian(grid, lat, basis).toarray()
        v1 = nm.build_interaction(
            nm.ModelParams(lam=1.0, mu=params.mu, mass=params.mass,
                           n_particles=1, sigma=params.sigma,
                           sigma0=params.sigma0),
            grid, lat, basis, mask).toarray()
        e0_all, u = np.linalg.eigh(h0)
        e0 = e0_all[0]
        v_col = u.conj().T @ v1 @ u[:, 0]
        pt2 = sum(abs(v_col[n]) ** 2 / (e0 - e0_all[n])
                  for n in range(1, len(e0_all)))
        e_exact = np.linalg.eigvalsh(h)[0]
        return abs(e_exact - (e0 + lam ** 2 * pt2))

    d1, d2 = gs_gap(0.1), gs_gap(0.05)
    assert d1 < 1e-4
    assert d2 / d1 == pytest.approx(1 / 16, rel=0.6)


# ---------------------------------------------------------------------------
# self-energy and pair potential

def test_self_energy_zero_coupling_and_scaling():
    params, grid, _, _, mask = setup_small(lam=0.0)
    assert nm.self_energy(params, grid, mask) == 0.0
    p1, grid, _, _, mask = setup_small(lam=0.3)
    p2, *_ = setup_small(lam=0.6)
    assert nm.self_energy(p2, grid, mask) == 4 * nm.self_energy(p1, grid, mask)


def test_self_energy_frozen_example():
    grid = ModeGrid(modes=[1.0, -1.0, 2.0, -2.0], weights=[1.0] * 4, mu=1.0)
    params = nm.ModelParams(lam=1.0, mu=1.0, mass=1.0, n_particles=1,
                            sigma=10.0, sigma0=0.5)
    mask = CutoffMask.from_grid(grid, 10.0)
    assert np.isclose(nm.self_energy(params, grid, mask), E_EXAMPLE,
                      rtol=1e-14)


def test_self_energy_nonpositive_and_monotone_in_sigma():
    params, grid, *_ = setup_small(lam=0.4)
    values = []
    for sigma in (0.6, 1.0, 1.6, 2.5):
        mask = CutoffMask.from_grid(grid, sigma)
        values.append(nm.self_energy(params, grid, mask))
    assert all(v <= 0 for v in values)
    mags = [abs(v) for v in values]
    assert mags == sorted(mags)


def test_pair_potential_empty_band_and_parity():
    params, grid, *_ = setup_small(sigma=2.0, sigma0=1.9)
    # no grid mode lies in (1.9, 2.0]... except |k|=1.5 < 1.9, so band empty
    assert nm.pair_potential(params, grid, [0.7]) == 0.0
    params, grid, *_ = setup_small()
    for x in (0.3, 1.1, 2.6):
        assert nm.pair_potential(params, grid, [x]) == pytest.approx(
            nm.pair_potential(params, grid, [-x]), rel=1e-14)


def test_pair_potential_matches_quadrature_oracle():
    params, grid, *_ = setup_small(lam=0.7, mu=0.6, mass=1.4,
                                   modes=(0.5, -0.5, 1.2, -1.9),
                                   sigma=2.0, sigma0=0.9)
    for x in (0.0, 0.8, 2.3):
        expected = pair_potential_oracle(0.7, 0.6, 1.4, 2.0, 0.9,
                                         [0.5, -0.5, 1.2, -1.9],
                                         [1.0] * 4, x)
        assert nm.pair_potential(params, grid, [x]) == pytest.approx(
            expected, rel=1e-13)


def test_self_energy_matches_quadrature_oracle():
    params, grid, _, _, mask = setup_small(lam=0.7, mu=0.6, mass=1.4,
                                           modes=(0.5, -0.5, 1.2, -1.9),
                                           sigma=2.0, sigma0=0.9)
    expected = self_energy_oracle(0.7, 0.6, 1.4, 2.0,
                                  [0.5, -0.5, 1.2, -1.9], [1.0] * 4)
    assert nm.self_energy(params, grid, mask) == pytest.approx(
        expected, rel=1e-13)


# ---------------------------------------------------------------------------
# dressing transformation

def test_dressing_zero_coupling():
    params, grid, lat, basis, mask = setup_small(lam=0.0)
    t_op, q_op = nm.build_dressing(params, grid, lat, basis, mask)
    assert t_op.nnz == 0
    eye = np.eye(lat.n_config * basis.dim)
    assert np.abs(q_op.toarray() - eye).max() < 1e-14


def test_dressing_unitary():
    params, grid, lat, basis, mask = setup_small()
    t_op, q_op = nm.build_dressing(params, grid, lat, basis, mask)
    assert np.abs((t_op + t_op.conj().T).toarray()).max() < 1e-15
    prod = (q_op @ q_op.conj().T).toarray()
    assert np.abs(prod - np.eye(prod.shape[0])).max() < 1e-10


def test_dressing_displaces_vacuum_to_coherent_state():
    # Q |x0, vac> is coherent per mode with displacement
    # sqrt(w) g0 chi e^{-i k x0}; verified against the closed-form
    # coherent amplitudes (high cap so the truncation tail is negligible)
    params, grid, lat, basis, mask = setup_small(n_max=8, lam=0.4)
    _, q_op = nm.build_dressing(params, grid, lat, basis, mask)
    g0 = nm.coupling_profile(params, grid, "dressing").base
    x0_idx = 3
    x0 = lat.axis_coords[x0_idx]
    psi = np.zeros(lat.n_config * basis.dim, dtype=complex)
    psi[x0_idx * basis.dim + basis.rank((0,) * 4)] = 1.0
    out = (q_op @ psi).reshape(lat.n_config, basis.dim)
    assert np.linalg.norm(out[np.arange(lat.n_config) != x0_idx]) < 1e-14
    disp = [np.sqrt(grid.weights[m]) * g0[m] * mask.indicator()[m]
            * np.exp(-1j * grid.modes[m, 0] * x0) for m in range(4)]
    for occ in [(0, 0, 0, 0), (0, 0, 1, 0), (0, 0, 0, 2), (0, 0, 1, 1)]:
        expected = coherent_amplitude(disp, occ)
        assert out[x0_idx, basis.rank(occ)] == pytest.approx(
            expected, abs=1e-10)


# ---------------------------------------------------------------------------
# dressed Hamiltonian

def test_dressed_free_at_zero_coupling():
    params, grid, lat, basis, mask = setup_small(lam=0.0, p=2, sites=4)
    dressed = nm.build_dressed_hamiltonian(params, grid, lat, basis, mask)
    h0 = nm.build_free_hamiltonian(grid, lat, basis)
    assert np.abs((dressed.total - h0).toarray()).max() == 0
    for term in (dressed.interaction_ir, dressed.gradient_term,
                 dressed.quadratic_term, dressed.pair_term):
        assert term.nnz == 0


def test_dressed_terms_hermitian():
    params, grid, lat, basis, mask = setup_small(p=2, sites=4, n_max=2,
                                                 modes=(0.5, -0.5, 1.5))
    dressed = nm.build_dressed_hamiltonian(params, grid, lat, basis, mask)
    for term in (dressed.gradient_term, dressed.quadratic_term,
                 dressed.pair_term, dressed.total):
        arr = term.toarray()
        scale = max(np.abs(arr).max(), 1e-30)
        assert np.abs(arr - arr.conj().T).max() < 1e-12 * scale


def identity_residual(params, grid, lat, basis, mask, psi):
    h_sig = nm.build_hamiltonian(params, grid, lat, basis, mask)
    e_sig = nm.self_energy(params, grid, mask)
    e_ir = nm.self_energy(params, grid,
                          CutoffMask.from_grid(grid, params.sigma0))
    _, q_op = nm.build_dressing(params, grid, lat, basis, mask)
    h_prime = nm.build_dressed_hamiltonian(params, grid, lat, basis,
                                           mask).total
    p = params.n_particles
    qpsi = q_op @ psi
    lhs = h_sig @ qpsi - p * e_sig * qpsi
    rhs = q_op @ (h_prime @ psi - p * e_ir * psi)
    return np.linalg.norm(lhs - rhs)


def test_dressing_identity_exact_at_zero_coupling():
    params, grid, lat, basis, mask = setup_small(lam=0.0)
    rng = np.random.default_rng(6)
    psi = rng.standard_normal(lat.n_config * basis.dim) \
        + 1j * rng.standard_normal(lat.n_config * basis.dim)
    assert identity_residual(params, grid, lat, basis, mask, psi) < 1e-12


def test_dressing_identity_residual_is_second_order_in_spacing():
    # the residual on a fixed smooth state is dominated by the lattice
    # discretization of the derivative couplings and shrinks like h^2
    residuals = []
    for refine in (1, 2, 4):
        sites, h = 8 * refine, 1.0 / refine
        grid = ModeGrid(modes=[0.5, -0.5, 1.5, -1.5], weights=[1.0] * 4,
                        mu=1.0)
        lat = ParticleLattice(dim=1, sites=sites, spacing=h, n_particles=1,
                              mass=1.0)
        params = nm.ModelParams(lam=0.2, mu=1.0, mass=1.0, n_particles=1,
                                sigma=2.0, sigma0=1.0)
        basis = enumerate_fock_basis(4, 3)
        mask = CutoffMask.from_grid(grid, 2.0)
        n = np.arange(sites)
        packet = np.exp(-0.5 * ((n * h - sites * h / 2) / 1.5) ** 2) \
            * np.exp(2j * np.pi * n / sites)
        packet /= np.linalg.norm(packet)
        psi = np.kron(packet, basis.vector((0, 0, 0, 0)))
        residuals.append(
            identity_residual(params, grid, lat, basis, mask, psi))
    assert residuals[0] / residuals[1] == pytest.approx(4, rel=0.5)
    assert residuals[1] / residuals[2] == pytest.approx(4, rel=0.5)


# ---------------------------------------------------------------------------
# Weyl operators

def grid_basis(n_max):
    grid = ModeGrid(modes=[0.5, -0.5, 1.5, -1.5], weights=[1.0] * 4, mu=1.0)
    return grid, enumerate_fock_basis(4, n_max)


def test_weyl_zero_displacement_identity():
    grid, basis = grid_basis(3)
    c = nm.weyl(basis, grid, np.zeros(4)).toarray()
    assert np.abs(c - np.eye(basis.dim)).max() < 1e-14


def test_weyl_unitary():
    grid, basis = grid_basis(4)
    rng = np.random.default_rng(12)
    alpha = 0.3 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
    c = nm.weyl(basis, grid, alpha).toarray()
    assert np.abs(c @ c.conj().T - np.eye(basis.dim)).max() < 1e-10


def test_weyl_mean_occupation():
    grid, basis = grid_basis(8)
    alpha = np.array([0.1 + 0.05j, -0.08j, 0.06, 0.02 - 0.03j])
    c = nm.weyl(basis, grid, alpha)
    vac = basis.vector((0,) * 4)
    cv = c @ vac
    mean = np.vdot(cv, total_number(basis) @ cv).real
    assert mean == pytest.approx(grid.norm_sq(alpha), abs=1e-10)


def test_weyl_composition_law():
    # C(a+b) = C(a) C(b) exp(i Im(a,b)) on low-occupancy states, up to the
    # truncation tail of the displaced states
    grid, basis = grid_basis(8)
    rng = np.random.default_rng(21)
    a = 0.08 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
    b = 0.08 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
    inner = np.sum(grid.weights * np.conj(a) * b)
    lhs = nm.weyl(basis, grid, a + b).toarray()
    rhs = (nm.weyl(basis, grid, a) @ nm.weyl(basis, grid, b)).toarray() \
        * np.exp(1j * inner.imag)
    for occ in [(0, 0, 0, 0), (1, 0, 0, 0), (0, 1, 0, 1)]:
        v = basis.vector(occ)
        assert np.linalg.norm((lhs - rhs) @ v) < 1e-5


def displacement_identity_residual(n_max, occupancy, seed=7):
    grid, basis = grid_basis(n_max)
    rng = np.random.default_rng(seed)
    alpha = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    alpha *= np.sqrt(occupancy / grid.norm_sq(alpha))
    gamma = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    gamma /= np.sqrt(grid.norm_sq(gamma))
    c = nm.weyl(basis, grid, alpha).toarray()
    from nelsonlab.fockcore import smear
    ann = smear(basis, grid, gamma, "annihilate").toarray()
    inner = np.sum(grid.weights * np.conj(gamma) * alpha)
    worst = 0.0
    for occ in [(0, 0, 0, 0), (1, 0, 0, 0), (0, 0, 1, 0), (1, 1, 0, 0),
                (0, 2, 0, 0)]:
        v = basis.vector(occ)
        resid = c.conj().T @ (ann @ (c @ v)) - ann @ v - inner * v
        worst = max(worst, np.linalg.norm(resid))
    return worst


def test_weyl_displacement_identity_at_stated_corner():
    # residual of C* a C = a + (gamma, alpha) on sector-<=2 states at the
    # stated operating point: cap 8, displaced occupancy 0.5
    assert displacement_identity_residual(8, 0.5) <= 1e-6


def test_weyl_displacement_identity_converges_with_cap():
    # the same residual decays steeply as the cap grows and is comfortably
    # below 1e-6 at cap 16 for modest occupancy
    r8 = displacement_identity_residual(8, 0.1)
    r12 = displacement_identity_residual(12, 0.1)
    r16 = displacement_identity_residual(16, 0.1)
    assert r8 > r12 > r16
    assert r16 <= 1e-6
