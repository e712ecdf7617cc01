import math

import numpy as np
import pytest

from nlstring import (SimState, Simulation, SpatialOperators, SourceParams,
                      assemble_update, build_J, compute_g, exact_psi,
                      force_sample, init_state, read_output, step,
                      validate_and_derive)
from nlstring.energy import discrete_energy
from nlstring.errors import (ContactAtBoundary, DegenerateStretch,
                             NonFiniteState)
from conftest import raised_cosine


def desk_setup(n=8, n_modes=3, coupling_scale=1.0):
    prm = validate_and_derive(rho=8000, E=2e11 * coupling_scale, T0=50,
                              L=1.0, r=0.2e-3,
                              sigma0_u=0.2, sigma0_v=0.1, sigma1_u=1e-4)
    ops = SpatialOperators.build(n, prm.L, n_modes)
    return prm, ops


# ---------- force, delta, readout ----------

def test_force_outside_window_is_zero():
    src = SourceParams(peak_force=5.0, onset=1e-3, duration=0.8e-3, kind=2)
    assert force_sample(0.5e-3, src) == 0.0
    assert force_sample(2e-3, src) == 0.0


def test_strike_peaks_at_midpoint():
    src = SourceParams(peak_force=5.0, onset=1e-3, duration=0.8e-3, kind=2)
    assert force_sample(1e-3 + 0.4e-3, src) == pytest.approx(5.0, rel=1e-14)
    assert force_sample(1e-3 + 0.8e-3, src) == pytest.approx(0.0, abs=1e-12)


def test_pluck_ends_at_maximum():
    src = SourceParams(peak_force=3.0, onset=0.0, duration=2e-3, kind=1)
    # half raised cosine: release at full force
    assert force_sample(2e-3, src) == pytest.approx(3.0, rel=1e-14)
    assert force_sample(0.0, src) == pytest.approx(0.0, abs=1e-14)


def test_point_force_vector_on_grid_point():
    # grid-exact abscissa (binary fractions) so alpha is exactly zero
    h, n = 0.125, 8
    J = build_J(0.375, h, n)
    assert J[2] == pytest.approx(1.0 / h)
    assert np.count_nonzero(J) == 1


def test_point_force_vector_unit_integral():
    h, n = 1.0 / 13, 13
    for x_f in (0.111, 0.5, 0.72, 0.899):
        J = build_J(x_f, h, n)
        assert h * J.sum() == pytest.approx(1.0, abs=1e-14)


def test_point_force_vector_bracket():
    # support on the two grid points around the contact abscissa of the
    # struck-string table, on its production grid
    h, n = 1.0 / 139, 139
    J = build_J(0.72, h, n)
    nz = np.nonzero(J)[0]
    x = h * (nz + 1)
    assert len(nz) == 2
    assert x[0] <= 0.72 <= x[1]
    assert x[1] - x[0] == pytest.approx(h)


def test_contact_at_boundary_raises():
    with pytest.raises(ContactAtBoundary):
        build_J(0.01, 0.1, 10)
    with pytest.raises(ContactAtBoundary):
        build_J(0.99, 0.1, 10)


def test_readout_variants():
    h = 0.125
    u = np.arange(1, 8, dtype=float)   # linear ramp interior field
    assert read_output(u, 3 * h, h) == pytest.approx(3.0, rel=1e-14)
    assert read_output(u, 0.3, h) == pytest.approx(0.3 / h, rel=1e-14)
    assert read_output(u, 0.0, h) == 0.0
    assert read_output(u, 1.0, h) == 0.0


# ---------- potential gradients ----------

def test_gradients_at_rest(fig1_params):
    prm, ops = fig1_params, SpatialOperators.build(10, 1.0, 3)
    g_u, g_v = compute_g(np.zeros(9), np.zeros(3), ops, prm)
    assert np.all(g_u == 0.0)
    assert np.allclose(g_v, math.sqrt(prm.coupling), rtol=1e-15)


def test_gradient_magnitude_identity():
    prm, ops = desk_setup(n=12, n_modes=4)
    rng = np.random.default_rng(11)
    for _ in range(25):
        u = 1e-3 * rng.standard_normal(11)
        s = 1e-4 * rng.standard_normal(4)
        g_u, g_v = compute_g(u, s, ops, prm)
        assert np.allclose(g_u ** 2 + g_v ** 2, prm.coupling, rtol=1e-12)


def test_gradient_parity():
    prm, ops = desk_setup(n=12, n_modes=4)
    rng = np.random.default_rng(4)
    u = 1e-3 * rng.standard_normal(11)
    s = 1e-4 * rng.standard_normal(4)
    g_u, g_v = compute_g(u, s, ops, prm)
    g_u2, g_v2 = compute_g(-u, s, ops, prm)
    assert np.allclose(g_u2, -g_u, rtol=1e-14)
    assert np.allclose(g_v2, g_v, rtol=1e-14)


def test_degenerate_stretch_guard():
    prm, ops = desk_setup(n=8, n_modes=3)
    # longitudinal strain of -1 collapses the stretch at the first midpoint
    v = np.zeros(7)
    v[0] = -ops.h
    s = ops.basis.T @ v
    # project back to check the collapse survives the modal truncation
    if abs(1.0 + (ops.dz @ s)[0]) < 1e-10:
        with pytest.raises(DegenerateStretch):
            compute_g(np.zeros(7), s, ops, prm)
    else:
        full = SpatialOperators.build(8, 1.0, 7)
        s_full = full.basis.T @ v
        with pytest.raises(DegenerateStretch):
            compute_g(np.zeros(7), s_full, full, prm)


# ---------- initialisation ----------

def test_rest_state_init(fig1_params):
    ops = SpatialOperators.build(12, 1.0, 3)
    st = init_state(np.zeros(11), np.zeros(11), np.zeros(11), np.zeros(11),
                    ops, fig1_params, 1e-5)
    assert np.all(st.psi == 0.0)
    assert np.all(st.u_cur == 0.0)
    assert st.n == 1


def test_raised_cosine_init_psi_support(fig1_params):
    # the pointwise auxiliary value of the datum is nonnegative and
    # supported exactly where the transverse strain is; the interleaved
    # start adds only an O(k^2) longitudinal correction on top
    prm = fig1_params.without_stiffness()
    ops = SpatialOperators.build(40, 1.0, 5)
    x = ops.interior_x
    u0 = raised_cosine(x, 0.5, 5e-3, 0.1)
    s0 = np.zeros(5)
    psi0 = exact_psi(u0, s0, ops, prm)
    du = ops.apply_dminus(u0)
    assert np.all(psi0 >= 0.0)
    assert np.all(psi0[np.abs(du) < 1e-15] == 0.0)
    assert psi0[np.abs(du) > 1e-3].min() > 0.0
    k = 1e-6
    st = init_state(u0, np.zeros(39), np.zeros(39), np.zeros(39),
                    ops, prm, k)
    bound = 10.0 * k ** 2 * prm.coupling / (prm.rho_a * ops.h ** 2) \
        * np.max(psi0)
    assert np.max(np.abs(st.psi - psi0)) <= bound
    assert st.psi[np.abs(du) > 1e-3].min() > 0.0


def test_linear_taylor_start(fig1_params):
    # no velocity, no stiffness, no coupling: u1 - u0 = (k^2 c^2 / 2) D2 u0
    prm = fig1_params.with_zero_coupling().without_stiffness()
    ops = SpatialOperators.build(16, 1.0, 3)
    rng = np.random.default_rng(0)
    u0 = 1e-3 * rng.standard_normal(15)
    k = 1e-5
    st = init_state(u0, np.zeros(15), np.zeros(15), np.zeros(15), ops, prm, k)
    expected = 0.5 * k ** 2 * prm.c_u ** 2 * (ops.d2 @ u0)
    assert np.max(np.abs(st.u_cur - u0 - expected)) \
        <= 1e-12 * np.max(np.abs(expected))


# ---------- update system ----------

def test_uncoupled_block_matrix_is_scaled_identity(fig1_params):
    prm = fig1_params
    ops = SpatialOperators.build(10, 1.0, 3)
    k = 1e-5
    zeros = np.zeros(10)
    upd = assemble_update(zeros, zeros, ops, prm, k, theta_u=1.0,
                          theta_v=1.0, losses_on=False)
    scale = prm.rho_a / k ** 2
    assert np.allclose(upd.chol_banded[1, :], math.sqrt(scale), rtol=1e-14)
    assert np.all(upd.chol_banded[0, 1:] == 0.0)
    assert np.all(upd.a_us == 0.0)
    # solving reproduces b / scale, i.e. the update is explicit in effect
    rng = np.random.default_rng(1)
    b_u, b_s = rng.standard_normal(9), rng.standard_normal(3)
    u, s = upd.solve(b_u, b_s)
    assert np.allclose(u, b_u / scale, rtol=1e-13)
    assert np.allclose(s, b_s / scale, rtol=1e-13)


def test_block_matrix_symmetry():
    prm, ops = desk_setup(n=9, n_modes=3)
    rng = np.random.default_rng(5)
    g_u = rng.standard_normal(9) * 10
    g_v = rng.standard_normal(9) * 10
    k = 1e-5
    upd = assemble_update(g_u, g_v, ops, prm, k, theta_u=0.8, theta_v=0.9)
    # reconstruct the dense blocks and check A_su == A_us^T exactly
    a_us = -0.25 * (ops.d_plus @ (np.diag(g_u * g_v) @ ops.dz))
    assert np.allclose(upd.a_us, a_us, rtol=1e-12)
    a_uu = (prm.rho_a / k ** 2 * (np.eye(8) + (1.0 - 0.8) * ops.h ** 2 / 2
                                  * ops.d2.toarray())
            + prm.rho_a * prm.sigma0_u / k * np.eye(8)
            - prm.rho_a * prm.sigma1_u / k * ops.d2.toarray()
            - 0.25 * ops.d_plus @ np.diag(g_u ** 2) @ ops.d_minus.toarray())
    band = np.zeros((2, 8))
    band[1] = np.diag(a_uu)
    band[0, 1:] = np.diag(a_uu, 1)
    from nlstring.stepper import _uu_bands
    got = _uu_bands(g_u, ops, prm, k, 0.8, prm.sigma0_u, prm.sigma1_u)
    assert np.allclose(got[1], band[1], rtol=1e-12)
    assert np.allclose(got[0, 1:], band[0, 1:], rtol=1e-12)
    assert np.allclose(a_uu, a_uu.T, rtol=1e-12)


# ---------- stepping ----------

def test_zero_state_is_fixed_point(fig1_params):
    ops = SpatialOperators.build(10, 1.0, 3)
    sim = Simulation(fig1_params, ops, 1e-5, losses_on=False)
    st = sim.initial_state()
    for _ in range(5):
        st = sim.step_once(st)
    assert np.all(st.u_cur == 0.0)
    assert np.all(st.s_cur == 0.0)
    assert np.all(st.psi == 0.0)


def test_one_block_solve_per_step(fig1_params):
    prm = fig1_params.without_stiffness()
    ops = SpatialOperators.build(24, 1.0, 4)
    sim = Simulation(prm, ops, 1e-5, losses_on=False)
    x = ops.interior_x
    st = sim.initial_state(u0=raised_cosine(x, 0.5, 5e-3, 0.1))
    n_steps = 100
    for _ in range(n_steps):
        st = sim.step_once(st)
    assert sim.solve_count == n_steps


def fixed_point_oracle(state, ops, prm, k, theta_u, theta_v, losses_on,
                       f_n, J, max_iter=500, tol=1e-15):
    """Direct iteration on the unreduced three-field update equations."""
    import scipy.linalg as sla

    g_u, g_v = compute_g(state.u_cur, state.s_cur, ops, prm)
    m = ops.n - 1
    s0u = prm.sigma0_u if losses_on else 0.0
    s1u = prm.sigma1_u if losses_on else 0.0
    s0v = prm.sigma0_v if losses_on else 0.0
    rho_a = prm.rho_a
    r_mat = np.eye(m) + (1.0 - theta_u) * ops.h ** 2 / 2.0 * ops.d2.toarray()
    m_u = rho_a / k ** 2 * r_mat + rho_a * s0u / k * np.eye(m) \
        - rho_a * s1u / k * ops.d2.toarray()
    m_u_lu = sla.lu_factor(m_u)
    s_diag = 1.0 - (1.0 - theta_v) * k ** 2 / 2.0 * ops.eigvals
    m_s = rho_a / k ** 2 * s_diag + rho_a * s0v / k

    u_c, u_p = state.u_cur, state.u_prev
    s_c, s_p = state.s_cur, state.s_prev
    base_u = (rho_a / k ** 2 * (r_mat @ (2 * u_c - u_p))
              + rho_a * s0u / k * u_p - rho_a * s1u / k * (ops.d2 @ u_p)
              + prm.T0 * (ops.d2 @ u_c) - prm.ei * (ops.d4 @ u_c))
    if J is not None:
        base_u = base_u + J * f_n
    base_s = (rho_a / k ** 2 * (s_diag * (2 * s_c - s_p))
              + rho_a * s0v / k * s_p - prm.T0 * ops.eigvals * s_c)

    psi_next = state.psi.copy()
    for _ in range(max_iter):
        mu_psi = 0.5 * (psi_next + state.psi)
        u_next = sla.lu_solve(m_u_lu, base_u + ops.d_plus @ (g_u * mu_psi))
        s_next = (base_s - ops.dz.T @ (g_v * mu_psi)) / m_s
        new_psi = state.psi + 0.5 * (g_u * (ops.d_minus @ (u_next - u_p))
                                     + g_v * (ops.dz @ (s_next - s_p)))
        delta = np.max(np.abs(new_psi - psi_next))
        psi_next = new_psi
        if delta <= tol * max(1.0, np.max(np.abs(psi_next))):
            break
    return u_next, s_next, psi_next


@pytest.mark.parametrize("theta_u,theta_v,losses_on", [
    (1.0, 1.0, False), (0.85, 0.95, True),
])
def test_production_step_matches_fixed_point_oracle(theta_u, theta_v, losses_on):
    # the scheme is linearly implicit: one direct solve must agree with the
    # converged iteration on the unreduced equations
    prm, ops = desk_setup(n=8, n_modes=3)
    k = 1e-6
    rng = np.random.default_rng(42)
    J = build_J(0.4, ops.h, ops.n)
    st = SimState(u_cur=1e-3 * rng.standard_normal(7),
                  u_prev=1e-3 * rng.standard_normal(7),
                  s_cur=1e-4 * rng.standard_normal(3),
                  s_prev=1e-4 * rng.standard_normal(3),
                  psi=rng.standard_normal(8), n=3, k=k)
    g_u, g_v = compute_g(st.u_cur, st.s_cur, ops, prm)
    upd = assemble_update(g_u, g_v, ops, prm, k, theta_u, theta_v, losses_on)
    new = step(st, ops, prm, upd, f_n=2.5, J=J, losses_on=losses_on)
    u_ref, s_ref, psi_ref = fixed_point_oracle(
        st, ops, prm, k, theta_u, theta_v, losses_on, 2.5, J)
    scale = np.max(np.abs(u_ref))
    assert np.max(np.abs(new.u_cur - u_ref)) <= 1e-10 * scale
    assert np.max(np.abs(new.s_cur - s_ref)) <= 1e-10 * scale
    assert np.max(np.abs(new.psi - psi_ref)) <= 1e-10 * np.max(np.abs(psi_ref))


def test_zero_coupling_matches_plain_leapfrog(fig1_params):
    # EA = T0 reduces the scheme to the linear stiff string exactly
    prm = fig1_params.with_zero_coupling()
    k = 1.0 / 96000.0
    n = 60
    ops = SpatialOperators.build(n, prm.L, 4)
    x = ops.interior_x
    u0 = raised_cosine(x, 0.5, 5e-3, 0.2)
    sim = Simulation(prm, ops, k, losses_on=False)
    st = sim.initial_state(u0=u0)
    assert np.all(st.psi == 0.0)

    u_prev = u0.copy()
    u_cur = u0 + 0.5 * k ** 2 / prm.rho_a * (
        prm.T0 * (ops.d2 @ u0) - prm.ei * (ops.d4 @ u0))
    for _ in range(200):
        st = sim.step_once(st)
        u_next = (2 * u_cur - u_prev + k ** 2 / prm.rho_a
                  * (prm.T0 * (ops.d2 @ u_cur) - prm.ei * (ops.d4 @ u_cur)))
        u_prev, u_cur = u_cur, u_next
    assert np.all(st.psi == 0.0)
    assert np.max(np.abs(st.u_cur - u_cur)) <= 1e-12 * np.max(np.abs(u_cur))


def test_solution_and_psi_bounds(fig1_params):
    # lossless run: velocity norm and psi norm bounded by the initial energy
    prm = fig1_params.without_stiffness()
    k = 1.0 / 48000.0
    n = int(prm.L / (1.5 * prm.c_u * k))
    ops = SpatialOperators.build(n, prm.L, 6)
    sim = Simulation(prm, ops, k, losses_on=False)
    st = sim.initial_state(u0=raised_cosine(ops.interior_x, 0.5, 5e-3, 0.1))
    h0_energy = discrete_energy(st, ops, prm).total
    vel_bound = math.sqrt(2 * h0_energy / prm.rho_a)
    psi_bound = math.sqrt(2 * h0_energy)
    for _ in range(2000):
        st = sim.step_once(st)
        vel = math.sqrt(ops.h) * np.linalg.norm((st.u_cur - st.u_prev) / k)
        psi = math.sqrt(ops.h) * np.linalg.norm(st.psi)
        assert vel <= vel_bound * (1 + 1e-12)
        assert psi <= psi_bound * (1 + 1e-12)


def test_instability_below_grid_bound_detected(fig1_params):
    # h under the stability limit: the linear-reduction run blows up fast
    # (the coupled scheme saturates into a polluted state instead, since
    # its total energy stays conserved; the eigenvalue test in the
    # dispersion module is the reliable detector there)
    prm = fig1_params.with_zero_coupling().without_stiffness()
    k = 1.0 / 48000.0
    h0 = prm.c_u * k
    n = int(math.ceil(prm.L / (0.9 * h0)))
    ops = SpatialOperators.build(n, prm.L, 3)
    sim = Simulation(prm, ops, k, losses_on=False)
    st = sim.initial_state(u0=raised_cosine(ops.interior_x, 0.5, 5e-3, 0.1))
    detected = False
    for _ in range(100_000):
        try:
            st = sim.step_once(st)
        except NonFiniteState:
            detected = True
            break
        if discrete_energy(st, ops, prm).total < 0.0:
            detected = True
            break
    assert detected


def test_frozen_update_path_runs(fig1_params):
    prm = fig1_params.without_stiffness()
    ops = SpatialOperators.build(30, 1.0, 4)
    sim = Simulation(prm, ops, 1e-5, losses_on=False, freeze_update=True)
    st = sim.initial_state(u0=raised_cosine(ops.interior_x, 0.5, 5e-3, 0.1))
    for _ in range(50):
        st = sim.step_once(st)
    assert np.all(np.isfinite(st.u_cur))
    assert sim.solve_count == 50
