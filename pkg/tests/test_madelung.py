import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hybridkvh.densities import joint_distribution, quantum_marginal
from hybridkvh.grid import CONTINUUM, FINITE_DIM, PhaseGrid
from hybridkvh.liouvillian import state_norm2
from hybridkvh.madelung import (FieldSampler, MadelungError, TrajectoryAdvector,
                                TrajectoryEnsemble, circle_loop,
                                continuity_residual, hybrid_currents,
                                hybrid_lagrangian, loop_integral_dxV,
                                loop_integral_p_dq, madelung_residuals,
                                phase_gradient, polar_decompose, reconstruct,
                                velocity_field)
from hybridkvh.model import ModelParams, SeparableHamiltonian, build_hamiltonian
from hybridkvh.propagate import evolve
from hybridkvh.states import gaussian_packet, product_state, x_wavepacket

TWO_PI = 2 * np.pi


@pytest.fixture
def grid():
    # nx resolves the von Mises x-packet spectrum to rounding
    return PhaseGrid(24, 32, 32, Lq=TWO_PI, Lp=4 * np.pi, Lx=TWO_PI, mode=CONTINUUM)


@pytest.fixture
def params():
    return ModelParams(hbar=1.0, m=1.0, M=1.0, lam=0.1)


def packet(grid, mode_x=1, kappa_q=2.0, sigma_p=0.7, q0=0.5):
    return product_state(grid, gaussian_packet(grid, q0=q0, kappa_q=kappa_q,
                                               sigma_p=sigma_p),
                         x_wavepacket(grid, kappa_x=2.0, mode_x=mode_x))


def test_polar_plane_wave(grid):
    c = 0.3
    psi = c * np.exp(2j * grid.x)[None, None, :] * np.ones(grid.state_shape)
    fields = polar_decompose(psi, grid, hbar=1.0)
    assert np.allclose(fields.D, c**2)
    # S = hbar k x, unwrapped along x up to a global 2 pi branch
    dS = np.diff(fields.S, axis=2)
    assert np.allclose(dS, 2 * grid.hx, atol=1e-12)


def test_polar_real_positive(grid):
    psi = packet(grid, mode_x=0)
    psi = np.abs(psi).astype(complex)
    fields = polar_decompose(psi, grid)
    assert np.max(np.abs(fields.S)) == 0.0


def test_polar_roundtrip(grid):
    psi = packet(grid)
    fields = polar_decompose(psi, grid)
    back = reconstruct(fields)
    assert np.max(np.abs(back - psi)[fields.mask]) < 1e-12


def test_polar_degenerate_error(grid):
    with pytest.raises(MadelungError):
        polar_decompose(np.zeros(grid.state_shape, dtype=complex), grid)
    tiny = np.full(grid.state_shape, 1e-200, dtype=complex)
    with pytest.raises(MadelungError):
        polar_decompose(tiny * 0.0, grid)


def test_phase_gradient_plane_wave(grid):
    # flat x-amplitude keeps the shifted state strictly band-limited
    base = product_state(grid, gaussian_packet(grid, q0=0.5, sigma_p=0.7),
                         np.exp(1j * grid.x).astype(complex) / np.sqrt(grid.Lx))
    shifted = base * np.exp(2j * grid.x)[None, None, :]
    g0 = phase_gradient(base, grid, "x")
    g1 = phase_gradient(shifted, grid, "x")
    mask = (np.abs(base) ** 2) >= 1e-6 * np.max(np.abs(base) ** 2)
    assert np.max(np.abs((g1 - g0 - 2.0))[mask]) < 1e-9


def test_stationary_residuals(grid):
    # constant symbol: the state picks up a global phase, D static,
    # dS/dt = -E balances L_I = -E
    E = 0.8
    params = ModelParams(hbar=1.0, m=np.inf, M=np.inf)
    H = SeparableHamiltonian(grid, params, E * np.ones((grid.nq, grid.nx)))
    psi0 = packet(grid)
    dt = 1e-3
    snaps = [psi0 * np.exp(-1j * E * t) for t in (0.0, dt, 2 * dt)]
    rs, rd, _, _ = madelung_residuals(H, snaps[0], snaps[1], snaps[2], dt)
    assert rs <= 1e-8
    assert rd <= 1e-10


def test_velocity_and_lagrangian_fields(grid, params):
    H = build_hamiltonian("pendulum_bilinear", grid, params)
    psi = packet(grid, mode_x=1)
    xq, xp, vx = velocity_field(H, psi)
    assert np.allclose(xq, params.inv_M * grid.p_bc(3) * np.ones_like(xq))
    # plane-wave x-phase: grad_x S / m = hbar k / m in the packet bulk
    mask = (np.abs(psi) ** 2) >= 1e-6 * np.max(np.abs(psi) ** 2)
    k = 2 * np.pi / grid.Lx
    assert np.median(np.abs(vx[mask] - k)) < 1e-6
    # constant D: the quantum-potential part of the Lagrangian vanishes
    flat = np.exp(1j * grid.x)[None, None, :] * np.ones(grid.state_shape)
    flat /= np.sqrt(state_norm2(grid, flat))
    lag = hybrid_lagrangian(H, flat)
    LI = H.interaction_lagrangian()
    assert np.max(np.abs(lag - LI - 0.5 * k**2)) < 1e-10


def test_currents_product_plane_wave(grid, params):
    # real classical factor x plane wave: J_Q = (hbar k/m)(D + d_p(p D))
    H = build_hamiltonian("pendulum_bilinear", grid, params)
    Psi = gaussian_packet(grid, kappa_q=2.0, sigma_p=0.7)
    chi = np.exp(1j * grid.x) / np.sqrt(grid.Lx)
    psi = Psi[:, :, None] * chi
    dist = joint_distribution(psi, grid, params.hbar)
    jc_q, jc_p, jq = hybrid_currents(H, psi, dist)
    D = (psi.conj() * psi).real
    k = 2 * np.pi / grid.Lx
    expected = k * (D + grid.deriv(grid.p_bc(3) * D, "p"))
    mask = D >= 1e-8 * D.max()
    assert np.max(np.abs(jq - expected)[mask]) < 1e-10
    assert np.allclose(jc_q, dist * grid.p_bc(3))


def test_currents_vanish_without_quantum_kinetics(grid):
    params = ModelParams(hbar=1.0, m=np.inf, M=1.0, lam=0.1)
    H = build_hamiltonian("pendulum_bilinear", grid, params)
    psi = packet(grid)
    dist = joint_distribution(psi, grid, params.hbar)
    _, _, jq = hybrid_currents(H, psi, dist)
    assert np.max(np.abs(jq)) == 0.0


def test_continuity_bracket_form_without_quantum_kinetics(grid):
    # m -> infinity: the joint distribution obeys pure bracket transport
    params = ModelParams(hbar=1.0, m=np.inf, M=1.0, lam=0.1)
    H = build_hamiltonian("pendulum_bilinear", grid, params)
    psi0 = packet(grid)
    dt = 5e-4
    snaps = []

    def keep(st):
        if st.step >= 58:
            snaps.append(st.psi.copy())

    evolve(H, psi0, dt, 60, observers=(keep,))
    dists = [joint_distribution(s, grid, params.hbar) for s in snaps]
    rc, _ = continuity_residual(H, dists[0], dists[2], snaps[1], dists[1], dt)
    assert rc <= 1e-6


def test_residual_convergence_uncoupled():
    # fine grid so the time-stencil error dominates the spatial floor
    grid = PhaseGrid(24, 48, 32, Lq=TWO_PI, Lp=4 * np.pi, Lx=TWO_PI, mode=CONTINUUM)
    params = ModelParams(hbar=1.0, lam=0.0)
    H = build_hamiltonian("uncoupled", grid, params)
    psi0 = packet(grid, mode_x=1)
    res = []
    for dt, steps in ((2e-3, 50), (1e-3, 100)):
        snaps = []

        def keep(st, steps=steps, snaps=snaps):
            if st.step >= steps - 2:
                snaps.append(st.psi.copy())

        evolve(H, psi0, dt, steps, observers=(keep,))
        rs, rd, _, _ = madelung_residuals(H, snaps[0], snaps[1], snaps[2], dt)
        res.append((rs, rd))
    assert 2.5 <= res[0][0] / res[1][0] <= 5.5
    assert 2.5 <= res[0][1] / res[1][1] <= 5.5


def test_quantum_marginal_transport(grid, params):
    # d rho_q/dt = -div_x of the z-integrated quantum flux
    H = build_hamiltonian("pendulum_bilinear", grid, params)
    psi0 = packet(grid)
    dt = 5e-4
    snaps = []

    def keep(st):
        if st.step >= 38:
            snaps.append(st.psi.copy())

    evolve(H, psi0, dt, 40, observers=(keep,))
    rq = [quantum_marginal(s, grid, params.hbar) for s in snaps]
    dmarg = (rq[2] - rq[0]) / (2 * dt)
    flux = params.hbar * (snaps[1].conj() * grid.deriv(snaps[1], "x")).imag
    fx = grid.integrate_z(flux) * params.inv_m
    k = grid.wavenumbers("x")
    div = np.fft.ifft(1j * k * np.fft.fft(fx)).real
    assert np.max(np.abs(dmarg + div)) <= 1e-6


# -- trajectories -----------------------------------------------------------

def test_trajectory_matches_pendulum_oracle(grid):
    params = ModelParams(hbar=1.0, lam=0.0)
    H = build_hamiltonian("uncoupled", grid, params)
    psi0 = packet(grid, mode_x=1, q0=0.5)
    adv = TrajectoryAdvector(H, dVdq_fn=H.dVdq_fn)
    ens = TrajectoryEnsemble(np.array([[0.5, 0.3, 0.0], [0.9, -0.2, 1.0]]))
    dt, steps = 1e-3, 1000
    state = [psi0]

    cur = {"s": adv.vx_sampler(psi0)}

    def advance(st):
        nxt = adv.vx_sampler(st.psi)
        if st.step > 0:
            adv.step(ens, cur["s"], nxt, dt)
        cur["s"] = nxt

    evolve(H, psi0, dt, steps, observers=(advance,))

    def rhs(t, y):
        return [y[1], -np.sin(y[0])]

    for j, (q0, p0, _) in enumerate([[0.5, 0.3, 0.0], [0.9, -0.2, 1.0]]):
        sol = solve_ivp(rhs, (0.0, steps * dt), [q0, p0], rtol=1e-11, atol=1e-12,
                        dense_output=True)
        ref = sol.sol(steps * dt)
        assert abs(ens.points[j, 0] - ref[0]) < 1e-6
        assert abs(ens.points[j, 1] - ref[1]) < 1e-6


def test_trajectory_x_velocity_plane_wave(grid, params):
    H = build_hamiltonian("pendulum_bilinear", grid, params)
    Psi = gaussian_packet(grid, kappa_q=2.0, sigma_p=0.7)
    chi = np.exp(1j * 2 * grid.x) / np.sqrt(grid.Lx)
    psi = Psi[:, :, None] * chi
    adv = TrajectoryAdvector(H, dVdq_fn=H.dVdq_fn)
    s = adv.vx_sampler(psi)
    pts = np.array([[0.5, 0.0, 0.3], [0.2, 0.4, -1.0]])
    # the node mask zeroes the velocity in the far tail; its spline
    # ringing bounds the sampler accuracy in the bulk
    assert np.max(np.abs(s(pts) - 2.0)) < 1e-5


def test_phase_transport_along_trajectory(grid, params):
    # d/dt S(t, Phi(t)) equals the hybrid Lagrangian along the flow
    H = build_hamiltonian("pendulum_bilinear", grid, params)
    psi0 = packet(grid, mode_x=1, q0=0.5)
    adv = TrajectoryAdvector(H, dVdq_fn=H.dVdq_fn)
    pts0 = np.array([[0.5, 0.2, 0.4], [0.8, -0.3, -0.5]])
    ens = TrajectoryEnsemble(pts0.copy())
    dt, steps = 1e-3, 400
    lag_acc = np.zeros(len(pts0))
    cur = {}

    def theta(psi, pts):
        re = FieldSampler(grid, psi.real)(pts)
        im = FieldSampler(grid, psi.imag)(pts)
        return np.arctan2(im, re)

    def advance(st):
        nxt = adv.vx_sampler(st.psi)
        lag = FieldSampler(grid, hybrid_lagrangian(H, st.psi))
        if st.step > 0:
            prev_val = cur["lag"](ens.points)
            adv.step(ens, cur["s"], nxt, dt)
            lag_acc[:] += 0.5 * dt * (prev_val + lag(ens.points))
        cur["s"] = nxt
        cur["lag"] = lag
        cur["psi"] = st.psi.copy()

    evolve(H, psi0, dt, steps, observers=(advance,))
    th0 = theta(psi0, pts0)
    thT = theta(cur["psi"], ens.points)
    predicted = th0 + lag_acc  # hbar = 1
    wrapped = np.angle(np.exp(1j * (thT - predicted)))
    assert np.max(np.abs(wrapped)) <= 1e-4


# -- circulation loops -------------------------------------------------------

def test_loop_integral_exact_circle():
    pts = circle_loop(128, (0.3, 0.1, 0.0), (0.5, 0.4, 0.0))
    # oint p dq for the (q, p) ellipse traversed clockwise in theta
    assert loop_integral_p_dq(pts) == pytest.approx(-np.pi * 0.5 * 0.4, rel=1e-12)


def test_loop_dxV_closed_form():
    pts = circle_loop(256, (0.0, 0.0, 0.0), (0.3, 0.2, 0.5))

    def dvdx(q, x):
        return np.sin(x)  # exact differential: closed-loop integral vanishes

    assert abs(loop_integral_dxV(pts, dvdx)) < 1e-14
    # zero x-extent: no support for the x-integrand at all
    flat = circle_loop(256, (0.0, 0.0, 0.0), (0.3, 0.2, 0.0))
    assert loop_integral_dxV(flat, lambda q, x: np.sin(q) * np.cos(x)) == 0.0


def test_loop_conservation_uncoupled(grid):
    params = ModelParams(hbar=1.0, lam=0.0)
    H = build_hamiltonian("uncoupled", grid, params)
    psi0 = packet(grid, mode_x=1, q0=0.5)
    adv = TrajectoryAdvector(H, dVdq_fn=H.dVdq_fn)
    ens = TrajectoryEnsemble(circle_loop(128, (0.5, 0.0, 0.0), (0.4, 0.4, 0.4)))
    I0 = loop_integral_p_dq(ens.points)
    dt, steps = 1e-3, 500
    cur = {"s": None}
    series = []

    def advance(st):
        nxt = adv.vx_sampler(st.psi)
        if cur["s"] is not None:
            adv.step(ens, cur["s"], nxt, dt)
        cur["s"] = nxt
        series.append(loop_integral_p_dq(ens.points))
        # the x-part of the rate vanishes identically without coupling
        assert abs(loop_integral_dxV(ens.points, H.dVdx_fn)) < 1e-13

    evolve(H, psi0, dt, steps, observers=(advance,))
    assert np.max(np.abs(np.array(series) - I0)) <= 1e-6
