"""Batch invariant suites behind the ``check`` verb: each returns a
machine-readable report of named checks with measured values and
tolerances.  These are fast reduced-size counterparts of the full
acceptance tests.
"""

from __future__ import annotations

import numpy as np

from .closure import (aux_one_form_identity_residual, closure_monitors,
                      closure_energy, closure_step)
from .densities import defining_identity_residual, density_equivariance_residual
from .grid import FINITE_DIM, PhaseGrid
from .liouvillian import (PointTransform, commutator_identity_residual,
                          liouvillian_equivariance_residual, materialize_liouvillian,
                          state_norm2)
from .model import (MatrixHamiltonian, ModelParams, PAULI_X, PAULI_Y, PAULI_Z,
                    build_hamiltonian)
from .propagate import dense_exponential_oracle, evolve
from .scenarios import (build_closure_initial, build_grid, build_initial_state,
                        build_params, scenario_config)
from .states import gaussian_packet, product_state, spinor


class SuiteError(ValueError):
    pass


def _entry(name, value, tol, larger_is_fail=True):
    ok = value <= tol if larger_is_fail else value >= tol
    return {"name": name, "value": float(value), "tolerance": float(tol),
            "passed": bool(ok)}


def _random_bandlimited_state(grid, rng, kmax=3, sigma_p=0.8):
    base = gaussian_packet(grid, kappa_q=2.0, sigma_p=sigma_p)
    pert = np.zeros_like(base)
    q = grid.q[:, None]
    pt = 2 * np.pi * grid.p[None, :] / grid.Lp
    for _ in range(6):
        mq = rng.integers(-kmax, kmax + 1)
        mp = rng.integers(-kmax, kmax + 1)
        c = rng.standard_normal() + 1j * rng.standard_normal()
        pert += 0.2 * c * np.exp(1j * (mq * q + mp * pt))
    Psi = base * (1.0 + 0.3 * pert)
    v = rng.standard_normal(grid.nx) + 1j * rng.standard_normal(grid.nx)
    psi = Psi[:, :, None] * (v / np.linalg.norm(v))[None, None, :]
    return psi / np.sqrt(state_norm2(grid, psi))


def _random_observable(grid, params, rng, kmax=2):
    q = grid.q[:, None, None, None]
    pt = (2 * np.pi * grid.p / grid.Lp)[None, :, None, None]
    n = grid.nx
    paulis = [np.eye(2, dtype=complex), PAULI_X, PAULI_Y, PAULI_Z] if n == 2 \
        else [np.eye(n, dtype=complex)]
    W = np.zeros((grid.nq, grid.np_, n, n), dtype=complex)
    for _ in range(4):
        mq = int(rng.integers(-kmax, kmax + 1))
        mp = int(rng.integers(-kmax, kmax + 1))
        amp = rng.standard_normal()
        phase = rng.uniform(0, 2 * np.pi)
        sigma = paulis[int(rng.integers(0, len(paulis)))]
        W += amp * np.cos(mq * q + mp * pt + phase) * sigma
    return MatrixHamiltonian(grid, params, W, kinetic=False)


def suite_identities(seed: int = 1234) -> list:
    rng = np.random.default_rng(seed)
    report = []
    params = ModelParams(hbar=1.0, lam=0.1)

    # grid calculus on a small torus
    g = PhaseGrid(16, 16, 2, Lq=2 * np.pi, Lp=8.0, mode=FINITE_DIM)
    a = np.real(np.exp(1j * g.q[:, None]) * np.exp(1j * 2 * np.pi * g.p[None, :] / g.Lp))
    b = np.real(np.exp(2j * g.q[:, None]) + np.exp(-1j * 2 * np.pi * g.p[None, :] / g.Lp))
    sbp = abs(float(g.integrate_z(g.deriv(a, "q") * b) + g.integrate_z(a * g.deriv(b, "q"))))
    report.append(_entry("summation_by_parts_q", sbp, 1e-12))
    bri = abs(float(g.integrate_z(g.poisson_bracket(a, b))))
    report.append(_entry("bracket_integral_zero", bri, 1e-12))
    mode = np.sin(2 * np.pi * 3 * (g.q[:, None] + 0 * g.p[None, :]) / g.Lq)
    exact = (2 * np.pi * 3 / g.Lq) * np.cos(2 * np.pi * 3 * g.q[:, None] / g.Lq)
    derr = float(np.max(np.abs(g.deriv(mode + 0 * g.p[None, :], "q") - exact))) / float(np.max(np.abs(exact)))
    report.append(_entry("spectral_derivative_mode", derr, 1e-12))

    # pairing identity basket
    gp = PhaseGrid(24, 32, 2, Lq=2 * np.pi, Lp=10.0, mode=FINITE_DIM)
    worst = 0.0
    for _ in range(20):
        psi = _random_bandlimited_state(gp, rng)
        A = _random_observable(gp, params, rng)
        worst = max(worst, defining_identity_residual(A, psi))
    report.append(_entry("pairing_identity_20_observables", worst, 1e-10))

    # commutator identity cases on the tiny grid
    gt = PhaseGrid(8, 8, 2, Lq=2 * np.pi, Lp=2 * np.pi, mode=FINITE_DIM)
    Q = gt.q[:, None, None, None]
    P = gt.p[None, :, None, None]
    ones = np.ones((8, 8, 1, 1))

    def mk(W):
        return MatrixHamiltonian(gt, params, W * ones, kinetic=False)

    r1 = commutator_identity_residual(mk(np.sin(Q) * np.eye(2)), mk(np.cos(Q) * np.eye(2)))
    r2 = commutator_identity_residual(mk(np.sin(Q) * PAULI_X), mk(np.sin(Q) * PAULI_X))
    r3 = commutator_identity_residual(mk(np.sin(Q) * PAULI_X), mk(np.cos(P) * PAULI_Y))
    report.append(_entry("commutator_identity_scalar_reduction", r1, 1e-10))
    report.append(_entry("commutator_identity_equal_symbols", r2, 1e-12))
    report.append(_entry("commutator_identity_generic_pair", r3, 1e-8))

    # equivariance
    ge = PhaseGrid(32, 48, 2, Lq=2 * np.pi, Lp=12.0, mode=FINITE_DIM)
    psi = gaussian_packet(ge, q0=0.3, kappa_q=1.5, sigma_p=0.5)
    psi = product_state(ge, psi, spinor(ge, [0.8, 0.6j]))
    Qe = ge.q[:, None, None, None]
    Pe = (2 * np.pi * ge.p / ge.Lp)[None, :, None, None]
    A = MatrixHamiltonian(ge, params,
                          (np.sin(Qe) * PAULI_Z + 0.3 * np.cos(Pe) * PAULI_X)
                          * np.ones((32, 48, 1, 1)), kinetic=False)
    th = 0.4
    U = np.array([[np.cos(th), np.sin(th)], [-np.sin(th), np.cos(th)]], dtype=complex)
    rq = liouvillian_equivariance_residual(PointTransform(unitary=U), A, psi)
    report.append(_entry("liouvillian_equivariance_quantum", rq, 1e-12))
    rc = liouvillian_equivariance_residual(PointTransform(cells_q=1), A, psi)
    report.append(_entry("liouvillian_equivariance_q_shift", rc, 1e-8))
    rp = liouvillian_equivariance_residual(PointTransform(cells_p=4), A, psi)
    report.append(_entry("liouvillian_equivariance_p_shift", rp, 1e-8))
    dq = density_equivariance_residual(PointTransform(unitary=U), psi, ge, 1.0)
    report.append(_entry("density_equivariance_quantum", dq, 1e-12))
    dc = density_equivariance_residual(PointTransform(cells_q=1), psi, ge, 1.0)
    report.append(_entry("density_equivariance_q_shift", dc, 1e-8))

    # Hermiticity of the materialized generator (tiny grid)
    Ht = build_hamiltonian("pendulum_bilinear", gt, params)
    L = materialize_liouvillian(Ht)
    report.append(_entry("liouvillian_hermiticity", float(np.max(np.abs(L - L.conj().T))), 1e-10))
    ev = np.linalg.eigvals(L)
    report.append(_entry("liouvillian_real_spectrum", float(np.max(np.abs(ev.imag))), 1e-9))

    # closure one-form identity
    cfg = scenario_config("canonical_closure")
    cfg.grid.nq = cfg.grid.np = 32
    gc = build_grid(cfg)
    Hc = build_hamiltonian("analytic_alpha", gc, params)
    sc = build_closure_initial(cfg, gc)
    report.append(_entry("closure_one_form_identity",
                         aux_one_form_identity_residual(Hc, sc), 1e-10))
    return report


def suite_convergence() -> list:
    report = []
    cfg = scenario_config("tiny_oracle")
    grid = build_grid(cfg)
    params = build_params(cfg)
    H = build_hamiltonian(cfg.model.potential, grid, params)
    psi0 = build_initial_state(cfg, grid, params)
    errs = []
    for dt, steps in ((8e-3, 50), (4e-3, 100), (2e-3, 200)):
        st = evolve(H, psi0, dt, steps, check_dt=False)
        ref = dense_exponential_oracle(H, psi0, steps * dt)
        errs.append(float(np.max(np.abs(st.psi - ref))))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    measured = float(np.mean(orders))
    report.append({"name": "rk4_order", "value": measured, "tolerance": 0.2,
                   "passed": bool(abs(measured - 4.0) <= 0.2)})
    report.append(_entry("rk4_error_dt_8e-3", errs[0], 1e-8))

    # stencil residuals of the hydrodynamic equations shrink ~4x per halving
    # (the grid must resolve the state so the dt term dominates)
    from .madelung import madelung_residuals
    ccfg = scenario_config("viz_demo")
    ccfg.run.loops = False
    ccfg.run.snapshot_every = 0
    ccfg.grid.np = 48
    ccfg.grid.nx = 32
    gridc = build_grid(ccfg)
    paramsc = build_params(ccfg)
    Hc = build_hamiltonian(ccfg.model.potential, gridc, paramsc)
    psi0c = build_initial_state(ccfg, gridc, paramsc)
    res = []
    for dt, steps in ((1.6e-3, 64), (8e-4, 128)):
        tail = []

        def keep(state, tail=tail, steps=steps):
            if state.step >= steps - 2:
                tail.append(state.psi.copy())

        evolve(Hc, psi0c, dt, steps, observers=(keep,))
        rs, rd, _, _ = madelung_residuals(Hc, tail[0], tail[1], tail[2], dt)
        res.append((rs, rd))
    ratio_s = res[0][0] / max(res[1][0], 1e-300)
    ratio_d = res[0][1] / max(res[1][1], 1e-300)
    report.append({"name": "madelung_r_S_halving_ratio", "value": float(ratio_s),
                   "tolerance": 1.5, "passed": bool(abs(ratio_s - 4.0) <= 1.5)})
    report.append({"name": "madelung_r_D_halving_ratio", "value": float(ratio_d),
                   "tolerance": 1.5, "passed": bool(abs(ratio_d - 4.0) <= 1.5)})
    return report


def suite_closure() -> list:
    report = []
    cfg = scenario_config("canonical_closure")
    cfg.grid.nq = cfg.grid.np = 48
    cfg.run.steps = 400
    grid = build_grid(cfg)
    params = build_params(cfg)
    H = build_hamiltonian(cfg.model.potential, grid, params)
    s0 = build_closure_initial(cfg, grid)
    e0 = closure_energy(H, s0)
    s = s0.copy()
    for _ in range(cfg.run.steps):
        s = closure_step(H, s, cfg.run.dt)
    mon = closure_monitors(H, s)
    report.append(_entry("closure_mass_drift", abs(mon["mass"] - 1.0), 1e-9))
    report.append(_entry("closure_trace_deviation", mon["min_trace_dev"], 1e-8))
    report.append({"name": "closure_min_rho_eig", "value": mon["min_rho_eig"],
                   "tolerance": -1e-8, "passed": bool(mon["min_rho_eig"] >= -1e-8)})
    report.append(_entry("closure_energy_drift",
                         abs(mon["closure_energy"] - e0) / abs(e0), 1e-6))

    sg = s0.copy()
    for _ in range(200):
        sg = closure_step(H, sg, cfg.run.dt, general=True)
    sr = s0.copy()
    for _ in range(200):
        sr = closure_step(H, sr, cfg.run.dt, general=False)
    report.append(_entry("closure_u_invariant_manifold", float(np.max(np.abs(sg.w))), 1e-9))
    dev = max(float(np.max(np.abs(sg.D - sr.D))), float(np.max(np.abs(sg.rho - sr.rho))))
    report.append(_entry("closure_general_vs_reduced", dev, 1e-9))
    return report


SUITES = {"identities": suite_identities, "convergence": suite_convergence,
          "closure": suite_closure}


def run_suite(name: str) -> list:
    if name not in SUITES:
        raise SuiteError(f"unknown suite {name!r}; available: {', '.join(SUITES)}")
    return SUITES[name]()
