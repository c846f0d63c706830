"""Scenario orchestration: builders from a parsed configuration, the
built-in scenario registry, and the artifact-writing run driver.

Artifacts per run directory:

    diagnostics.csv          wave runs; fixed column order, 17 significant
                             digits, byte-reproducible across reruns
    closure_diagnostics.csv  closure runs
    state_NNNNNN.hkvh        wavefunction snapshots on the schedule
    rho_c_NNNNNN.hkvh        classical-density snapshots (real field)
    dist_NNNNNN.hkvh         joint-distribution snapshots (real field)
    loops.csv                circulation-loop diagnostics (continuum runs)
    trajectories.csv         loop-point dumps: t, id, q, p, x
    manifest.json            config echo, package version, wall time
"""

from __future__ import annotations

import json
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .closure import (ClosureState, closure_dt_cap, closure_monitors,
                      closure_step, make_closure_state)
from .config import ConfigError, ScenarioConfig, parse_config, serialize_config
from .densities import density_summary, defining_identity_residual, joint_distribution
from .grid import CONTINUUM, FINITE_DIM, PhaseGrid
from .liouvillian import state_norm2
from .madelung import (TrajectoryAdvector, TrajectoryEnsemble, circle_loop,
                       continuity_residual, loop_integral_dxV, loop_integral_p_dq,
                       madelung_residuals)
from .model import (MatrixHamiltonian, ModelParams, PAULI_X, PAULI_Y, PAULI_Z,
                    build_hamiltonian)
from .propagate import PropagationError, evolve, rhs, total_energy
from .snapshots import write_snapshot
from .states import (gaussian_packet, normalize, positive_packet, product_state,
                     spinor, x_wavepacket)


def build_grid(cfg: ScenarioConfig) -> PhaseGrid:
    g = cfg.grid
    nx = g.nx if g.mode == CONTINUUM else g.n_levels
    return PhaseGrid(g.nq, g.np, nx, Lq=g.lq, Lp=g.lp, Lx=g.lx, mode=g.mode)


def build_params(cfg: ScenarioConfig) -> ModelParams:
    m = cfg.model
    return ModelParams(hbar=m.hbar, m=m.m, M=m.M, lam=m.lam)


def build_model(cfg: ScenarioConfig, grid: PhaseGrid, params: ModelParams):
    return build_hamiltonian(cfg.model.potential, grid, params)


def _parse_spinor(text: str, n: int) -> np.ndarray:
    try:
        parts = [complex(tok.replace("i", "j")) for tok in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse spinor {text!r}: {exc}") from None
    if len(parts) != n:
        raise ConfigError(f"spinor {text!r} has {len(parts)} components, grid has {n} levels")
    return np.asarray(parts, dtype=complex)


def build_initial_state(cfg: ScenarioConfig, grid: PhaseGrid, params: ModelParams) -> np.ndarray:
    ini = cfg.initial
    if ini.type == "positive_packet":
        Psi = positive_packet(grid, hbar=params.hbar, q0=ini.q0, p0=ini.p0,
                              sigma_p=ini.sigma_p, mode_sigma=ini.mode_sigma)
    elif ini.type == "plane_wave_product":
        Psi = gaussian_packet(grid, q0=ini.q0, p0=ini.p0, kappa_q=ini.kappa_q,
                              sigma_p=ini.sigma_p, mode_q=ini.mode_q, mode_p=ini.mode_p)
    else:
        Psi = gaussian_packet(grid, q0=ini.q0, p0=ini.p0, kappa_q=ini.kappa_q,
                              sigma_p=ini.sigma_p, mode_q=ini.mode_q, mode_p=ini.mode_p)
    if grid.mode == FINITE_DIM:
        quantum = spinor(grid, _parse_spinor(ini.spinor, grid.nx))
    elif ini.type == "plane_wave_product":
        x = grid.x
        quantum = np.exp(1j * (ini.mode_x * 2 * np.pi / grid.Lx) * x).astype(complex)
        quantum /= np.sqrt((np.abs(quantum) ** 2).sum() * grid.hx)
    else:
        quantum = x_wavepacket(grid, kappa_x=ini.kappa_x, x0=ini.x0, mode_x=ini.mode_x)
    return product_state(grid, Psi, quantum)


def build_closure_initial(cfg: ScenarioConfig, grid: PhaseGrid) -> ClosureState:
    if grid.nx != 2:
        raise ConfigError("built-in closure initial data is a two-level model")
    ini = cfg.initial
    q = grid.q[:, None]
    p = grid.p[None, :]
    D = np.exp(ini.kappa_q * (np.cos(q - ini.q0) - 1.0)) * np.exp(
        -((p - ini.p0) ** 2) / (2.0 * ini.sigma_p**2))
    D /= D.sum() * grid.hq * grid.hp
    pt = 2 * np.pi * p / grid.Lp
    # the Bloch deviation decays at the p-seam: the q-advection rate p is
    # discontinuous there, and any non-decaying structure it shears
    # develops a seam jump whose Gibbs tail pollutes the p-spectrum
    win = np.exp(-(p**2) / (2.0 * (1.5 * ini.sigma_p) ** 2))
    amp = ini.bloch_amp / np.sqrt(2.0)
    rx = amp * np.sin(q) * win
    ry = amp * np.cos(pt) * win
    rho = 0.5 * (np.eye(2) + rx[..., None, None] * PAULI_X
                 + ry[..., None, None] * PAULI_Y)
    w = None
    if ini.w_amp:
        w = np.zeros((grid.nq, grid.np_, 2))
        w[..., 0] = ini.w_amp * np.sin(q) * np.cos(pt) * win
        w[..., 1] = ini.w_amp * np.cos(q) * np.sin(pt) * win
    return make_closure_state(grid, D, rho, w)


# -- CSV helpers -----------------------------------------------------------

WAVE_COLUMNS = ["t", "norm", "energy_re", "energy_im", "trace_D", "rho_c_min",
                "rho_q_min_eig", "boundary_mass_p"]
CLOSURE_COLUMNS = ["t", "mass", "closure_energy", "min_trace_dev", "min_rho_eig"]
LOOP_COLUMNS = ["t", "loop_integral", "lhs_rate", "rhs_rate"]


def _fmt_float(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt_float(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


# -- built-in scenarios ----------------------------------------------------

_SCENARIOS = {
    "canonical_wave": (
        "finite-dim reference run: 64x64 phase grid, two levels, pendulum pair "
        "with bilinear coupling, 2000 RK4 steps",
        """
[grid]
mode = finite_dim
nq = 64
np = 64
n_levels = 2
lq = 6.283185307179586
lp = 12.566370614359172

[model]
hbar = 1.0
m = 1.0
M = 1.0
lambda = 0.1
potential = pendulum_bilinear

[initial]
type = gaussian_product
q0 = 0.8
kappa_q = 2.0
sigma_p = 0.7
spinor = 1,0

[run]
kind = wave
dt = 0.001
steps = 2000
diag_every = 1
snapshot_every = 500
""",
    ),
    "canonical_continuum": (
        "continuum reference run: 64x128x32 hybrid grid, pendulum pair, loop "
        "and trajectory diagnostics enabled",
        """
[grid]
mode = continuum
nq = 64
np = 128
nx = 32
lq = 6.283185307179586
lp = 12.566370614359172
lx = 6.283185307179586

[model]
hbar = 1.0
m = 1.0
M = 1.0
lambda = 0.1
potential = pendulum_bilinear

[initial]
type = gaussian_product
q0 = 0.5
kappa_q = 1.5
sigma_p = 0.8
kappa_x = 2.0
mode_x = 1

[run]
kind = wave
dt = 0.0006
steps = 3334
diag_every = 20
snapshot_every = 1667
loops = true
loop_points = 256
loop_center_q = 0.5
loop_r_q = 0.4
loop_r_p = 0.4
loop_r_x = 0.4
traj_dump_every = 1000
""",
    ),
    "tiny_oracle": (
        "8x8 two-level grid against the dense matrix-exponential oracle",
        """
[grid]
mode = finite_dim
nq = 8
np = 8
n_levels = 2
lq = 6.283185307179586
lp = 6.283185307179586

[model]
hbar = 1.0
m = 1.0
M = 1.0
lambda = 0.1
potential = pendulum_bilinear

[initial]
type = gaussian_product
kappa_q = 1.5
sigma_p = 0.5
spinor = 0.8,0.6

[run]
kind = wave
dt = 0.008
steps = 100
diag_every = 1
""",
    ),
    "positivity_alpha": (
        "classical-density sign monitor under the commuting-coupling model",
        """
[grid]
mode = finite_dim
nq = 128
np = 192
n_levels = 2
lq = 6.283185307179586
lp = 16.0

[model]
hbar = 1.0
m = 1.0
M = 1.0
lambda = 0.1
potential = analytic_alpha

[initial]
type = positive_packet
sigma_p = 1.0
mode_sigma = 2.0
spinor = 1,0

[run]
kind = wave
dt = 0.0005
steps = 4000
diag_every = 10
""",
    ),
    "canonical_closure": (
        "closure-model reference run: transported density and matrix field "
        "with conservation monitors",
        """
[grid]
mode = finite_dim
nq = 64
np = 64
n_levels = 2
lq = 6.283185307179586
lp = 12.566370614359172

[model]
hbar = 1.0
m = 1.0
M = 1.0
lambda = 0.1
potential = analytic_alpha

[initial]
type = closure_default
kappa_q = 2.0
sigma_p = 0.8
bloch_amp = 0.4

[run]
kind = closure
dt = 0.001
steps = 2000
diag_every = 1
""",
    ),
    "viz_demo": (
        "short continuum run producing every artifact kind for the plotting "
        "pipeline",
        """
[grid]
mode = continuum
nq = 32
np = 32
nx = 16
lq = 6.283185307179586
lp = 12.566370614359172
lx = 6.283185307179586

[model]
hbar = 1.0
m = 1.0
M = 1.0
lambda = 0.1
potential = pendulum_bilinear

[initial]
type = gaussian_product
q0 = 0.8
kappa_q = 2.0
sigma_p = 0.7
kappa_x = 2.0
mode_x = 1

[run]
kind = wave
dt = 0.001
steps = 200
diag_every = 1
snapshot_every = 100
loops = true
loop_points = 128
loop_center_q = 0.8
loop_r_q = 0.4
loop_r_p = 0.4
loop_r_x = 0.4
traj_dump_every = 100
""",
    ),
}


def list_scenarios():
    return [(name, desc) for name, (desc, _) in _SCENARIOS.items()]


def scenario_text(name: str) -> str:
    if name not in _SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; available: "
                          f"{', '.join(_SCENARIOS)}")
    return _SCENARIOS[name][1].strip() + "\n"


def scenario_config(name: str) -> ScenarioConfig:
    return parse_config(scenario_text(name))


# -- run driver ------------------------------------------------------------

class _LoopObserver:
    """Advances a circulation loop one step behind the wave state and
    records the loop integral plus both sides of its rate identity."""

    def __init__(self, H, run_cfg, node_threshold):
        self.H = H
        self.cfg = run_cfg
        self.adv = TrajectoryAdvector(H, dVdq_fn=getattr(H, "dVdq_fn", None),
                                      node_threshold=node_threshold)
        self.ens = TrajectoryEnsemble(circle_loop(
            run_cfg.loop_points,
            (run_cfg.loop_center_q, run_cfg.loop_center_p, run_cfg.loop_center_x),
            (run_cfg.loop_r_q, run_cfg.loop_r_p, run_cfg.loop_r_x)))
        self.prev_sampler = None
        self.integrals = []          # (t, I, rhs)
        self.traj_rows = []          # (t, id, q, p, x)

    def __call__(self, state):
        sampler = self.adv.vx_sampler(state.psi)
        if self.prev_sampler is not None:
            self.adv.step(self.ens, self.prev_sampler, sampler, state.dt)
        self.prev_sampler = sampler
        I = loop_integral_p_dq(self.ens.points)
        R = loop_integral_dxV(self.ens.points, self.H.dVdx_fn)
        self.integrals.append((state.t, I, R))
        if self.cfg.traj_dump_every and state.step % self.cfg.traj_dump_every == 0:
            for j, (q, p, x) in enumerate(self.ens.wrapped(self.adv.grid)):
                self.traj_rows.append((state.t, float(j), q, p, x))

    def rows(self):
        # centered time-differences of the loop integral: fourth-order
        # five-point stencil in the interior so the rate stays accurate
        # where the right-hand side passes through zero
        out = []
        vals = self.integrals
        n = len(vals)
        for k, (t, I, R) in enumerate(vals):
            if 2 <= k < n - 2:
                dt = vals[k + 1][0] - vals[k][0]
                lhs = (-vals[k + 2][1] + 8 * vals[k + 1][1]
                       - 8 * vals[k - 1][1] + vals[k - 2][1]) / (12 * dt)
            elif 0 < k < n - 1:
                lhs = (vals[k + 1][1] - vals[k - 1][1]) / (vals[k + 1][0] - vals[k - 1][0])
            else:
                lhs = float("nan")
            out.append((t, I, lhs, R))
        return out


def run_scenario(cfg: ScenarioConfig, outdir) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    grid = build_grid(cfg)
    params = build_params(cfg)
    summary = {"kind": cfg.run.kind, "status": "ok"}
    try:
        if cfg.run.kind == "closure":
            _run_closure(cfg, grid, params, outdir, summary)
        else:
            _run_wave(cfg, grid, params, outdir, summary)
    finally:
        manifest = {
            "format": "hybridkvh-run-manifest",
            "version": __version__,
            "config": serialize_config(cfg),
            "wall_time_s": time.perf_counter() - t_start,
            "status": summary.get("status", "failed"),
        }
        (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return summary


def _pairing_observable(grid: PhaseGrid, params: ModelParams) -> MatrixHamiltonian:
    q = grid.q[:, None, None, None]
    pt = (2 * np.pi * grid.p / grid.Lp)[None, :, None, None]
    n = grid.nx
    if n == 2:
        W = np.sin(q) * PAULI_Z + 0.5 * np.cos(pt) * PAULI_X
    else:
        W = (np.sin(q) + 0.5 * np.cos(pt)) * np.eye(n)
    W = np.broadcast_to(W, (grid.nq, grid.np_, n, n)).copy()
    return MatrixHamiltonian(grid, params, W, kinetic=False)


def _run_wave(cfg, grid, params, outdir, summary):
    H = build_model(cfg, grid, params)
    psi0 = build_initial_state(cfg, grid, params)
    run = cfg.run
    columns = list(WAVE_COLUMNS)
    pairing_obs = None
    if run.pairing_residual:
        if grid.mode != FINITE_DIM:
            raise ConfigError("pairing_residual diagnostics require finite_dim mode")
        pairing_obs = _pairing_observable(grid, params)
        columns.append("pairing_residual")

    rows = []
    snap_paths = []
    window = []  # trailing states for the stencil residuals
    warned = []

    def diag(state):
        if state.step % run.diag_every and state.step != run.steps:
            return
        psi = state.psi
        e = total_energy(H, psi)
        dens = density_summary(psi, grid, params.hbar)
        bfield = (np.abs(psi) ** 2).sum(axis=-1) if grid.mode == FINITE_DIM \
            else grid.integrate_x((np.abs(psi) ** 2))
        bmass = grid.boundary_mass(bfield)
        if bmass > run.boundary_mass_threshold and not warned:
            warned.append(state.step)
            warnings.warn(
                f"boundary mass {bmass:.3e} exceeds threshold "
                f"{run.boundary_mass_threshold:.1e} at t={state.t:.4g}: the state "
                f"no longer decays at the p-edge and the pointwise-p treatment "
                f"is unreliable", RuntimeWarning, stacklevel=2)
        row = [state.t, state_norm2(grid, psi), e.real, e.imag, dens["trace_D"],
               dens["rho_c_min"], dens["rho_q_min_eig"], bmass]
        if pairing_obs is not None:
            row.append(defining_identity_residual(pairing_obs, psi))
        rows.append(row)

    def snaps(state):
        if run.snapshot_every and (state.step % run.snapshot_every == 0
                                   or state.step == run.steps):
            tag = f"{state.step:06d}"
            mode_code = 0 if grid.mode == CONTINUUM else 1
            if "snapshots" in cfg.output.formats:
                p1 = outdir / f"state_{tag}.hkvh"
                write_snapshot(p1, state.psi, mode_code)
                dist = joint_distribution(state.psi, grid, params.hbar)
                p2 = outdir / f"dist_{tag}.hkvh"
                write_snapshot(p2, dist, mode_code)
                p3 = outdir / f"rho_c_{tag}.hkvh"
                write_snapshot(p3, grid.integrate_x(dist), mode_code)
                snap_paths.extend([str(p1), str(p2), str(p3)])

    def tail(state):
        if grid.mode == CONTINUUM and state.step >= run.steps - 2:
            window.append(state.psi.copy())

    observers = [diag, snaps, tail]
    loop_obs = None
    if run.loops:
        loop_obs = _LoopObserver(H, run, run.node_threshold)
        observers.append(loop_obs)

    try:
        state = evolve(H, psi0, run.dt, run.steps, observers=tuple(observers))
    except PropagationError as exc:
        summary["status"] = "failed"
        summary["error"] = str(exc)
        raise
    finally:
        _write_csv(outdir / "diagnostics.csv", columns, rows)
        if loop_obs is not None:
            _write_csv(outdir / "loops.csv", LOOP_COLUMNS, loop_obs.rows())
            _write_csv(outdir / "trajectories.csv", ["t", "id", "q", "p", "x"],
                       loop_obs.traj_rows)

    summary["rows"] = len(rows)
    summary["final"] = dict(zip(columns, rows[-1]))
    summary["snapshots"] = snap_paths
    if grid.mode == CONTINUUM and len(window) == 3:
        rs, rd, _, _ = madelung_residuals(H, window[0], window[1], window[2],
                                          run.dt, run.node_threshold)
        d_prev = joint_distribution(window[0], grid, params.hbar)
        d_mid = joint_distribution(window[1], grid, params.hbar)
        d_next = joint_distribution(window[2], grid, params.hbar)
        rc, _ = continuity_residual(H, d_prev, d_next, window[1], d_mid,
                                    run.dt, run.node_threshold)
        summary["madelung_r_S"] = rs
        summary["madelung_r_D"] = rd
        summary["continuity_residual"] = rc
    if loop_obs is not None:
        summary["loop_rows"] = loop_obs.rows()
    summary["state"] = state
    summary["grid"] = grid
    summary["hamiltonian"] = H
    return summary


def _run_closure(cfg, grid, params, outdir, summary):
    H = build_model(cfg, grid, params)
    if not isinstance(H, MatrixHamiltonian):
        raise ConfigError("closure runs need a finite_dim Hamiltonian")
    run = cfg.run
    s = build_closure_initial(cfg, grid)
    cap = closure_dt_cap(H)
    if run.dt > cap:
        raise ConfigError(f"dt={run.dt} exceeds closure stability guard {cap:.3e}")
    rows = []

    def record(state):
        mon = closure_monitors(H, state)
        rows.append([state.t] + [mon[c] for c in CLOSURE_COLUMNS[1:]])

    record(s)
    try:
        for k in range(run.steps):
            s = closure_step(H, s, run.dt, general=run.general)
            if (k + 1) % run.diag_every == 0 or k + 1 == run.steps:
                record(s)
    finally:
        _write_csv(outdir / "closure_diagnostics.csv", CLOSURE_COLUMNS, rows)
    summary["rows"] = len(rows)
    summary["final"] = dict(zip(CLOSURE_COLUMNS, rows[-1]))
    summary["state"] = s
    summary["grid"] = grid
    summary["hamiltonian"] = H
    return summary
