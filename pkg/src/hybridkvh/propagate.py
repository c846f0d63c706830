"""Time integration of the hybrid wave equation i hbar d/dt psi = L psi.

Classical RK4 on the full complex state, with a conservative step-size
guard from spectral-radius bounds of the generator's pieces, and a dense
matrix-exponential oracle for small grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .grid import CONTINUUM, PhaseGrid
from .liouvillian import (MAX_DENSE_DIM, DimensionError, apply_liouvillian,
                          materialize_liouvillian, state_inner, state_norm2)
from .model import MatrixHamiltonian, SeparableHamiltonian


class PropagationError(RuntimeError):
    """Non-finite state detected; carries the last diagnostics row."""


def rhs(H, psi: np.ndarray) -> np.ndarray:
    """d psi / dt = -(i/hbar) L psi."""
    return (-1j / H.params.hbar) * apply_liouvillian(H, psi)


def total_energy(H, psi: np.ndarray) -> complex:
    """<psi | L psi>; the imaginary part is a Hermiticity witness and
    stays at rounding level for states that decay at the p-boundary."""
    return state_inner(H.grid, psi, apply_liouvillian(H, psi))


def generator_radius_bound(H) -> float:
    """Upper estimate of the spectral radius of (1/hbar) L on the grid:
    the sum of transport, multiplication, and x-Laplacian bounds."""
    g = H.grid
    hbar = H.params.hbar
    kq = float(np.max(np.abs(g.wavenumbers("q"))))
    kp = float(np.max(np.abs(g.wavenumbers("p"))))
    pmax = float(np.max(np.abs(g.p)))
    if isinstance(H, SeparableHamiltonian):
        xq = H.params.inv_M * pmax
        xp = float(np.max(np.abs(H.dVdq())))
        mult = float(np.max(np.abs(H.interaction_lagrangian()))) / hbar
        r = xq * kq + xp * kp + mult
        if H.params.inv_m:
            kx = float(np.max(np.abs(g.wavenumbers("x", zero_nyquist=False))))
            r += 0.5 * hbar * H.params.inv_m * kx**2
        return r
    if isinstance(H, MatrixHamiltonian):
        n = H.nlevels
        xq = H.params.inv_M * pmax + n * float(np.max(np.abs(H._dWdp)))
        xp = n * float(np.max(np.abs(H._dWdq)))
        mult = n * float(np.max(np.abs(H.lagrangian_symbol()))) / hbar
        return xq * kq + xp * kp + mult
    raise TypeError(type(H))


def max_stable_dt(H, safety: float = 0.5) -> float:
    return safety / generator_radius_bound(H)


def rk4_step(H, psi: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(H, psi)
    k2 = rhs(H, psi + 0.5 * dt * k1)
    k3 = rhs(H, psi + 0.5 * dt * k2)
    k4 = rhs(H, psi + dt * k3)
    return psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class RunState:
    psi: np.ndarray
    t: float = 0.0
    step: int = 0
    dt: float = 1e-3
    diagnostics: list = field(default_factory=list)


def evolve(H, psi0: np.ndarray, dt: float, steps: int,
           observers: tuple = (), check_dt: bool = True,
           finite_check_every: int = 50) -> RunState:
    """Fixed-step RK4 evolution.

    observers: callables ``obs(state: RunState)`` invoked after the
    initial state and after every step; they may append diagnostics or
    stream snapshots but must not mutate the state.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if check_dt:
        cap = max_stable_dt(H)
        if dt > cap:
            raise ValueError(f"dt={dt} exceeds stability guard {cap:.3e}")
    state = RunState(psi=np.array(psi0, dtype=complex), dt=dt)
    for obs in observers:
        obs(state)
    for _ in range(steps):
        state.psi = rk4_step(H, state.psi, dt)
        state.step += 1
        state.t = state.step * dt
        if state.step % finite_check_every == 0 or state.step == steps:
            if not np.all(np.isfinite(state.psi.view(float))):
                raise PropagationError(
                    f"non-finite state at step {state.step} (t={state.t:.6g}); "
                    f"last diagnostics: {state.diagnostics[-1] if state.diagnostics else None}")
        for obs in observers:
            obs(state)
    return state


def dense_exponential_oracle(H, psi0: np.ndarray, t: float) -> np.ndarray:
    """psi(t) = expm(-i t L / hbar) psi0 on a small grid; the ground
    truth against which the RK4 path is verified."""
    g = H.grid
    dim = int(np.prod(g.state_shape))
    if dim > MAX_DENSE_DIM:
        raise DimensionError(f"dense dimension {dim} exceeds cap {MAX_DENSE_DIM}")
    L = materialize_liouvillian(H)
    U = expm((-1j * t / H.params.hbar) * L)
    return (U @ np.asarray(psi0, dtype=complex).reshape(-1)).reshape(g.state_shape)


def product_second_singular_value(grid: PhaseGrid, psi: np.ndarray) -> float:
    """Second singular value of the (phase-space) x (quantum) unfolding;
    zero iff the state factorizes as Psi(z) psi_quantum."""
    mat = psi.reshape(grid.nq * grid.np_, grid.nx)
    s = np.linalg.svd(mat, compute_uv=False)
    return float(s[1]) * np.sqrt(grid.cell_volume) if s.size > 1 else 0.0
