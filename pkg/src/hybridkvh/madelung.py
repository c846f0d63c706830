"""Density-phase (hydrodynamic) diagnostics of the hybrid wavefunction:
polar variables, the phase/density evolution residuals, hybrid currents
and the continuity defect, Lagrangian trajectories, and loop-rate
diagnostics for the circulation integral.

All derivative-of-phase quantities are computed from the gauge-invariant
combination hbar Im(conj(psi) d psi) / |psi|^2 rather than from the
unwrapped phase; time derivatives use centered stencils of two bracketing
snapshots, with the phase difference extracted as arg(psi_+ conj(psi_-)),
which is insensitive to winding as long as the per-step phase advance
stays under pi.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import CONTINUUM, GridError, PhaseGrid
from .model import SeparableHamiltonian


class MadelungError(ValueError):
    pass


@dataclass
class MadelungFields:
    D: np.ndarray           # |psi|^2
    S: np.ndarray           # hbar arg(psi), unwrapped along x, zeroed on the mask
    mask: np.ndarray        # True where D >= node threshold
    hbar: float


def polar_decompose(psi: np.ndarray, grid: PhaseGrid, hbar: float = 1.0,
                    node_threshold: float = 1e-10) -> MadelungFields:
    """Polar form psi = sqrt(D) exp(iS/hbar); S is unwrapped along the
    quantum axis per (q, p) line and set to zero below the node
    threshold (relative to max D)."""
    psi = np.asarray(psi, dtype=complex)
    D = (psi.conj() * psi).real
    dmax = float(D.max())
    if not dmax > 0.0:
        raise MadelungError("state is entirely below the node threshold")
    cut = node_threshold * dmax
    mask = D >= cut
    S = hbar * np.unwrap(np.angle(psi), axis=-1)
    S = np.where(mask, S, 0.0)
    return MadelungFields(D=D, S=S, mask=mask, hbar=hbar)


def reconstruct(fields: MadelungFields) -> np.ndarray:
    return np.sqrt(fields.D) * np.exp(1j * fields.S / fields.hbar)


def phase_gradient(psi: np.ndarray, grid: PhaseGrid, axis: str, hbar: float = 1.0,
                   node_threshold: float = 1e-10) -> np.ndarray:
    """d S / d axis = hbar Im(conj(psi) d psi) / |psi|^2, masked at nodes."""
    D = (psi.conj() * psi).real
    cut = node_threshold * float(D.max())
    out = hbar * (psi.conj() * grid.deriv(psi, axis)).imag
    return np.where(D >= cut, out / np.maximum(D, cut), 0.0)


def _quantum_potential(grid: PhaseGrid, D: np.ndarray, mask: np.ndarray,
                       hbar: float, inv_m: float) -> np.ndarray:
    """(hbar^2/2m) Lap_x sqrt(D) / sqrt(D), evaluated through the
    identity Lap sqrt(D)/sqrt(D) = Lap(D)/2D - |grad D|^2/4D^2 so the
    spectral derivatives only ever touch the smooth field D; sqrt(D)
    develops near-cusps at deep density minima whose direct transform
    would pollute the whole grid."""
    lap = grid.laplace_x(D)
    gx = grid.deriv(D, "x")
    Dsafe = np.where(mask, D, 1.0)
    qp = 0.5 * hbar**2 * inv_m * (0.5 * lap / Dsafe - 0.25 * gx**2 / Dsafe**2)
    return np.where(mask, qp, 0.0)


def _mask_rms(grid: PhaseGrid, r: np.ndarray, mask: np.ndarray) -> float:
    n = int(mask.sum())
    if n == 0:
        return 0.0
    return float(np.sqrt((np.where(mask, r, 0.0) ** 2).sum() / n))


def madelung_residuals(H: SeparableHamiltonian, psi_prev: np.ndarray,
                       psi_mid: np.ndarray, psi_next: np.ndarray, dt: float,
                       node_threshold: float = 1e-10):
    """Residuals of the phase and density evolution equations

        r_S = dS/dt + |grad_x S|^2 / 2m - QP - L_I - {H_I, S}
        r_D = dD/dt + (1/m) div_x(D grad_x S) - {H_I, D}

    from three consecutive snapshots; returns the masked-RMS pair and the
    residual fields.  Expected size is set by the O(dt^2) time stencil on
    resolved states.
    """
    g = H.grid
    hbar = H.params.hbar
    inv_m = H.params.inv_m
    D = (psi_mid.conj() * psi_mid).real
    cut = node_threshold * float(D.max())
    mask = D >= cut

    dtD = ((psi_next.conj() * psi_next).real - (psi_prev.conj() * psi_prev).real) / (2 * dt)
    dtS = hbar * np.angle(psi_next * psi_prev.conj()) / (2 * dt)

    Sx = phase_gradient(psi_mid, g, "x", hbar, node_threshold)
    Sq = phase_gradient(psi_mid, g, "q", hbar, node_threshold)
    Sp = phase_gradient(psi_mid, g, "p", hbar, node_threshold)
    qp = _quantum_potential(g, D, mask, hbar, inv_m)
    pM = H.params.inv_M * g.p_bc(3)
    LI = H.interaction_lagrangian()
    dVdq = H.dVdq()

    r_S = dtS + 0.5 * inv_m * Sx**2 - qp - LI - (dVdq * Sp - pM * Sq)
    flux = hbar * (psi_mid.conj() * g.deriv(psi_mid, "x")).imag  # D grad_x S
    r_D = dtD + inv_m * g.deriv(flux, "x") - (dVdq * g.deriv(D, "p") - pM * g.deriv(D, "q"))
    r_S = np.where(mask, r_S, 0.0)
    r_D = np.where(mask, r_D, 0.0)
    return _mask_rms(g, r_S, mask), _mask_rms(g, r_D, mask), r_S, r_D


def velocity_field(H: SeparableHamiltonian, psi: np.ndarray,
                   node_threshold: float = 1e-10):
    """Hybrid velocity (X_q, X_p, X_x) = (p/M, -dV/dq, grad_x S / m)."""
    g = H.grid
    xq = np.broadcast_to(H.params.inv_M * g.p_bc(3), g.field_shape)
    xp = np.broadcast_to(-H.dVdq(), g.field_shape)
    vx = H.params.inv_m * phase_gradient(psi, g, "x", H.params.hbar, node_threshold)
    return xq, xp, vx


def hybrid_lagrangian(H: SeparableHamiltonian, psi: np.ndarray,
                      node_threshold: float = 1e-10) -> np.ndarray:
    """L_I + |grad_x S|^2/2m + QP, the scalar transported along
    trajectories by the phase evolution."""
    g = H.grid
    D = (psi.conj() * psi).real
    mask = D >= node_threshold * float(D.max())
    Sx = phase_gradient(psi, g, "x", H.params.hbar, node_threshold)
    qp = _quantum_potential(g, D, mask, H.params.hbar, H.params.inv_m)
    return H.interaction_lagrangian() + 0.5 * H.params.inv_m * Sx**2 + qp


def hybrid_currents(H: SeparableHamiltonian, psi: np.ndarray, dist: np.ndarray,
                    node_threshold: float = 1e-10):
    """Classical and quantum current components (J_C^q, J_C^p, J_Q).

    J_C = dist * X_{H_I}; J_Q collects the quantum flux, its p-weighted
    divergence companion, the phase-transport bracket, and the
    quantum-potential-like correction -(hbar^2/4m) {D, grad_x D}/D.
    """
    g = H.grid
    hbar = H.params.hbar
    inv_m = H.params.inv_m
    D = (psi.conj() * psi).real
    cut = node_threshold * float(D.max())
    mask = D >= cut

    pM = H.params.inv_M * g.p_bc(3)
    jc_q = dist * pM
    jc_p = -dist * H.dVdq()

    F = hbar * (psi.conj() * g.deriv(psi, "x")).imag  # D grad_x S
    Sq = phase_gradient(psi, g, "q", hbar, node_threshold)
    Sp = phase_gradient(psi, g, "p", hbar, node_threshold)
    div_pF = g.deriv(g.p_bc(3) * F, "p")
    bracket_FS = g.deriv(F, "q") * Sp - g.deriv(F, "p") * Sq
    Dx = g.deriv(D, "x")
    bracket_DDx = g.deriv(D, "q") * g.deriv(Dx, "p") - g.deriv(D, "p") * g.deriv(Dx, "q")
    corr = np.where(mask, bracket_DDx / np.maximum(D, cut), 0.0)
    jq = inv_m * (F + div_pF + bracket_FS) - 0.25 * hbar**2 * inv_m * corr
    return jc_q, jc_p, jq


def continuity_residual(H: SeparableHamiltonian, dist_prev: np.ndarray,
                        dist_next: np.ndarray, psi_mid: np.ndarray,
                        dist_mid: np.ndarray, dt: float,
                        node_threshold: float = 1e-10):
    """Masked RMS of d(dist)/dt + div_z J_C + div_x J_Q at the middle
    snapshot.

    The x-divergence of the quantum current is expanded term by term so
    every spectral derivative acts on a globally smooth gauge-invariant
    field, with divisions by the density applied pointwise afterwards;
    differentiating the assembled (masked, near-node-singular) current
    would leak Gibbs oscillations into the bulk.
    """
    g = H.grid
    hbar = H.params.hbar
    inv_m = H.params.inv_m
    D = (psi_mid.conj() * psi_mid).real
    cut = node_threshold * float(D.max())
    mask = D >= cut
    Dsafe = np.where(mask, D, 1.0)

    pM = H.params.inv_M * g.p_bc(3)
    dtdist = (dist_next - dist_prev) / (2 * dt)
    r = dtdist + g.deriv(dist_mid * pM, "q") + g.deriv(-dist_mid * H.dVdq(), "p")

    F = hbar * (psi_mid.conj() * g.deriv(psi_mid, "x")).imag  # D grad_x S
    Fx = g.deriv(F, "x")
    r += inv_m * (Fx + g.deriv(g.p_bc(3) * Fx, "p"))
    # d_x of {F, S} = (d_x B)/D - B (d_x D)/D^2 with B = dF_q G_p - dF_p G_q
    Gq = hbar * (psi_mid.conj() * g.deriv(psi_mid, "q")).imag
    Gp = hbar * (psi_mid.conj() * g.deriv(psi_mid, "p")).imag
    B = g.deriv(F, "q") * Gp - g.deriv(F, "p") * Gq
    Dx = g.deriv(D, "x")
    r += inv_m * np.where(mask, (g.deriv(B, "x") - B * Dx / Dsafe) / Dsafe, 0.0)
    # d_x of {D, grad_x D}/D likewise
    Dxx = g.deriv(Dx, "x")
    C = g.deriv(D, "q") * g.deriv(Dx, "p") - g.deriv(D, "p") * g.deriv(Dx, "q")
    Cx = (g.deriv(Dx, "q") * g.deriv(Dx, "p") + g.deriv(D, "q") * g.deriv(Dxx, "p")
          - g.deriv(Dx, "p") * g.deriv(Dx, "q") - g.deriv(D, "p") * g.deriv(Dxx, "q"))
    r += -0.25 * hbar**2 * inv_m * np.where(mask, (Cx - C * Dx / Dsafe) / Dsafe, 0.0)
    r = np.where(mask, r, 0.0)
    return _mask_rms(g, r, mask), r


# -- Lagrangian trajectories ---------------------------------------------


def _fractional_coords(grid: PhaseGrid, pts: np.ndarray) -> np.ndarray:
    out = np.empty((3, pts.shape[0]))
    out[0] = (pts[:, 0] + 0.5 * grid.Lq) / grid.hq
    out[1] = (pts[:, 1] + 0.5 * grid.Lp) / grid.hp
    out[2] = (pts[:, 2] + 0.5 * grid.Lx) / grid.hx
    return out


class FieldSampler:
    """Quintic spline sampler of a periodic grid field at arbitrary
    points (coordinates wrap)."""

    def __init__(self, grid: PhaseGrid, field_arr: np.ndarray, order: int = 5):
        if grid.mode != CONTINUUM:
            raise GridError("trajectory sampling requires continuum mode")
        self.grid = grid
        self.order = order
        self._real = ndimage.spline_filter(np.ascontiguousarray(field_arr.real),
                                           order=order, mode="grid-wrap")
        self._imag = None
        if np.iscomplexobj(field_arr):
            self._imag = ndimage.spline_filter(np.ascontiguousarray(field_arr.imag),
                                               order=order, mode="grid-wrap")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        coords = _fractional_coords(self.grid, pts)
        re = ndimage.map_coordinates(self._real, coords, order=self.order,
                                     mode="grid-wrap", prefilter=False)
        if self._imag is None:
            return re
        im = ndimage.map_coordinates(self._imag, coords, order=self.order,
                                     mode="grid-wrap", prefilter=False)
        return re + 1j * im


@dataclass
class TrajectoryEnsemble:
    """Hybrid-space trajectories advanced through streamed velocity
    snapshots.  Positions are stored unwrapped; `wrapped()` maps back
    into the periodic box.  Points that enter the node-masked region are
    flagged and frozen."""

    points: np.ndarray            # (n, 3) unwrapped (q, p, x)
    alive: np.ndarray = None      # (n,) bool
    t: float = 0.0

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float)).copy()
        if self.alive is None:
            self.alive = np.ones(self.points.shape[0], dtype=bool)

    def wrapped(self, grid: PhaseGrid) -> np.ndarray:
        out = self.points.copy()
        for j, (L,) in enumerate([(grid.Lq,), (grid.Lp,), (grid.Lx,)]):
            out[:, j] = (out[:, j] + 0.5 * L) % L - 0.5 * L
        return out


class TrajectoryAdvector:
    """RK4 advance of an ensemble under the hybrid velocity field.

    The classical components are evaluated from the model's analytic
    potential gradient; the quantum velocity is sampled from the grid
    field of the bracketing snapshots with linear interpolation in time.
    """

    def __init__(self, H: SeparableHamiltonian, dVdq_fn=None,
                 node_threshold: float = 1e-10, order: int = 5):
        self.H = H
        self.grid = H.grid
        self.node_threshold = node_threshold
        self.order = order
        self._dVdq_fn = dVdq_fn if dVdq_fn is not None else FieldSampler(
            self.grid, np.broadcast_to(H.dVdq(), self.grid.field_shape), order)

    def vx_sampler(self, psi: np.ndarray) -> FieldSampler:
        vx = self.H.params.inv_m * phase_gradient(
            psi, self.grid, "x", self.H.params.hbar, self.node_threshold)
        return FieldSampler(self.grid, vx, self.order)

    def density_sampler(self, psi: np.ndarray) -> FieldSampler:
        return FieldSampler(self.grid, (psi.conj() * psi).real, self.order)

    def _vel(self, pts, vx0, vx1, w):
        q, p = pts[:, 0], pts[:, 1]
        vq = self.H.params.inv_M * p
        if callable(self._dVdq_fn) and not isinstance(self._dVdq_fn, FieldSampler):
            vp = -self._dVdq_fn(q, pts[:, 2])
        else:
            vp = -self._dVdq_fn(pts)
        vx = (1.0 - w) * vx0(pts) + w * vx1(pts)
        return np.stack([vq, vp, vx], axis=1)

    def step(self, ens: TrajectoryEnsemble, vx0: FieldSampler, vx1: FieldSampler,
             dt: float, dens0: FieldSampler = None) -> None:
        pts = ens.points[ens.alive]
        if dens0 is not None:
            d = dens0(pts)
            ok = d >= self.node_threshold
            if not np.all(ok):
                idx = np.flatnonzero(ens.alive)
                ens.alive[idx[~ok]] = False
                pts = ens.points[ens.alive]
        if pts.size == 0:
            ens.t += dt
            return
        k1 = self._vel(pts, vx0, vx1, 0.0)
        k2 = self._vel(pts + 0.5 * dt * k1, vx0, vx1, 0.5)
        k3 = self._vel(pts + 0.5 * dt * k2, vx0, vx1, 0.5)
        k4 = self._vel(pts + dt * k3, vx0, vx1, 1.0)
        ens.points[ens.alive] = pts + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        ens.t += dt


# -- circulation loop ------------------------------------------------------


def circle_loop(n_points: int, center, radii) -> np.ndarray:
    """Closed loop gamma(theta) with elliptic (q, p) section and sinusoidal
    x-extent."""
    th = 2 * np.pi * np.arange(n_points) / n_points
    q0, p0, x0 = center
    rq, rp, rx = radii
    return np.stack([q0 + rq * np.cos(th), p0 + rp * np.sin(th),
                     x0 + rx * np.sin(th)], axis=1)


def _theta_derivative(a: np.ndarray) -> np.ndarray:
    # d/d(theta) for theta sampled uniformly on [0, 2pi)
    n = a.shape[0]
    m = np.fft.fftfreq(n, d=1.0 / n)
    F = np.fft.fft(a, axis=0)
    mult = (1j * m).reshape(-1, *([1] * (a.ndim - 1)))
    if n % 2 == 0:
        mult[n // 2] = 0.0
    return np.fft.ifft(mult * F, axis=0).real


def loop_integral_p_dq(points: np.ndarray) -> float:
    """Circulation of p dq around the (unwrapped) loop, spectral
    quadrature in the loop parameter."""
    dq = _theta_derivative(points[:, 0])
    return float((points[:, 1] * dq).sum() * (2 * np.pi / points.shape[0]))


def loop_integral_dxV(points: np.ndarray, dVdx_fn) -> float:
    """Circulation of (dV/dx) dx around the loop; dVdx_fn(q, x)."""
    dx = _theta_derivative(points[:, 2])
    vals = dVdx_fn(points[:, 0], points[:, 2])
    return float((vals * dx).sum() * (2 * np.pi / points.shape[0]))
