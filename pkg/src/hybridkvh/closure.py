"""Moment-closure dynamics on phase space: a scalar density D(z), a
unit-trace Hermitian matrix field rho(z), and a covector field u(z)
advected by the expectation of the Hamiltonian vector field,

    dD/dt + div(D <X_H>) = 0
    drho/dt + <X_H>.grad rho = -(i/hbar) [u.X_H - L_H, rho]
    (d/dt + Lie_<X_H>) (u - A) = (u - A) Tr(X_H grad rho),

with A = (p, 0) the canonical one-form.  The state stores w = u - A,
which is periodic and vanishes identically on the reduced invariant
manifold u = A, where the commutator collapses to [H, rho] exactly and
the (D, rho) equations coincide with the reduced system bit-for-bit.

The commutator carries the -i/hbar of real-time von Neumann dynamics
(checked by the z-independent precession case); the covector source is
real transport and takes no such factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FINITE_DIM, GridError, PhaseGrid
from .model import MatrixHamiltonian, ModelError


class ClosureError(RuntimeError):
    pass


@dataclass
class ClosureState:
    D: np.ndarray                # (nq, np) real density
    rho: np.ndarray              # (nq, np, n, n) Hermitian, unit trace
    w: np.ndarray                # (nq, np, 2) covector u - A
    t: float = 0.0

    def copy(self) -> "ClosureState":
        return ClosureState(self.D.copy(), self.rho.copy(), self.w.copy(), self.t)

    def u(self, grid: PhaseGrid) -> np.ndarray:
        out = self.w.copy()
        out[..., 0] += grid.p_bc(2)
        return out


def make_closure_state(grid: PhaseGrid, D: np.ndarray, rho: np.ndarray,
                       w: np.ndarray = None, check: bool = True) -> ClosureState:
    D = np.asarray(D, dtype=float)
    rho = np.asarray(rho, dtype=complex)
    if D.shape != (grid.nq, grid.np_):
        raise GridError(f"D shape {D.shape}")
    if rho.shape != (grid.nq, grid.np_, grid.nx, grid.nx):
        raise GridError(f"rho shape {rho.shape}")
    if w is None:
        w = np.zeros((grid.nq, grid.np_, 2))
    if check:
        tr = np.einsum("qpii->qp", rho).real
        if np.max(np.abs(tr - 1.0)) > 1e-8:
            raise ClosureError("rho must have unit trace pointwise")
        if np.max(np.abs(rho - rho.conj().swapaxes(-1, -2))) > 1e-10:
            raise ClosureError("rho must be Hermitian")
    return ClosureState(D, rho, np.asarray(w, dtype=float))


def expected_vector_field(H: MatrixHamiltonian, rho: np.ndarray,
                          trace_tol: float = 1e-8):
    """<X_H> = (Tr(rho dH/dp), -Tr(rho dH/dq)); real vector field."""
    tr = np.einsum("qpii->qp", rho).real
    if np.max(np.abs(tr - 1.0)) > trace_tol:
        raise ClosureError(f"rho trace deviates by {np.max(np.abs(tr - 1.0)):.2e}")
    g = H.grid
    vq = np.einsum("qpij,qpji->qp", rho, H._dWdp).real
    if H.kinetic:
        vq = vq + H.params.inv_M * g.p_bc(2) * tr
    vp = -np.einsum("qpij,qpji->qp", rho, H._dWdq).real
    return vq, vp


def _rhs(H: MatrixHamiltonian, s: ClosureState, general: bool):
    g = H.grid
    hbar = H.params.hbar
    vq, vp = expected_vector_field(H, s.rho)

    dD = -(g.deriv(s.D * vq, "q") + g.deriv(s.D * vp, "p"))

    drho_q = g.deriv(s.rho, "q")
    drho_p = g.deriv(s.rho, "p")
    B = H.W
    if general:
        B = B + s.w[..., 0, None, None] * H._dWdp - s.w[..., 1, None, None] * H._dWdq
    comm = np.einsum("qpij,qpjk->qpik", B, s.rho) - np.einsum("qpij,qpjk->qpik", s.rho, B)
    drho = -(vq[..., None, None] * drho_q + vp[..., None, None] * drho_p) \
        - (1j / hbar) * comm

    if not general:
        return dD, drho, np.zeros_like(s.w)

    # covector transport: dw/dt = -Lie_v w + w Tr(X_H grad rho)
    # Lie_v w_i = v^j d_j w_i + w_j d_i v^j, with the p-derivative of the
    # kinetic part of v^q taken analytically (1/M).
    dvq_q = g.deriv(vq - H.params.inv_M * g.p_bc(2), "q") if H.kinetic else g.deriv(vq, "q")
    dvq_p = g.deriv(vq - H.params.inv_M * g.p_bc(2), "p") if H.kinetic else g.deriv(vq, "p")
    if H.kinetic:
        dvq_p = dvq_p + H.params.inv_M
    dvp_q = g.deriv(vp, "q")
    dvp_p = g.deriv(vp, "p")
    lie = np.empty_like(s.w)
    wq, wp = s.w[..., 0], s.w[..., 1]
    lie[..., 0] = vq * g.deriv(wq, "q") + vp * g.deriv(wq, "p") + wq * dvq_q + wp * dvp_q
    lie[..., 1] = vq * g.deriv(wp, "q") + vp * g.deriv(wp, "p") + wq * dvq_p + wp * dvp_p
    src = (np.einsum("qpij,qpji->qp", H._dWdp, drho_q).real
           - np.einsum("qpij,qpji->qp", H._dWdq, drho_p).real)
    if H.kinetic:
        src = src + H.params.inv_M * g.p_bc(2) * np.einsum("qpii->qp", drho_q).real
    dw = -lie + s.w * src[..., None]
    return dD, drho, dw


def closure_step(H: MatrixHamiltonian, s: ClosureState, dt: float,
                 general: bool = False) -> ClosureState:
    """One RK4 step of the reduced (u = A frozen) or general system."""
    def add(st, kD, krho, kw, c):
        return ClosureState(st.D + c * kD, st.rho + c * krho, st.w + c * kw, st.t)

    k1 = _rhs(H, s, general)
    k2 = _rhs(H, add(s, *k1, 0.5 * dt), general)
    k3 = _rhs(H, add(s, *k2, 0.5 * dt), general)
    k4 = _rhs(H, add(s, *k3, dt), general)
    out = ClosureState(
        s.D + (dt / 6) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        s.rho + (dt / 6) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        s.w + (dt / 6) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
        s.t + dt,
    )
    if not np.all(np.isfinite(out.D)):
        raise ClosureError(f"non-finite density at t={out.t:.6g}")
    return out


def closure_energy(H: MatrixHamiltonian, s: ClosureState) -> float:
    """h = integral of D Tr(rho (u.X_H - L_H)); reduces to
    integral D Tr(rho H) on u = A."""
    g = H.grid
    p = g.p_bc(2)
    sym = np.einsum("qpij,qpji->qp", s.rho, H.W).real
    if H.kinetic:
        sym = sym + 0.5 * H.params.inv_M * p**2
    wq, wp = s.w[..., 0], s.w[..., 1]
    if np.any(wq) or np.any(wp):
        aq = np.einsum("qpij,qpji->qp", s.rho, H._dWdp).real
        ap = np.einsum("qpij,qpji->qp", s.rho, H._dWdq).real
        sym = sym + wq * (H.params.inv_M * p + aq) - wp * ap
    return float(g.integrate_z(s.D * sym))


def closure_monitors(H: MatrixHamiltonian, s: ClosureState) -> dict:
    g = H.grid
    tr = np.einsum("qpii->qp", s.rho).real
    eigs = np.linalg.eigvalsh(s.rho)
    return {
        "mass": float(g.integrate_z(s.D)),
        "closure_energy": closure_energy(H, s),
        "min_trace_dev": float(np.max(np.abs(tr - 1.0))),
        "min_rho_eig": float(eigs.min()),
    }


def closure_dt_cap(H: MatrixHamiltonian, safety: float = 0.5) -> float:
    g = H.grid
    kq = float(np.max(np.abs(g.wavenumbers("q"))))
    kp = float(np.max(np.abs(g.wavenumbers("p"))))
    n = H.nlevels
    vq = H.params.inv_M * float(np.max(np.abs(g.p))) + n * float(np.max(np.abs(H._dWdp)))
    vp = n * float(np.max(np.abs(H._dWdq)))
    comm = 2.0 * n * float(np.max(np.abs(H.W))) / H.params.hbar
    return safety / (vq * kq + vp * kp + comm)


def aux_one_form_identity_residual(H: MatrixHamiltonian, s: ClosureState) -> float:
    """Relative residual of Lie_<X_H> A = grad <L_H> + Tr(H grad rho),
    a field identity that closes the covector equation."""
    g = H.grid
    p = g.p_bc(2)
    vq, vp = expected_vector_field(H, s.rho)
    vq_w = vq - (H.params.inv_M * p if H.kinetic else 0.0)
    lie_q = vp + p * g.deriv(vq_w, "q")
    lie_p = p * (g.deriv(vq_w, "p") + (H.params.inv_M if H.kinetic else 0.0))

    a = np.einsum("qpij,qpji->qp", s.rho, H._dWdp).real      # Tr(rho dW/dp)
    b = np.einsum("qpij,qpji->qp", s.rho, H.W).real          # Tr(rho W)
    drho_q = g.deriv(s.rho, "q")
    drho_p = g.deriv(s.rho, "p")
    tWq = np.einsum("qpij,qpji->qp", H.W, drho_q).real
    tWp = np.einsum("qpij,qpji->qp", H.W, drho_p).real
    trq = np.einsum("qpii->qp", drho_q).real
    trp = np.einsum("qpii->qp", drho_p).real
    rhs_q = p * g.deriv(a, "q") - g.deriv(b, "q") + tWq
    rhs_p = a + p * g.deriv(a, "p") - g.deriv(b, "p") + tWp
    if H.kinetic:
        rhs_q = rhs_q + 0.5 * H.params.inv_M * p**2 * trq
        rhs_p = rhs_p + H.params.inv_M * p + 0.5 * H.params.inv_M * p**2 * trp
    num = np.sqrt(float(((lie_q - rhs_q) ** 2 + (lie_p - rhs_p) ** 2).sum()))
    den = np.sqrt(float((lie_q**2 + lie_p**2).sum())) + 1e-300
    return num / den
