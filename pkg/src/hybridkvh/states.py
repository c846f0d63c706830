"""Initial-state constructors.

Classical (phase-space) factors:

* ``gaussian_packet``       periodic bump in q (von Mises amplitude) times
                            a true Gaussian in p, optional plane phases.
* ``coherent_lift``         momentum-mode-correlated packet: each q-mode k
                            carries a p-profile centered at hbar k, the
                            lift of a quantum wavepacket to phase space.
* ``positive_packet``       coherent lift polished by a short deterministic
                            optimization until the classical density
                            rho_c(z) is pointwise positive.  A plain
                            Gaussian cannot do this: for any decaying
                            profile g, 2 g + p g' < 0 somewhere, so the
                            divergence term always drives rho_c negative
                            in the tails; the optimizer finds the phase /
                            amplitude correlations that fill those lobes.

Quantum factors: fixed spinors (finite-dim) or von Mises wavepackets on
the x-circle (continuum).
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft
from scipy.optimize import minimize

from .densities import classical_density
from .grid import CONTINUUM, FINITE_DIM, GridError, PhaseGrid
from .liouvillian import state_norm2


def normalize(grid: PhaseGrid, psi: np.ndarray) -> np.ndarray:
    n2 = state_norm2(grid, psi)
    if not n2 > 0:
        raise ValueError("cannot normalize a zero state")
    return psi / np.sqrt(n2)


def _z_norm(grid: PhaseGrid, Psi: np.ndarray) -> np.ndarray:
    return Psi / np.sqrt((np.abs(Psi) ** 2).sum() * grid.hq * grid.hp)


def gaussian_packet(grid: PhaseGrid, q0: float = 0.0, p0: float = 0.0,
                    kappa_q: float = 2.0, sigma_p: float = 0.7,
                    mode_q: int = 0, mode_p: int = 0) -> np.ndarray:
    """Localized phase-space bump; plane phases are given as integer
    grid modes so the state stays exactly periodic."""
    q = grid.q[:, None]
    p = grid.p[None, :]
    amp = np.exp(0.5 * kappa_q * (np.cos(q - q0) - 1.0)) * np.exp(-((p - p0) ** 2) / (4.0 * sigma_p**2))
    phase = np.exp(1j * (mode_q * 2 * np.pi / grid.Lq) * q + 1j * (mode_p * 2 * np.pi / grid.Lp) * p)
    return _z_norm(grid, amp.astype(complex) * phase)


def coherent_lift(grid: PhaseGrid, hbar: float = 1.0, q0: float = 0.0,
                  p0: float = 0.0, sigma_p: float = 1.0,
                  mode_sigma: float = 2.0) -> np.ndarray:
    """Sum over q-modes k of w(k)^(1/2) exp(ik(q-q0)) times a p-profile
    centered at hbar k; correlating momentum phase with p-support keeps
    the classical density mildly signed (tails only)."""
    kq = 2 * np.pi * np.fft.fftfreq(grid.nq, d=grid.Lq / grid.nq)
    k0 = p0 / hbar
    q = grid.q[:, None]
    p = grid.p[None, :]
    Psi = np.zeros((grid.nq, grid.np_), dtype=complex)
    for k in kq:
        a = np.exp(-((k - k0) ** 2) / (4.0 * mode_sigma**2))
        if a < 1e-14:
            continue
        Psi += a * np.exp(-((p - hbar * k) ** 2) / (4.0 * sigma_p**2)) * np.exp(1j * k * (q - q0))
    return _z_norm(grid, Psi)


def fourier_upsample(a: np.ndarray, shape: tuple) -> np.ndarray:
    """Zero-padded spectral interpolation of a 2-D periodic field."""
    n0, n1 = a.shape
    m0, m1 = shape
    if (m0, m1) == (n0, n1):
        return a.copy()
    F = sfft.fft2(a)
    G = np.zeros(shape, dtype=complex)
    h0, h1 = n0 // 2, n1 // 2
    G[:h0, :h1] = F[:h0, :h1]
    G[:h0, -h1:] = F[:h0, -h1:]
    G[-h0:, :h1] = F[-h0:, :h1]
    G[-h0:, -h1:] = F[-h0:, -h1:]
    return sfft.ifft2(G) * (m0 * m1) / (n0 * n1)


class _PositiveDesign:
    """Band-limited parametrization with the classical density evaluated
    on a refined grid, so the softmin controls the continuum function
    between coarse samples too."""

    def __init__(self, grid, hbar, mode_cap_q, mode_cap_p, refine, boundary_frac):
        self.hbar = hbar
        nq = 2 * mode_cap_q + 2
        npp = 2 * mode_cap_p + 2
        self.fine = PhaseGrid(refine * nq, refine * npp, 1,
                              Lq=grid.Lq, Lp=grid.Lp, mode=FINITE_DIM)
        self.nq, self.npp = nq, npp
        fg = self.fine
        self.bmask = (np.abs(fg.p_bc(2)) > (0.5 - boundary_frac) * grid.Lp) * np.ones(
            (fg.nq, fg.np_))

    def field(self, modes: np.ndarray) -> np.ndarray:
        G = np.zeros((self.fine.nq, self.fine.np_), dtype=complex)
        h0, h1 = self.nq // 2, self.npp // 2
        G[:h0, :h1] = modes[:h0, :h1]
        G[:h0, -h1:] = modes[:h0, -h1:]
        G[-h0:, :h1] = modes[-h0:, :h1]
        G[-h0:, -h1:] = modes[-h0:, -h1:]
        return sfft.ifft2(G) * self.fine.nq * self.fine.np_ / (self.nq * self.npp)

    def restrict(self, field_grad: np.ndarray) -> np.ndarray:
        F = sfft.fft2(field_grad) / (self.nq * self.npp)
        out = np.zeros((self.nq, self.npp), dtype=complex)
        h0, h1 = self.nq // 2, self.npp // 2
        out[:h0, :h1] = F[:h0, :h1]
        out[:h0, -h1:] = F[:h0, -h1:]
        out[-h0:, :h1] = F[-h0:, :h1]
        out[-h0:, -h1:] = F[-h0:, -h1:]
        return out

    def objective(self, v, tau, bpen):
        g = self.fine
        modes = (v[: v.size // 2] + 1j * v[v.size // 2:]).reshape(self.nq, self.npp)
        Psi = self.field(modes)
        w2 = (np.abs(Psi) ** 2).sum() * g.hq * g.hp
        Psi = Psi / np.sqrt(w2)
        P = g.p_bc(2)
        D = (Psi * Psi.conj()).real
        dqP = g.deriv(Psi, "q")
        dpP = g.deriv(Psi, "p")
        rc = (D + g.deriv(P * D, "p")
              + (1j * self.hbar * (dqP * dpP.conj() - dpP * dqP.conj())).real)
        rmin = rc.min()
        e = np.exp(-(rc - rmin) / tau)
        Z = e.sum()
        softmin = rmin - tau * np.log(Z / rc.size)
        wgt = e / (Z * tau)
        gPsi = -((1.0 * wgt - P * g.deriv(wgt, "p")) * Psi
                 + 1j * self.hbar * (g.deriv(wgt * dpP, "q") - g.deriv(wgt * dqP, "p")))
        f = -softmin
        if bpen:
            f += bpen * float((self.bmask * D).sum()) * g.hq * g.hp
            gPsi += bpen * self.bmask * Psi * (g.hq * g.hp)
        ip = float((np.conj(Psi) * gPsi).sum().real) * g.hq * g.hp
        gPsi = (gPsi - ip * Psi) / np.sqrt(w2)
        gm = self.restrict(gPsi)
        grad = np.concatenate([2 * gm.real.ravel(), 2 * gm.imag.ravel()])
        return f, grad


def positive_packet(grid: PhaseGrid, hbar: float = 1.0, q0: float = 0.0,
                    p0: float = 0.0, sigma_p: float = 1.0, mode_sigma: float = 2.0,
                    mode_cap_q: int = 10, mode_cap_p: int = 15, refine: int = 3,
                    boundary_frac: float = 0.08, maxiter: int = 1200) -> np.ndarray:
    """Pointwise-positive-classical-density packet.

    Deterministic softmin ascent of min_z rho_c over a band-limited mode
    set, starting from the coherent lift; the density is monitored on a
    refined sampling so positivity holds between grid points, and a
    window penalty keeps the p-boundary empty.  The result is spectrally
    interpolated to the target grid.
    """
    design = _PositiveDesign(grid, hbar, mode_cap_q, mode_cap_p, refine, boundary_frac)
    seed = coherent_lift(design.fine, hbar, q0, p0, sigma_p, mode_sigma)
    modes = design.restrict(seed) * (design.fine.nq * design.fine.np_
                                     / (design.nq * design.npp))
    v = np.concatenate([modes.real.ravel(), modes.imag.ravel()])
    for tau in (0.05, 0.02, 0.008, 0.003, 0.001, 3e-4, 1e-4, 3e-5):
        res = minimize(design.objective, v, args=(tau, 400.0), jac=True,
                       method="L-BFGS-B", options={"maxiter": maxiter})
        v = res.x
    modes = (v[: v.size // 2] + 1j * v[v.size // 2:]).reshape(design.nq, design.npp)
    Psi = design.field(modes)
    return _z_norm(grid, fourier_upsample(Psi, (grid.nq, grid.np_)))


# -- quantum factors ------------------------------------------------------

def spinor(grid: PhaseGrid, components) -> np.ndarray:
    if grid.mode != FINITE_DIM:
        raise GridError("spinor factors require finite_dim mode")
    v = np.asarray(components, dtype=complex)
    if v.shape != (grid.nx,):
        raise GridError(f"spinor needs {grid.nx} components")
    return v / np.linalg.norm(v)


def x_wavepacket(grid: PhaseGrid, kappa_x: float = 2.0, x0: float = 0.0,
                 mode_x: int = 1) -> np.ndarray:
    if grid.mode != CONTINUUM:
        raise GridError("x wavepackets require continuum mode")
    x = grid.x
    chi = np.exp(0.5 * kappa_x * (np.cos(x - x0) - 1.0)).astype(complex)
    chi *= np.exp(1j * (mode_x * 2 * np.pi / grid.Lx) * x)
    return chi / np.sqrt((np.abs(chi) ** 2).sum() * grid.hx)


def product_state(grid: PhaseGrid, Psi: np.ndarray, quantum: np.ndarray) -> np.ndarray:
    psi = Psi[:, :, None] * quantum[None, None, :]
    return normalize(grid, psi)
