"""Hybrid Hamiltonians and their derived symbols.

Two families:

* ``SeparableHamiltonian`` (continuum mode): quantum kinetic term
  -(hbar^2/2m) Lap_x plus the scalar symbol |p|^2/2M + V(q, x).
* ``MatrixHamiltonian`` (finite-dim mode): optional |p|^2/2M kinetic
  term times the identity plus a periodic Hermitian matrix field W(z).

p-derivatives of the kinetic symbol are always the analytic p/M; only
periodic parts are ever differentiated spectrally.  Either mass may be
``inf`` to switch the corresponding kinetic term off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CONTINUUM, FINITE_DIM, GridError, PhaseGrid


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    hbar: float = 1.0
    m: float = 1.0  # quantum mass
    M: float = 1.0  # classical mass
    lam: float = 0.0  # coupling strength

    def __post_init__(self):
        for name in ("hbar", "m", "M"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be strictly positive")

    @property
    def inv_m(self) -> float:
        return 0.0 if np.isinf(self.m) else 1.0 / self.m

    @property
    def inv_M(self) -> float:
        return 0.0 if np.isinf(self.M) else 1.0 / self.M


class SeparableHamiltonian:
    """Continuum-mode Hamiltonian -(hbar^2/2m) Lap_x + p^2/2M + V(q, x)."""

    mode = CONTINUUM

    def __init__(self, grid: PhaseGrid, params: ModelParams, V: np.ndarray):
        if grid.mode != CONTINUUM:
            raise ModelError("SeparableHamiltonian requires a continuum grid")
        self.grid = grid
        self.params = params
        V = np.asarray(V, dtype=float)
        if V.ndim == 2 and V.shape == (grid.nq, grid.nx):
            V = V[:, None, :]
        if V.shape not in ((grid.nq, 1, grid.nx), grid.field_shape):
            raise ModelError(f"V shape {V.shape} incompatible with grid")
        self.V = V
        self._dVdq = grid.deriv(np.broadcast_to(V, grid.field_shape).copy(), "q")

    def kinetic_p(self) -> np.ndarray:
        g = self.grid
        return 0.5 * self.params.inv_M * g.p_bc(3) ** 2

    def interaction_hamiltonian(self) -> np.ndarray:
        """H_I = p^2/2M + V, the classical Hamiltonian augmented by the
        interaction potential."""
        return self.kinetic_p() + self.V

    def interaction_lagrangian(self) -> np.ndarray:
        """L_I = p^2/2M - V."""
        return self.kinetic_p() - self.V

    def lagrangian_symbol(self) -> np.ndarray:
        """Multiplicative part of p . dH/dp - H, i.e. L_I; the quantum
        kinetic operator contributes separately to the Liouvillian."""
        return self.interaction_lagrangian()

    def interaction_vector_field(self):
        """Hamiltonian vector field of H_I: (p/M, -dV/dq), with the
        p-derivative taken analytically."""
        g = self.grid
        xq = np.broadcast_to(self.params.inv_M * g.p_bc(3), g.field_shape)
        return xq, -self._dVdq

    def dVdq(self) -> np.ndarray:
        return self._dVdq

    def dVdx(self) -> np.ndarray:
        return self.grid.deriv(np.broadcast_to(self.V, self.grid.field_shape).copy(), "x")


class MatrixHamiltonian:
    """Finite-dim Hamiltonian kin * p^2/2M Id + W(z), W Hermitian."""

    mode = FINITE_DIM

    def __init__(self, grid: PhaseGrid, params: ModelParams, W: np.ndarray,
                 kinetic: bool = True, herm_tol: float = 1e-13):
        if grid.mode != FINITE_DIM:
            raise ModelError("MatrixHamiltonian requires a finite_dim grid")
        self.grid = grid
        self.params = params
        n = grid.nx
        W = np.asarray(W, dtype=complex)
        if W.shape == (n, n):
            W = np.broadcast_to(W, (grid.nq, grid.np_, n, n)).copy()
        if W.shape != (grid.nq, grid.np_, n, n):
            raise ModelError(f"W shape {W.shape} incompatible with grid")
        dev = np.max(np.abs(W - W.conj().swapaxes(-1, -2)))
        if dev > herm_tol:
            raise ModelError(f"W not Hermitian: max deviation {dev:.3e}")
        self.W = W
        self.kinetic = kinetic
        self._dWdq = grid.deriv(W, "q")
        self._dWdp = grid.deriv(W, "p")

    @property
    def nlevels(self) -> int:
        return self.grid.nx

    def _eye(self) -> np.ndarray:
        return np.eye(self.nlevels)

    def value(self) -> np.ndarray:
        H = self.W.copy()
        if self.kinetic:
            p2 = 0.5 * self.params.inv_M * self.grid.p_bc(2) ** 2
            H += p2[..., None, None] * self._eye()
        return H

    def dq(self) -> np.ndarray:
        return self._dWdq

    def dp(self) -> np.ndarray:
        out = self._dWdp.copy()
        if self.kinetic:
            pM = self.params.inv_M * self.grid.p_bc(2)
            out += pM[..., None, None] * self._eye()
        return out

    def lagrangian_symbol(self) -> np.ndarray:
        """L = p . dH/dp - H as a matrix field; the kinetic part gives
        back +p^2/2M Id."""
        g = self.grid
        p = g.p_bc(2)[..., None, None]
        L = p * self._dWdp - self.W
        if self.kinetic:
            L += (0.5 * self.params.inv_M * p**2) * self._eye()
        return L

    def conjugated(self) -> "MatrixHamiltonian":
        """Hamiltonian with the entrywise-conjugated symbol (equals the
        transposed symbol for Hermitian fields)."""
        return MatrixHamiltonian(self.grid, self.params, self.W.conj(), kinetic=self.kinetic)


def hamiltonian_vector_field(grid: PhaseGrid, h: np.ndarray):
    """(dp h, -dq h) for a scalar symbol h, all-spectral version."""
    return grid.deriv(h, "p"), -grid.deriv(h, "q")


# -- built-in potentials ------------------------------------------------

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
EYE2 = np.eye(2, dtype=complex)


def _pendulum_V(grid: PhaseGrid, lam: float) -> np.ndarray:
    q = grid.q[:, None]
    x = grid.x[None, :]
    return (1.0 - np.cos(q)) + (1.0 - np.cos(x)) + lam * np.sin(q) * np.sin(x)


def _pendulum_W(grid: PhaseGrid, lam: float) -> np.ndarray:
    # two-level surrogate of the pendulum pair: cos x -> sigma_z for the
    # quantum self-energy, sin x -> sigma_x for the bilinear coupling
    if grid.nx != 2:
        raise ModelError("pendulum_bilinear in finite_dim mode is a two-level model")
    q = grid.q[:, None, None, None]
    W = (1.0 - np.cos(q)) * EYE2 + (EYE2 - PAULI_Z) + lam * np.sin(q) * PAULI_X
    return np.broadcast_to(W, (grid.nq, grid.np_, 2, 2)).copy()


def _alpha_W(grid: PhaseGrid, lam: float, alpha: np.ndarray) -> np.ndarray:
    q = grid.q[:, None, None, None]
    n = grid.nx
    W = (1.0 - np.cos(q)) * np.eye(n) + lam * np.sin(q) * alpha
    return np.broadcast_to(W, (grid.nq, grid.np_, n, n)).copy()


def build_hamiltonian(name: str, grid: PhaseGrid, params: ModelParams, **kw):
    """Built-in potential library, selected by name.

    ``uncoupled``          pendulum pair with the coupling switched off
    ``pendulum_bilinear``  V = (1-cos q) + (1-cos x) + lam sin q sin x
    ``analytic_alpha``     finite-dim H(z) = p^2/2M + (1-cos q) + lam sin(q) alpha,
                           alpha a fixed Hermitian matrix (default sigma_x);
                           all values commute, the class with sign-preserving
                           classical density
    """
    lam = params.lam
    if name == "uncoupled":
        lam = 0.0
    elif name not in ("pendulum_bilinear", "analytic_alpha"):
        raise ModelError(f"unknown potential {name!r}")

    if name == "analytic_alpha":
        if grid.mode != FINITE_DIM:
            raise ModelError("analytic_alpha is a finite_dim potential")
        alpha = np.asarray(kw.get("alpha", PAULI_X), dtype=complex)
        if alpha.shape != (grid.nx, grid.nx):
            raise ModelError("alpha must be n x n")
        if np.max(np.abs(alpha - alpha.conj().T)) > 1e-13:
            raise ModelError("alpha must be Hermitian")
        return MatrixHamiltonian(grid, params, _alpha_W(grid, lam, alpha))

    if grid.mode == CONTINUUM:
        H = SeparableHamiltonian(grid, params, _pendulum_V(grid, lam))
        # closed-form potential gradients, used by trajectory / loop
        # diagnostics to avoid interpolating grid fields
        lam_ = lam
        H.dVdq_fn = lambda q, x: np.sin(q) + lam_ * np.cos(q) * np.sin(x)
        H.dVdx_fn = lambda q, x: np.sin(x) + lam_ * np.sin(q) * np.cos(x)
        return H
    return MatrixHamiltonian(grid, params, _pendulum_W(grid, lam))
