"""Hybrid density diagnostics: the operator-valued phase-space density,
the joint distribution, classical/quantum marginals, and the residuals
that witness the momentum-map structure.

The operator field attached to a wavefunction is

    Dop(z) = psi psi^dag + d/dp (p psi psi^dag) + i hbar {psi, psi^dag}.

The divergence term differentiates the pointwise-weighted product p f
spectrally.  The weighted product is smooth across the periodic seam
exactly when the state decays at the p-boundary (which the boundary-mass
monitor enforces), and because the grid derivative matrix is exactly
antisymmetric the divergence and bracket terms integrate to zero to
rounding: trace normalization and the pairing identity hold at machine
precision, not just truncation order.
"""

from __future__ import annotations

import numpy as np

from .grid import CONTINUUM, FINITE_DIM, GridError, PhaseGrid
from .liouvillian import (PointTransform, apply_liouvillian,
                          apply_point_transform, state_norm2)
from .model import MatrixHamiltonian


def _div_weighted(grid: PhaseGrid, f: np.ndarray) -> np.ndarray:
    """d/dp (p f), spectral derivative of the pointwise-weighted product."""
    return grid.deriv(grid.p_bc(f.ndim) * f, "p")


def hybrid_density_operator(psi: np.ndarray, grid: PhaseGrid, hbar: float = 1.0) -> np.ndarray:
    """Hermitian matrix field Dop(z) over (q, p); finite-dim mode only
    (the continuum kernel is never materialized, see joint_distribution)."""
    if grid.mode != FINITE_DIM:
        raise GridError("hybrid_density_operator requires finite_dim mode; "
                        "use joint_distribution in continuum mode")
    psi = np.asarray(psi, dtype=complex)
    outer = psi[..., :, None] * psi.conj()[..., None, :]
    dq = grid.deriv(psi, "q")
    dp = grid.deriv(psi, "p")
    bracket = dq[..., :, None] * dp.conj()[..., None, :] - dp[..., :, None] * dq.conj()[..., None, :]
    return outer + _div_weighted(grid, outer) + 1j * hbar * bracket


def joint_distribution(psi: np.ndarray, grid: PhaseGrid, hbar: float = 1.0) -> np.ndarray:
    """Real joint density over (q, p, x) or (q, p, level): the kernel
    diagonal of the density operator."""
    psi = np.asarray(psi, dtype=complex)
    dens = (psi.conj() * psi).real
    dq = grid.deriv(psi, "q")
    dp = grid.deriv(psi, "p")
    bracket = dq * dp.conj() - dp * dq.conj()
    return dens + _div_weighted(grid, dens) + (1j * hbar * bracket).real


def classical_density(psi: np.ndarray, grid: PhaseGrid, hbar: float = 1.0) -> np.ndarray:
    """rho_c(z): trace of the density operator (finite-dim) or the
    x-integral of the joint distribution (continuum)."""
    return grid.integrate_x(joint_distribution(psi, grid, hbar))


def quantum_density_matrix(psi: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """rho_q = integral of psi psi^dag over phase space: an n x n matrix
    (finite-dim) or the x-kernel matrix weighted so its plain trace is
    the squared norm (continuum)."""
    psi = np.asarray(psi, dtype=complex)
    nz = grid.nq * grid.np_
    flat = psi.reshape(nz, grid.nx)
    rho = (flat.conj().T @ flat).T * (grid.hq * grid.hp)
    if grid.mode == CONTINUUM:
        rho *= grid.hx
    return rho


def quantum_marginal(psi: np.ndarray, grid: PhaseGrid, hbar: float = 1.0) -> np.ndarray:
    """rho_q(x) (or per-level occupation): phase-space integral of the
    joint distribution."""
    return grid.integrate_z(joint_distribution(psi, grid, hbar))


def defining_identity_residual(A: MatrixHamiltonian, psi: np.ndarray) -> float:
    """Relative gap between <psi | L_A psi> and Tr of the observable
    paired with the density operator; the defining property of the
    operator-valued density (momentum-map witness).  Scaled by the
    magnitude of both sides with the observable's RMS as a floor, so
    accidentally vanishing expectations do not inflate the measure."""
    grid = A.grid
    lhs = complex((psi.conj() * apply_liouvillian(A, psi)).sum() * grid.cell_volume)
    D = hybrid_density_operator(psi, grid, A.params.hbar)
    rhs = complex(np.einsum("qpij,qpji->", A.value(), D) * grid.hq * grid.hp)
    scale = max(abs(lhs), abs(rhs), float(np.sqrt(np.mean(np.abs(A.W) ** 2))))
    return abs(lhs - rhs) / scale


def density_equivariance_residual(T: PointTransform, psi: np.ndarray,
                                  grid: PhaseGrid, hbar: float = 1.0) -> float:
    """Relative residual of Dop(U psi) against the transformed Dop(psi):
    composed with the inverse translation for the classical part,
    conjugated by the unitary for the quantum part."""
    lhs = hybrid_density_operator(apply_point_transform(grid, T, psi, hbar), grid, hbar)
    rhs = hybrid_density_operator(psi, grid, hbar)
    rhs = np.roll(rhs, shift=(T.cells_q, T.cells_p), axis=(0, 1))
    if T.unitary is not None:
        U = np.asarray(T.unitary, dtype=complex)
        rhs = np.einsum("ij,qpjk,kl->qpil", U, rhs, U.conj().T)
    num = np.sqrt(float(np.sum(np.abs(lhs - rhs) ** 2)) * grid.hq * grid.hp)
    den = np.sqrt(float(np.sum(np.abs(rhs) ** 2)) * grid.hq * grid.hp)
    return num / max(den, 1e-300)


def trace_distance(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(rho_a - rho_b)
    return 0.5 * float(np.sum(np.abs(ev)))


def density_summary(psi: np.ndarray, grid: PhaseGrid, hbar: float = 1.0) -> dict:
    """Per-step diagnostics: total trace, min classical density, min
    eigenvalue of the quantum density matrix."""
    dist = joint_distribution(psi, grid, hbar)
    rho_c = grid.integrate_x(dist)
    rho_q = quantum_density_matrix(psi, grid)
    return {
        "trace_D": float(grid.integrate_z(rho_c)),
        "rho_c_min": float(rho_c.min()),
        "rho_q_min_eig": float(np.linalg.eigvalsh(rho_q).min()),
    }
