#!/usr/bin/env python3
"""Momentum-map diagnostics of a hybrid state: the operator-valued
phase-space density, its marginals, and the pairing identity that
defines it.

The identity <psi | L_A psi> = Tr integral A(z) Dop(z) dz holds at
machine precision on the periodic grid because the discrete derivative
matrix is exactly antisymmetric.
"""

import numpy as np

from hybridkvh import (ModelParams, PhaseGrid, defining_identity_residual,
                       gaussian_packet, hybrid_density_operator,
                       joint_distribution, product_state,
                       quantum_density_matrix, spinor)
from hybridkvh.grid import FINITE_DIM
from hybridkvh.model import MatrixHamiltonian, PAULI_X, PAULI_Z

grid = PhaseGrid(32, 40, 2, Lq=2 * np.pi, Lp=10.0, mode=FINITE_DIM)
params = ModelParams(hbar=1.0)

psi = product_state(grid,
                    gaussian_packet(grid, q0=0.5, kappa_q=2.0, sigma_p=0.8,
                                    mode_q=1),
                    spinor(grid, [0.8, 0.6j]))

Dop = hybrid_density_operator(psi, grid)
dist = joint_distribution(psi, grid)
rho_c = grid.integrate_x(dist)
rho_q = quantum_density_matrix(psi, grid)

print(f"total trace:        {grid.integrate_z(rho_c):.15f}")
print(f"classical density:  min {rho_c.min():+.4e}, max {rho_c.max():.4e}")
print("  (the phase-space density is generically signed)")
print(f"quantum matrix eigenvalues: {np.linalg.eigvalsh(rho_q)}")

q = grid.q[:, None, None, None]
pt = (2 * np.pi * grid.p / grid.Lp)[None, :, None, None]
ones = np.ones((grid.nq, grid.np_, 1, 1))
for name, W in [
    ("sin(q) sigma_z", np.sin(q) * PAULI_Z * ones),
    ("cos(p) sigma_x", np.cos(pt) * PAULI_X * ones),
    ("mixed", (np.sin(q) * PAULI_X + 0.5 * np.cos(2 * pt) * np.eye(2)) * ones),
]:
    A = MatrixHamiltonian(grid, params, W, kinetic=False)
    print(f"pairing identity residual [{name:15s}]: "
          f"{defining_identity_residual(A, psi):.2e}")
