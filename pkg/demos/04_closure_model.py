#!/usr/bin/env python3
"""The moment-closure system: a phase-space density, a unit-trace matrix
field riding on it, and the expectation-valued flow coupling them.

Mass and the pointwise trace are conserved to rounding; the energy
functional drifts only at the spectral-truncation level; the matrix
field's spectrum stays inside [0, 1] because its evolution is unitary
conjugation along characteristics.
"""

import numpy as np

from hybridkvh import ModelParams, PhaseGrid, build_hamiltonian
from hybridkvh.closure import (closure_energy, closure_monitors, closure_step)
from hybridkvh.grid import FINITE_DIM
from hybridkvh.scenarios import build_closure_initial, scenario_config

cfg = scenario_config("canonical_closure")
cfg.grid.nq = cfg.grid.np = 48
grid = PhaseGrid(48, 48, 2, Lq=cfg.grid.lq, Lp=cfg.grid.lp, mode=FINITE_DIM)
params = ModelParams(hbar=1.0, lam=0.1)
H = build_hamiltonian("analytic_alpha", grid, params)

state = build_closure_initial(cfg, grid)
e0 = closure_energy(H, state)
print(f"initial energy {e0:.8f}")
print(f"{'t':>5} {'mass-1':>10} {'trace dev':>10} {'min eig':>9} {'energy drift':>13}")

dt = 1e-3
for block in range(5):
    for _ in range(200):
        state = closure_step(H, state, dt)
    mon = closure_monitors(H, state)
    print(f"{state.t:5.2f} {mon['mass'] - 1:10.1e} {mon['min_trace_dev']:10.1e} "
          f"{mon['min_rho_eig']:9.4f} {mon['closure_energy'] - e0:13.2e}")

print("\nthe general covector system started on u = A stays there:")
sg = build_closure_initial(cfg, grid)
for _ in range(300):
    sg = closure_step(H, sg, dt, general=True)
print(f"  max |u - A| after t=0.3: {np.max(np.abs(sg.w)):.2e}")
