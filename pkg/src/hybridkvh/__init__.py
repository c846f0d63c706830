"""Mixed quantum-classical dynamics of Koopman-van Hove wavefunctions
on periodic phase-space grids: spectral calculus, the hybrid Liouvillian
and its unitary propagation, density/current diagnostics with their
momentum-map identities, Lagrangian trajectories, and a moment-closure
model."""

__version__ = "0.1.0"

from .grid import PhaseGrid, CONTINUUM, FINITE_DIM, set_num_threads
from .model import (ModelParams, SeparableHamiltonian, MatrixHamiltonian,
                    build_hamiltonian, hamiltonian_vector_field)
from .liouvillian import (apply_liouvillian, materialize_liouvillian,
                          PointTransform, apply_point_transform,
                          state_inner, state_norm2)
from .propagate import (evolve, rk4_step, total_energy, max_stable_dt,
                        dense_exponential_oracle)
from .densities import (hybrid_density_operator, joint_distribution,
                        classical_density, quantum_density_matrix,
                        defining_identity_residual)
from .madelung import (polar_decompose, reconstruct, madelung_residuals,
                       velocity_field, hybrid_lagrangian, hybrid_currents,
                       continuity_residual, TrajectoryEnsemble, TrajectoryAdvector)
from .closure import (ClosureState, make_closure_state, closure_step,
                      closure_energy, closure_monitors, expected_vector_field)
from .states import (gaussian_packet, coherent_lift, positive_packet,
                     product_state, spinor, x_wavepacket, normalize)
from .config import ScenarioConfig, parse_config, serialize_config, ConfigError
from .scenarios import run_scenario, scenario_config, list_scenarios
