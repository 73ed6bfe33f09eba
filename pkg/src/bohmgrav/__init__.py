"""Trajectory-sourced semiclassical Newtonian gravity toolkit.

Phases of a double Stern-Gerlach pair under a family of potentials whose
source is the wave-function density inside a window of radius R around the
particle trajectories, the induced spin-entanglement witnesses, and a 1D
two-particle dynamics testbed for the same potential family.
"""

from .bound import BoundReport, bound_check, bound_check_branched, phase_functional
from .dynamics import (Branch, EntanglementFields, Grid1D, PotentialModel,
                       TrajectoryPair, TwoParticleWave, assemble_wave,
                       branch_product_waves, conditional_wavefunctions,
                       effective_potential, entanglement_entropy,
                       entanglement_fields, evolve, evolve_branched,
                       evolve_ensemble, free_gaussian_width, gaussian_packet,
                       guiding_velocity, load_checkpoint, packet_sum,
                       potential_field, potential_scalar, product_wave,
                       sample_positions, save_checkpoint)
from .errors import (BohmgravError, ConfigError, DegenerateWindowError,
                     InvalidStateError, NodeProximityError,
                     NumericalDegeneracyError, OutOfDomainError,
                     PhaseConsistencyError, QuadratureError, UntunableError)
from .phases import (CouplingConfig, GammaModel, PhaseSet, branch_phase,
                     large_r_phases, phase_set, phases_auto, phi_infinity,
                     phi_sigma_direct, small_r_phases)
from .special import PacketGeometry, erfcx, j_r, n_norm, q_func
from .witness import (TwoQubitState, WitnessReport, build_state,
                      pauli_expectation, separability_bound_check,
                      witness_report, witness_w, witness_w_state, witness_wg,
                      witness_wg_state)

__version__ = "0.1.0"
