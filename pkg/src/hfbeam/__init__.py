"""High-frequency acoustic wave fields by Gaussian beam superposition.

Lagrangian (ray-based) and Eulerian (phase-space level-set) pipelines for the
asymptotic solution of u_tt = c(x)^2 Lap u with oscillatory data, plus the
exact/reference solutions and energy-norm machinery used to verify the
advertised convergence rates.
"""

__version__ = "0.1.0"

from .medium import (Branch, ConstantSpeed, GaussianBumpSpeed, MediumModel,
                     PhaseSpacePoint, SineSpeed, eval_speed, hamiltonian,
                     hamiltonian_blocks, hamiltonian_third_blocks,
                     medium_from_config)
from .beams import (BeamFamily, BeamState, VariationalFrame, beam_rhs,
                    hessian_from_frame, make_initial_state, propagate,
                    propagate_family, propagate_variational)
from .synthesis import (InitialData, PolarGrid, SuperpositionConfig,
                        UniformGrid, WaveField, beam_value,
                        build_initial_manifold, launch_families,
                        residual_coefficients, residual_field,
                        resolution_spacing, split_initial_amplitudes,
                        superpose, superpose_at_points, taylor_phase)
from .presets import preset_initial_data, radial3d_profile
from .validation import (ConvergenceProblem, ConvergenceReport, DAlembert1D,
                         EnergyNorm, Hankel2DRadial, Spherical3D,
                         convergence_study, energy_norm, fd_reference,
                         fit_loglog, l2_norm, residual_norm)
from .phasespace import (LevelSetBundle, PhaseGrid, advance, eulerian_superpose,
                         init_bundle, liouville_step, reconstruct_hessian,
                         sample_on_zero_set)
from .kernels import engine
