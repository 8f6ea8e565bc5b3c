"""Numerical laboratory for a singular fast diffusion flow on the
punctured space and the conformal geometry it generates."""

__version__ = "0.1.0"

from .comparison import (InfeasibleWindow, SubsolutionConfig,
                         exponent_windows, minimal_amplitude,
                         pick_admissible_config, sandwich_margins,
                         subsolution, supersolution, verify_subsolution)
from .geometry import (EndFit, FitUnstable, GeometryProfile,
                       arc_length_profile, blowdown_diagnostics,
                       completeness_indicator, cone_slope_squared,
                       conical_order, euclidean_order, fit_end_asymptotics,
                       flow_time_from_pde, geometry_profile,
                       pde_time_from_flow, scalar_curvature, sphere_volume,
                       volume_form_limits, warping_profile,
                       yamabe_constant_sphere, yamabe_flow_residual)
from .grid import (RadialField, RadialGrid, build_ball_grid, build_grid,
                   radial_gradient, radial_laplacian)
from .params import (ConfigError, FlowParams, RegularizationConfig,
                     critical_exponent, initial_profile,
                     initial_profile_gradient, parse_config,
                     regularized_initial)
from .solver import (NewtonDivergence, PositivityLoss, SolverConfig,
                     Trajectory, export_trajectory, import_trajectory,
                     solve, solve_regularized, steady_profile,
                     steady_state_reference, step, verify_theorem_clauses)

__all__ = [name for name in dir() if not name.startswith("_")]
