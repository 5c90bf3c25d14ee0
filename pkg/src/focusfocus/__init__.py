"""Numerical toolkit for 2-DOF integrable systems near a focus-focus
equilibrium: rotation numbers, period lattices, twist, monodromy, and
frequency-map non-degeneracy."""

from .errors import (BracketError, BranchError, CrossEngineMismatch,
                     FitError, FlowError, FocusFocusError, NoTorusError,
                     QuadratureError, ScanError, StencilError,
                     SystemRejected, TurningPointDegeneracy, WindowError)
from .numerics import (EventSpec, QuadratureSpec, Trajectory, align_angle,
                       fd_derivative, find_root_bracketed, integrate_flow,
                       quad_singular)
from .systems import (ChampagneBottle, EMValue, FocusFocusData,
                      ReducedProfile, SphericalPendulum, SystemDefinition,
                      eval_constants, make_system, poisson_bracket,
                      turning_points)
from .lattice import (AsymptoticModel, MomentumValue, PeriodLatticeSample,
                      SweepSample, annulus_sweep, cross_check,
                      fit_asymptotic_model, from_momentum_chart,
                      period_lattice, reduced_period_rotation,
                      to_momentum_chart)
from .rotation import (AnnulusRegion, LevelCurve, RectRegion, RotationGrid,
                       SpiralFit, extract_level_curve, fit_log_spiral,
                       monodromy_index, rotation_grid, rotation_number)
from .twist import (TorusInvariants, TwistlessCurve, TwistlessSample,
                    expected_twistless_slope, tilde_s, torus_invariants,
                    twist, twist_via_j_chart, twistless_curve,
                    twistless_point)
from .kolmogorov import (FrequencySample, asymptote_sweep, frequency_jacobian_det,
                         frequency_map, tau_jacobian)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
