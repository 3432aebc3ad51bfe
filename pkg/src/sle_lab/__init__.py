"""Radial multiple SLE driving simulations, measure-driven Loewner solvers,
and the deterministic Burgers limit on the unit circle."""

__version__ = "0.1.0"

from .driving import (
    ParticleState,
    SimulationConfig,
    angular_drift,
    build_L,
    simulate,
    step,
    weight_profile_check,
)
from .limits import (
    ALREADY_FULL,
    ConvergenceReport,
    cdf_relation_check,
    convergence_study,
    full_support_detect,
    support_time,
    v0_derivative,
)
from .loewner import (
    DrivingPath,
    LimitDrivingPath,
    Swallowed,
    derivative_at_zero,
    forward_flow,
    forward_flow_grid,
    hull_boundary,
    reverse_flow,
    reverse_flow_grid,
    trace_curves,
)
from .measures import (
    CircleMeasure,
    HerglotzField,
    MomentSequence,
    circle_distance,
    eta_eval,
    herglotz_eval,
    invert_density,
    moments,
    psi_eval,
)
from .semigroup import (
    GeneratorS,
    characteristic_solve,
    coefficient_ode,
    eta_semigroup,
    eta_series_from_moments,
    flow_field,
    free_mult_convolve,
    is_free_infdiv,
    long_time_limit_check,
    moment_hierarchy,
    moments_from_eta_series,
    monotone_convolve,
    semigroup_sigma_series,
    sigma_transform,
)
from .series import SeriesMap

__all__ = [name for name in dir() if not name.startswith("_")]
