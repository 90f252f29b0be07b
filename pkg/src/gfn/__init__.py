"""Stochastic (Ornstein-Uhlenbeck) model of the free scalar field and its analytic checks."""

__version__ = "0.1.0"

from .analytic import (  # noqa: E402
    CoincidentPointError,
    SpacetimePoint,
    field_mode_correlation,
    mode_correlation,
    scaled_time_expectation,
    schwinger2_continuum,
    schwinger2_modesum,
    schwinger2_quadrature,
    schwingerN,
    wick_pairings,
)
from .continuation import (  # noqa: E402
    continued_mode_correlation,
    continued_two_point,
    feynman_propagator,
    lorentz_invariance_check,
    npoint_continued,
)
from .lattice import ModeSet, PhysicalParams, build_mode_set, mode_energy, mode_rate  # noqa: E402
from .rng import RngPolicy  # noqa: E402
from .sim import (  # noqa: E402
    CorrelatorEstimate,
    EnsembleConfig,
    estimate_field_npoint,
    estimate_mode_autocorr,
    field_value,
    ou_step,
    simulate_trajectory,
    stationary_sample,
)
