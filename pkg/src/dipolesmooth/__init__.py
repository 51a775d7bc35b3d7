"""Trans-dimensional particle filtering and double two-filter smoothing
for tracking an unknown, time-varying number of current dipoles from
MEG-style sensor time series."""

from .geometry import (
    Dipole,
    DipoleState,
    GeometryError,
    Leadfield,
    LeadfieldFileError,
    SensorArray,
    SourceGrid,
    build_grid,
    build_sensor_cap,
    load_leadfield,
    load_sensors,
    predict_data,
    sarvas_leadfield,
    save_leadfield,
    save_sensors,
)
from .model import (
    DipoleModel,
    LocationKernel,
    ModelParams,
    isotropic_noise_cov,
    likelihood_logpdf,
    prior_logpdf,
    sample_prior,
    sample_transition,
    transition_logpdf,
)
from .smc import (
    FilterDegenerateError,
    FilterRun,
    ParticleCloud,
    backward_filter,
    effective_sample_size,
    forward_filter,
    resample,
)
from .smoother import (
    IncompatibleSupportError,
    SmootherDegenerateError,
    SmoothingRun,
    run_double_smoother,
    select,
    smooth_on_backward_support,
    smooth_on_forward_support,
    subsample,
)
from .estimator import (
    PointEstimate,
    error_curve,
    estimate_cardinality,
    estimate_locations,
    estimate_moment,
    intensity_map,
    localization_error,
    point_estimate,
)
from .simgen import SimulationSpec, SimulationTruth, generate, snr
from .oracle import (
    DiscreteHMM,
    DiscreteHMMBundle,
    ScalarLGBundle,
    ScalarLGModel,
    hmm_brute_force_smoothing,
    hmm_exact,
    kalman_filter,
    rts_smoother,
)

__version__ = "0.1.0"
