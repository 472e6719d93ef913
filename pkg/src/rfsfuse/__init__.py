"""Multi-sensor multi-target tracking and arithmetic-average PHD fusion.

Gaussian-mixture PHD, multi-Bernoulli and labeled multi-Bernoulli filters
plus a centralized fusion stage that averages their unlabeled PHDs by
refitting only the local Gaussian component weights.
"""

from .gm import (
    CrossTermTable,
    DegenerateCovarianceError,
    DimensionMismatchError,
    GaussianComponent,
    GaussianMixture,
    eval_gaussian,
    gaussian_eval_count,
    gm_isd,
    gm_isd_curvature,
    gm_isd_gradient,
    gm_mass,
    gm_reduce,
    reset_gaussian_eval_count,
)
from .rfs import (
    BernoulliComponent,
    DuplicateLabelError,
    LMBPosterior,
    MBPosterior,
    TrackLabel,
    UnifiedGM,
    lmb_to_unified,
    mb_to_unified,
    poisson_phd,
    scatter_weights,
)
from .models import (
    BirthModel,
    MotionModel,
    SensorModel,
    clutter_intensity,
    cv_predict,
    linear_update,
    make_cv_model,
    make_linear_sensor,
    make_mb_birth,
    make_range_bearing_sensor,
    range_bearing,
    ut_update,
    wrap_angle,
)
from .filters import (
    Caps,
    FilterState,
    lmb_extract,
    lmb_predict,
    lmb_update,
    make_filter_state,
    mb_extract,
    mb_predict,
    mb_update,
    phd_extract,
    phd_predict,
    phd_update,
)
from .fusion import (
    FusionConfig,
    FusionSnapshot,
    bfom_weight,
    build_cross_terms,
    build_snapshot,
    cardinality_consensus,
    converged,
    feedback_mb_lmb,
    feedback_phd,
    fit_objective,
    fuse_once,
    learning_rate_update,
    sweep,
    uniform_config,
)
from .metrics import OspaResult, ospa
from .scenario import (
    ScenarioConfig,
    ScenarioError,
    TargetSchedule,
    default_scenario,
    generate_measurements,
    generate_truth,
    measurement_stream,
)
from .harness import (
    ExperimentConfig,
    ResultTable,
    grand_mean_ospa,
    load_config,
    run_experiment,
    write_diagnostics,
    write_results,
)

__version__ = "0.1.0"
