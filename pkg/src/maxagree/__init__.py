"""Maximum agreement linear prediction.

Fit linear predictors that maximize the concordance correlation with the
response (alongside the classical least-squares predictor), quantify
their uncertainty with closed-form asymptotics, the jackknife, and the
bootstrap, build confidence and prediction intervals, and reproduce the
associated Monte Carlo studies.
"""

from .avar import (
    avar_normal,
    delta_method_avar,
    kernel_h,
    kernel_h_tilde,
    theta_from_summary,
    ustat_sigma_h,
)
from .dataio import ingest_csv
from .errors import (
    BCaDegenerate,
    ColumnNotFound,
    ConfigError,
    DegenerateAgreement,
    DegenerateInput,
    DimensionMismatch,
    ExcessiveResampleFailure,
    MaxagreeError,
    NumericalGradientFailure,
    ParseError,
    SingularCovariance,
    TooFewRows,
    TooManyPredictors,
    ZeroVariance,
)
from .intervals import (
    CI_METHODS,
    CoverageResult,
    IntervalEstimate,
    IntervalMethod,
    ci,
    coverage_probe,
    pi,
)
from .metrics import PerformanceTriple, best_subsets, evaluate, split_evaluate
from .moments import (
    Dataset,
    MomentSummary,
    ccc,
    mahalanobis_sq,
    multiple_correlation,
    pcc,
    population_ccc,
    sample_moments,
)
from .predictor import (
    FittedModel,
    LinearPredictor,
    PredictorKind,
    calibrate_from_lslp,
    fit,
    population_lslp,
    population_malp,
    predict,
)
from .resample import (
    BootstrapResult,
    ResamplePlan,
    bootstrap_replicates,
    bootstrap_se,
    jackknife_replicates,
    jackknife_se,
)
from .simulate import (
    PARAMETER_SETS,
    BivariateParams,
    PredictionPoints,
    SimulationConfig,
    SimulationReport,
    contour_points,
    coverage_study_truth,
    decile_points,
    experiment_coverage,
    experiment_fixed_locations,
    experiment_predictive_comparison,
    experiment_sampling_distribution,
    mvn_sample,
    run_experiment,
    table_set_dataset,
    trivariate_truth,
)

__version__ = "0.1.0"
