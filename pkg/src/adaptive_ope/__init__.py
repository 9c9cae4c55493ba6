__version__ = "0.1.0.dev0"

from .configuration_utils import ConfigMixin, FrozenDict, register_to_config
from .core import (
    AssumptionViolation,
    ConstantPolicy,
    EstimateReport,
    HistoricalLog,
    ImportanceRatioBound,
    LoggedSample,
    OverlapError,
    PolicyFunction,
    PolicyOutputError,
    StructuralError,
    max_importance_ratio,
    validate_log,
)
from .envs import (
    BanditEnvironment,
    ClassificationEnvironment,
    EvaluationCovariates,
    SyntheticEnvironment,
    classification_to_bandit,
    generate_log,
    load_log_jsonl,
    make_synthetic_env,
    save_log_jsonl,
    true_policy_value,
)
from .estimators import (
    ESTIMATORS,
    A2IPWEstimator,
    AdaIPWEstimator,
    DMEstimator,
    FA2daIPWEstimator,
    FA3IPWEstimator,
    OracleA3IPWEstimator,
    SFA3IPWEstimator,
    SplitFA3IPWEstimator,
    TSFA3IPWEstimator,
    VarianceWeights,
    a2ipw_estimate,
    a3ipw_estimate,
    adaipw_estimate,
    confidence_interval,
    dm_estimate,
    efficiency_bound,
    fa2daipw_estimate,
    fa3ipw_estimate,
    fa3ipw_split_estimate,
    floor_variance,
    get_estimator,
    oracle_sigma_star,
    score,
    sfa3ipw_estimate,
    tsfa3ipw_estimate,
    variance_estimate,
)
from .harness import (
    ExperimentConfig,
    ResultTable,
    emit_table,
    load_experiment_config,
    run_acceptance,
    run_experiment,
)
from .ingest import (
    ClassificationDataset,
    LibsvmParseError,
    parse_libsvm,
    save_libsvm,
    serialize_libsvm,
    standardize_features,
)
from .nuisance import (
    KNNRegressor,
    NadarayaWatsonRegressor,
    NuisancePair,
    NuisanceSequence,
    oracle_nuisance,
    sequential_nuisance,
    zero_nuisance,
)
from .policies import (
    CyclicPolicy,
    LinearArgmaxPolicy,
    LinUCBPolicy,
    MixturePolicy,
    RandomWalkPolicy,
    fit_evaluation_policy,
    load_policy,
    mixture_policy,
    save_policy,
    uniform_policy,
)
from .utils import logging
