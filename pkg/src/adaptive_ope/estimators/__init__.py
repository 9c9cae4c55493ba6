from .estimator_baselines import (
    A2IPWEstimator,
    AdaIPWEstimator,
    DMEstimator,
    a2ipw_estimate,
    adaipw_estimate,
    dm_estimate,
)
from .estimator_oracle import OracleA3IPWEstimator, efficiency_bound, oracle_sigma_star, oracle_variance_weights
from .estimator_utils import (
    DEFAULT_EPSILON,
    ESTIMATORS,
    VARIANCE_FORMS,
    OffPolicyEstimator,
    ScoreInputs,
    VarianceWeights,
    augmented_terms,
    ci_half_width,
    conditional_variance_terms,
    confidence_interval,
    floor_variance,
    floor_variances,
    get_estimator,
    running_means,
    running_weighted_means,
    score,
    variance_estimate,
    weighted_mean,
)
from .estimator_weighted import (
    FA2daIPWEstimator,
    FA3IPWEstimator,
    SFA3IPWEstimator,
    SplitFA3IPWEstimator,
    TSFA3IPWEstimator,
    a3ipw_estimate,
    fa2daipw_estimate,
    fa3ipw_estimate,
    fa3ipw_split_estimate,
    sample_split_variance,
    sfa3ipw_estimate,
    split_length,
    tsfa3ipw_estimate,
    two_step_theta_sequence,
)
