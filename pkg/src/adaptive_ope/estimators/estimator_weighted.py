# Copyright 2022 The adaptive-ope Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""
Variance-weighted estimators. Every period's augmented term is weighted by the inverse square root of an estimate of
its conditional variance, which standardizes the martingale and yields a normal limit without requiring the behavior
policy to converge.
"""
from typing import Optional, Sequence, Tuple

import numpy as np

from ..configuration_utils import ConfigMixin, register_to_config
from ..core import EstimateReport, HistoricalLog, PolicyFunction
from ..envs.environment_utils import EvaluationCovariates
from ..nuisance.nuisance_utils import NuisanceSequence
from ..utils import logging
from .estimator_utils import (
    DEFAULT_EPSILON,
    OffPolicyEstimator,
    VarianceWeights,
    augmented_terms,
    default_theta_sequence,
    evaluation_probs,
    floor_variances,
    lagged,
    register_estimator,
    running_weighted_means,
    variance_estimate,
    weighted_report,
)


logger = logging.get_logger(__name__)


def a3ipw_estimate(
    log: HistoricalLog,
    pi_e: PolicyFunction,
    nuisances: NuisanceSequence,
    weights: VarianceWeights,
    alpha: float = 0.05,
    method: str = "a3ipw",
) -> EstimateReport:
    """
    Weighted mean `(sum_t 1/sqrt(g_t))^-1 sum_t q_t / sqrt(g_t)` of the augmented terms with given weights.

    Args:
        log ([`HistoricalLog`]): the logged data.
        pi_e ([`PolicyFunction`]): evaluation policy.
        nuisances ([`NuisanceSequence`]): sequential outcome models.
        weights ([`VarianceWeights`]): one weight per period of the log.
        alpha (`float`, defaults to 0.05): level of the interval.
    """
    if len(weights) != log.T:
        raise ValueError(f"{len(weights)} variance weights for a log of {log.T} periods")
    pi_e_probs = evaluation_probs(log, pi_e)
    f_hat, _ = nuisances.predict_logged(log.contexts)
    terms = augmented_terms(log, pi_e_probs, f_hat)
    return weighted_report(log, pi_e_probs, terms, weights, method=method, alpha=alpha)


def _check_theta_sequence(theta_sequence: Optional[Sequence[float]], log, pi_e_probs, nuisances) -> np.ndarray:
    if theta_sequence is None:
        return default_theta_sequence(log, pi_e_probs, nuisances)
    theta_sequence = np.asarray(theta_sequence, dtype=float).reshape(-1)
    if theta_sequence.shape[0] != log.T:
        raise ValueError(f"theta_sequence holds {theta_sequence.shape[0]} values for a log of {log.T} periods")
    return theta_sequence


def estimate_window_variances(
    log: HistoricalLog,
    pi_e: PolicyFunction,
    nuisances: NuisanceSequence,
    pool: EvaluationCovariates,
    periods: Sequence[int],
    theta_sequence: np.ndarray,
    epsilon: float = DEFAULT_EPSILON,
    variance_form: str = "per_arm",
    source: str = "eval-data",
) -> VarianceWeights:
    """
    Floored variance estimates `g_t` for the given periods (1-based), each from the behavior snapshot of its period,
    the outcome models of its period and `theta_sequence[t - 1]`.
    """
    if not log.has_snapshots:
        raise ValueError(
            "variance weights need the behavior policy of every period; this log carries no behavior snapshots"
        )
    if pool.d != log.d:
        raise ValueError(f"covariate pool has dimension {pool.d}, the log has dimension {log.d}")
    pi_e_probs = pi_e.probs(pool.contexts)
    g_primes = np.empty(len(periods))
    snapshot, behavior_probs = None, None
    for i, t in enumerate(periods):
        if log.snapshots[t - 1] is not snapshot:
            snapshot = log.snapshots[t - 1]
            behavior_probs = snapshot.probs(pool.contexts)
        g_primes[i] = variance_estimate(
            t,
            pool,
            pi_e,
            snapshot,
            nuisances[t],
            theta_sequence[t - 1],
            variance_form=variance_form,
            pi_e_probs=pi_e_probs,
            predictions=nuisances.predict(t, pool.contexts),
            behavior_probs=behavior_probs,
        )
    return floor_variances(g_primes, epsilon, source=source)


def fa3ipw_estimate(
    log: HistoricalLog,
    pi_e: PolicyFunction,
    nuisances: NuisanceSequence,
    eval_covariates: EvaluationCovariates,
    theta_sequence: Optional[Sequence[float]] = None,
    epsilon: float = DEFAULT_EPSILON,
    burn_in: int = 0,
    alpha: float = 0.05,
    variance_form: str = "per_arm",
    method: Optional[str] = None,
) -> EstimateReport:
    """
    Feasible A3IPW: estimates each `g_t` on the covariate pool, floors it at `epsilon` and takes the weighted mean
    over periods `burn_in + 1..T`. A positive `burn_in` gives the stabilized variant.

    Args:
        log ([`HistoricalLog`]): the logged data, with behavior snapshots.
        pi_e ([`PolicyFunction`]): evaluation policy.
        nuisances ([`NuisanceSequence`]): sequential outcome models.
        eval_covariates ([`EvaluationCovariates`]): covariate pool independent of the log.
        theta_sequence (`Sequence[float]`, *optional*):
            `theta_sequence[t - 1]` estimates the policy value from the first `t - 1` periods. Defaults to running
            A2IPW means started at 0.
        epsilon (`float`, defaults to 1e-3): floor of the weights.
        burn_in (`int`, defaults to 0): number of leading periods left out of the estimate.
        alpha (`float`, defaults to 0.05): level of the interval.
        variance_form (`str`, defaults to `"per_arm"`): see [`~estimators.estimator_utils.conditional_variance_terms`].
    """
    if not 0 <= burn_in < log.T:
        raise ValueError(f"burn_in must lie in 0..{log.T - 1}, got {burn_in}")
    if method is None:
        method = "sfa3ipw" if burn_in > 0 else "fa3ipw"
    pi_e_probs = evaluation_probs(log, pi_e)
    theta_sequence = _check_theta_sequence(theta_sequence, log, pi_e_probs, nuisances)
    periods = range(burn_in + 1, log.T + 1)
    weights = estimate_window_variances(
        log, pi_e, nuisances, eval_covariates, periods, theta_sequence, epsilon, variance_form, source="eval-data"
    )
    f_hat, _ = nuisances.predict_logged(log.contexts)
    terms = augmented_terms(log, pi_e_probs, f_hat)[burn_in:]
    return weighted_report(log, pi_e_probs, terms, weights, method=method, alpha=alpha, burn_in=burn_in)


def sfa3ipw_estimate(
    log: HistoricalLog,
    pi_e: PolicyFunction,
    nuisances: NuisanceSequence,
    eval_covariates: EvaluationCovariates,
    theta_sequence: Optional[Sequence[float]] = None,
    epsilon: float = DEFAULT_EPSILON,
    burn_in: Optional[int] = None,
    alpha: float = 0.05,
    variance_form: str = "per_arm",
) -> EstimateReport:
    """[`fa3ipw_estimate`] discarding the first `burn_in` periods, by default the first half of the log."""
    burn_in = log.T // 2 if burn_in is None else burn_in
    return fa3ipw_estimate(
        log, pi_e, nuisances, eval_covariates, theta_sequence, epsilon, burn_in, alpha, variance_form, "sfa3ipw"
    )


def fa2daipw_estimate(
    log: HistoricalLog,
    pi_e: PolicyFunction,
    nuisances: NuisanceSequence,
    eval_covariates: EvaluationCovariates,
    theta_sequence: Optional[Sequence[float]] = None,
    epsilon: float = DEFAULT_EPSILON,
    burn_in: int = 0,
    alpha: float = 0.05,
    variance_form: str = "per_arm",
) -> EstimateReport:
    """
    Feasible weighted adaptive IPW: the [`fa3ipw_estimate`] pipeline with `f_hat = 0` in both the augmented terms
    and the weights, keeping the second-moment models for `v_hat`.
    """
    return fa3ipw_estimate(
        log,
        pi_e,
        nuisances.zero_mean(),
        eval_covariates,
        theta_sequence,
        epsilon,
        burn_in,
        alpha,
        variance_form,
        method="fa2daipw",
    )


def two_step_theta_sequence(
    log: HistoricalLog, pi_e: PolicyFunction, nuisances: NuisanceSequence, g_init=1.0
) -> np.ndarray:
    """
    First pass of the two-step scheme: running weighted means with the initial weights `g_init`, lagged by one
    period and started at 0. A constant `g_init` gives running A2IPW means.
    """
    pi_e_probs = evaluation_probs(log, pi_e)
    f_hat, _ = nuisances.predict_logged(log.contexts)
    q = augmented_terms(log, pi_e_probs, f_hat)
    return lagged(running_weighted_means(q, g_init), initial=0.0)


def split_length(num_periods: int, split_ratio: float) -> int:
    """`floor(r T)`, the length of the estimation window under sample splitting."""
    if not 0.0 < split_ratio < 1.0:
        raise ValueError(f"split ratio must lie in (0, 1), got {split_ratio}")
    window = int(np.floor(split_ratio * num_periods))
    if window < 1:
        raise ValueError(f"split ratio {split_ratio} leaves no estimation period in a log of {num_periods}")
    if window == num_periods:
        raise ValueError(f"split ratio {split_ratio} leaves no covariates for variance estimation")
    return window


def sample_split_variance(
    log: HistoricalLog,
    pi_e: PolicyFunction,
    nuisances: NuisanceSequence,
    split_ratio: float = 0.5,
    theta_sequence: Optional[Sequence[float]] = None,
    epsilon: float = DEFAULT_EPSILON,
    variance_form: str = "per_arm",
) -> Tuple[VarianceWeights, int]:
    """
    Variance weights from the log itself: the contexts of periods `floor(r T) + 1..T` form the covariate pool and
    the weights cover periods `1..floor(r T)`.

    Returns:
        `Tuple[VarianceWeights, int]`: the weights and the estimation window length `floor(r T)`.
    """
    window = split_length(log.T, split_ratio)
    pi_e_probs = evaluation_probs(log, pi_e)
    theta_sequence = _check_theta_sequence(theta_sequence, log, pi_e_probs, nuisances)
    pool = EvaluationCovariates(log.contexts[window:])
    weights = estimate_window_variances(
        log, pi_e, nuisances, pool, range(1, window + 1), theta_sequence, epsilon, variance_form, "sample-split"
    )
    return weights, window


def fa3ipw_split_estimate(
    log: HistoricalLog,
    pi_e: PolicyFunction,
    nuisances: NuisanceSequence,
    split_ratio: float = 0.5,
    theta_sequence: Optional[Sequence[float]] = None,
    epsilon: float = DEFAULT_EPSILON,
    alpha: float = 0.05,
    variance_form: str = "per_arm",
    method: str = "fa3ipw_ss",
) -> EstimateReport:
    """FA3IPW over periods `1..floor(r T)` with weights from [`sample_split_variance`]; needs no covariate file."""
    weights, window = sample_split_variance(
        log, pi_e, nuisances, split_ratio, theta_sequence, epsilon, variance_form
    )
    pi_e_probs = evaluation_probs(log, pi_e)
    f_hat, _ = nuisances.predict_logged(log.contexts)
    terms = augmented_terms(log, pi_e_probs, f_hat)[:window]
    return weighted_report(log, pi_e_probs, terms, weights, method=method, alpha=alpha, split_ratio=split_ratio)


def tsfa3ipw_estimate(
    log: HistoricalLog,
    pi_e: PolicyFunction,
    nuisances: NuisanceSequence,
    eval_covariates: Optional[EvaluationCovariates] = None,
    epsilon: float = DEFAULT_EPSILON,
    g_init=1.0,
    burn_in: int = 0,
    alpha: float = 0.05,
    variance_form: str = "per_arm",
    split_ratio: Optional[float] = None,
) -> EstimateReport:
    """
    Two-step FA3IPW. Pass 1 runs weighted means with the initial weights `g_init` to get `theta_{t-1}` for every
    period; pass 2 is FA3IPW fed with those values.

    Args:
        eval_covariates ([`EvaluationCovariates`], *optional*):
            covariate pool for the weights. When omitted, `split_ratio` must be given and the weights come from
            sample splitting.
        g_init (`float` or `np.ndarray`, defaults to 1.0): strictly positive initial weights of pass 1.
        split_ratio (`float`, *optional*): `r` of the sample-splitting variance source.
    """
    if np.any(np.asarray(g_init, dtype=float) <= 0):
        raise ValueError(f"initial variance weights must be strictly positive, got {g_init}")
    theta_sequence = two_step_theta_sequence(log, pi_e, nuisances, g_init)
    if eval_covariates is None:
        if split_ratio is None:
            raise ValueError("tsfa3ipw needs evaluation covariates or a split ratio")
        return fa3ipw_split_estimate(
            log, pi_e, nuisances, split_ratio, theta_sequence, epsilon, alpha, variance_form, method="tsfa3ipw"
        )
    return fa3ipw_estimate(
        log, pi_e, nuisances, eval_covariates, theta_sequence, epsilon, burn_in, alpha, variance_form, "tsfa3ipw"
    )


class WeightedEstimatorMixin(OffPolicyEstimator):
    needs_snapshots = True
    needs_eval_covariates = True

    def theta_sequence(self, log, pi_e, nuisances):
        """Pass-1 values when the estimator runs in two-step mode, `None` (running A2IPW means) otherwise."""
        if not self.config.two_step:
            return None
        return two_step_theta_sequence(log, pi_e, nuisances, self.config.g_init)

    @staticmethod
    def _require_covariates(eval_covariates, name):
        if eval_covariates is None:
            raise ValueError(f"{name} needs evaluation covariates")


@register_estimator
class FA3IPWEstimator(WeightedEstimatorMixin, ConfigMixin):
    """
    Configurable [`fa3ipw_estimate`].

    Args:
        epsilon (`float`, defaults to 1e-3): floor of the weights.
        burn_in (`int`, defaults to 0): discarded leading periods.
        alpha (`float`, defaults to 0.05): level of the interval.
        variance_form (`str`, defaults to `"per_arm"`): `"per_arm"` or `"pooled"`.
        two_step (`bool`, defaults to `False`): feed the two-step pass-1 values instead of running A2IPW means.
        g_init (`float`, defaults to 1.0): initial weights of the two-step pass.
    """

    estimator_name = "fa3ipw"

    @register_to_config
    def __init__(
        self,
        epsilon: float = DEFAULT_EPSILON,
        burn_in: int = 0,
        alpha: float = 0.05,
        variance_form: str = "per_arm",
        two_step: bool = False,
        g_init: float = 1.0,
    ):
        if epsilon <= 0:
            raise ValueError(f"epsilon must be strictly positive, got {epsilon}")

    def estimate(self, log, pi_e, nuisances=None, eval_covariates=None, **kwargs):
        self._require_covariates(eval_covariates, self.estimator_name)
        return fa3ipw_estimate(
            log,
            pi_e,
            nuisances,
            eval_covariates,
            theta_sequence=self.theta_sequence(log, pi_e, nuisances),
            epsilon=self.config.epsilon,
            burn_in=self.config.burn_in,
            alpha=self.config.alpha,
            variance_form=self.config.variance_form,
            method=self.estimator_name,
        )


@register_estimator
class SFA3IPWEstimator(WeightedEstimatorMixin, ConfigMixin):
    """Configurable [`sfa3ipw_estimate`]; `burn_in=None` discards the first half of each log."""

    estimator_name = "sfa3ipw"

    @register_to_config
    def __init__(
        self,
        epsilon: float = DEFAULT_EPSILON,
        burn_in: Optional[int] = None,
        alpha: float = 0.05,
        variance_form: str = "per_arm",
        two_step: bool = False,
        g_init: float = 1.0,
    ):
        if epsilon <= 0:
            raise ValueError(f"epsilon must be strictly positive, got {epsilon}")

    def estimate(self, log, pi_e, nuisances=None, eval_covariates=None, **kwargs):
        self._require_covariates(eval_covariates, self.estimator_name)
        return sfa3ipw_estimate(
            log,
            pi_e,
            nuisances,
            eval_covariates,
            theta_sequence=self.theta_sequence(log, pi_e, nuisances),
            epsilon=self.config.epsilon,
            burn_in=self.config.burn_in,
            alpha=self.config.alpha,
            variance_form=self.config.variance_form,
        )


@register_estimator
class FA2daIPWEstimator(WeightedEstimatorMixin, ConfigMixin):
    """Configurable [`fa2daipw_estimate`]; the two-step pass also runs with a zero outcome model."""

    estimator_name = "fa2daipw"

    @register_to_config
    def __init__(
        self,
        epsilon: float = DEFAULT_EPSILON,
        burn_in: int = 0,
        alpha: float = 0.05,
        variance_form: str = "per_arm",
        two_step: bool = False,
        g_init: float = 1.0,
    ):
        if epsilon <= 0:
            raise ValueError(f"epsilon must be strictly positive, got {epsilon}")

    def estimate(self, log, pi_e, nuisances=None, eval_covariates=None, **kwargs):
        self._require_covariates(eval_covariates, self.estimator_name)
        return fa2daipw_estimate(
            log,
            pi_e,
            nuisances,
            eval_covariates,
            theta_sequence=self.theta_sequence(log, pi_e, nuisances.zero_mean()),
            epsilon=self.config.epsilon,
            burn_in=self.config.burn_in,
            alpha=self.config.alpha,
            variance_form=self.config.variance_form,
        )


@register_estimator
class TSFA3IPWEstimator(WeightedEstimatorMixin, ConfigMixin):
    """
    Configurable [`tsfa3ipw_estimate`]. With `split_ratio` set the weights come from sample splitting and no
    covariate pool is needed.
    """

    estimator_name = "tsfa3ipw"

    @register_to_config
    def __init__(
        self,
        epsilon: float = DEFAULT_EPSILON,
        g_init: float = 1.0,
        burn_in: int = 0,
        alpha: float = 0.05,
        variance_form: str = "per_arm",
        split_ratio: Optional[float] = None,
    ):
        if g_init <= 0:
            raise ValueError(f"g_init must be strictly positive, got {g_init}")

    def estimate(self, log, pi_e, nuisances=None, eval_covariates=None, **kwargs):
        if self.config.split_ratio is None:
            self._require_covariates(eval_covariates, self.estimator_name)
        return tsfa3ipw_estimate(
            log,
            pi_e,
            nuisances,
            eval_covariates if self.config.split_ratio is None else None,
            epsilon=self.config.epsilon,
            g_init=self.config.g_init,
            burn_in=self.config.burn_in,
            alpha=self.config.alpha,
            variance_form=self.config.variance_form,
            split_ratio=self.config.split_ratio,
        )


@register_estimator
class SplitFA3IPWEstimator(WeightedEstimatorMixin, ConfigMixin):
    """Configurable [`fa3ipw_split_estimate`]."""

    estimator_name = "fa3ipw_ss"
    needs_eval_covariates = False

    @register_to_config
    def __init__(
        self,
        split_ratio: float = 0.5,
        epsilon: float = DEFAULT_EPSILON,
        alpha: float = 0.05,
        variance_form: str = "per_arm",
        two_step: bool = True,
        g_init: float = 1.0,
    ):
        if not 0.0 < split_ratio < 1.0:
            raise ValueError(f"split_ratio must lie in (0, 1), got {split_ratio}")

    def estimate(self, log, pi_e, nuisances=None, eval_covariates=None, **kwargs):
        return fa3ipw_split_estimate(
            log,
            pi_e,
            nuisances,
            split_ratio=self.config.split_ratio,
            theta_sequence=self.theta_sequence(log, pi_e, nuisances),
            epsilon=self.config.epsilon,
            alpha=self.config.alpha,
            variance_form=self.config.variance_form,
        )
