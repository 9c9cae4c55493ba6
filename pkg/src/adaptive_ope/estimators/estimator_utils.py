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
Shared machinery of the estimators: the augmented (doubly robust) per-period term, variance weights and their floor,
the conditional variance estimate over a covariate pool, and normal confidence intervals.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Type, Union

import numpy as np
from scipy.stats import norm

from ..core import EstimateReport, HistoricalLog, LoggedSample, OverlapError, PolicyFunction, max_importance_ratio
from ..envs.environment_utils import EvaluationCovariates
from ..nuisance.nuisance_utils import VARIANCE_FLOOR, NuisancePair, NuisanceSequence
from ..utils import logging


logger = logging.get_logger(__name__)

ESTIMATOR_CONFIG_NAME = "estimator_config.json"
DEFAULT_EPSILON = 1e-3
VARIANCE_FORMS = ("per_arm", "pooled")


@dataclass(frozen=True)
class ScoreInputs:
    """Inputs of the per-period score: a logged sample, the evaluation policy, outcome models and `theta`."""

    sample: LoggedSample
    pi_e: PolicyFunction
    nuisance: NuisancePair
    theta: float = 0.0

    def __post_init__(self):
        if self.nuisance.fitted_through > self.sample.t - 1:
            raise ValueError(
                f"outcome models fit through period {self.nuisance.fitted_through} cannot score period "
                f"{self.sample.t}"
            )


def score(inp: ScoreInputs) -> float:
    """
    `sum_a [pi_e(a|x) 1[A=a] (y - f(a, x)) / pi_t(a|x) + pi_e(a|x) f(a, x)] - theta`.

    Raises:
        `OverlapError` if the realized action was logged with zero probability.
    """
    sample = inp.sample
    propensity = sample.propensities[sample.a]
    if propensity <= 0.0:
        raise OverlapError(f"period {sample.t}: action {sample.a} was logged with probability {propensity}")
    pi_e = inp.pi_e.prob(sample.x)
    f_hat, _ = inp.nuisance.predict(sample.x.reshape(1, -1))
    f_hat = f_hat[0]
    residual = pi_e[sample.a] * (sample.y - f_hat[sample.a]) / propensity
    return float(residual + np.sum(pi_e * f_hat) - inp.theta)


def augmented_terms(log: HistoricalLog, pi_e_probs: np.ndarray, f_hat: np.ndarray) -> np.ndarray:
    """
    Per-period augmented terms `q_t` (the score at `theta = 0`) for the whole log.

    Args:
        log ([`HistoricalLog`]): the logged data.
        pi_e_probs (`np.ndarray` of shape `(T, K)`): `pi_e(. | x_t)`.
        f_hat (`np.ndarray` of shape `(T, K)`): `f_hat_{t-1}(., x_t)`.
    """
    rows = np.arange(log.T)
    propensities = log.propensities[rows, log.actions]
    if np.any(propensities <= 0.0):
        t = int(np.flatnonzero(propensities <= 0.0)[0]) + 1
        raise OverlapError(f"period {t}: the realized action was logged with probability 0")
    residuals = pi_e_probs[rows, log.actions] * (log.rewards - f_hat[rows, log.actions]) / propensities
    return residuals + np.sum(pi_e_probs * f_hat, axis=1)


@dataclass
class VarianceWeights:
    """
    Per-period variance weights `g_t` over an estimation window.

    Args:
        g (`np.ndarray`): weights, all at least `epsilon`.
        source (`str`): `"known"`, `"eval-data"`, `"sample-split"` or `"initializer"`.
        epsilon (`float`): the floor.
        floor_hits (`int`): how many raw estimates fell below the floor.
    """

    g: np.ndarray
    source: str
    epsilon: float = DEFAULT_EPSILON
    floor_hits: int = 0

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float).reshape(-1)
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be strictly positive, got {self.epsilon}")
        if np.any(self.g < self.epsilon) or not np.all(np.isfinite(self.g)):
            raise ValueError(f"variance weights must be finite and at least epsilon={self.epsilon}")

    def __len__(self) -> int:
        return self.g.shape[0]


def floor_variance(g_prime: float, epsilon: float = DEFAULT_EPSILON) -> float:
    """`g = max(g', epsilon)`."""
    return max(float(g_prime), epsilon)


def floor_variances(g_primes: Sequence[float], epsilon: float = DEFAULT_EPSILON, source: str = "eval-data"):
    """Floors a sequence of raw estimates and counts the activations."""
    g_primes = np.asarray(g_primes, dtype=float)
    hits = int(np.sum(g_primes < epsilon))
    if hits:
        logger.info(f"variance floor epsilon={epsilon} was active in {hits} of {g_primes.shape[0]} periods")
    return VarianceWeights(np.maximum(g_primes, epsilon), source=source, epsilon=epsilon, floor_hits=hits)


def conditional_variance_terms(
    pi_e_probs: np.ndarray,
    behavior_probs: np.ndarray,
    f_values: np.ndarray,
    v_values: np.ndarray,
    theta: float,
    variance_form: str = "per_arm",
) -> np.ndarray:
    """
    Per-context conditional variance of the augmented term.

    `per_arm`: `sum_a [pi_e^2 v / pi_t + (pi_e f - theta)^2]`.
    `pooled`: `sum_a pi_e^2 v / pi_t + (sum_a pi_e f - theta)^2`, the exact conditional variance when `f` and `v` are
    the true moments.
    """
    if variance_form not in VARIANCE_FORMS:
        raise ValueError(f"variance_form must be one of {VARIANCE_FORMS}, got {variance_form!r}")
    needed = (pi_e_probs > 0) & (v_values > 0)
    if np.any(needed & (behavior_probs <= 0)):
        raise OverlapError("the behavior policy puts zero probability on an action the evaluation policy plays")
    safe = np.where(behavior_probs > 0, behavior_probs, 1.0)
    spread = np.sum(np.where(needed, pi_e_probs**2 * v_values / safe, 0.0), axis=1)
    if variance_form == "per_arm":
        return spread + np.sum((pi_e_probs * f_values - theta) ** 2, axis=1)
    return spread + (np.sum(pi_e_probs * f_values, axis=1) - theta) ** 2


def variance_estimate(
    t: int,
    eval_covariates: EvaluationCovariates,
    pi_e: PolicyFunction,
    behavior: PolicyFunction,
    nuisance: NuisancePair,
    theta_prev: float,
    variance_form: str = "per_arm",
    pi_e_probs: Optional[np.ndarray] = None,
    predictions: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    behavior_probs: Optional[np.ndarray] = None,
) -> float:
    """
    `g'_t`: the covariate-pool average of the conditional variance of period `t`'s augmented term, with
    `v_hat = max(e_hat - f_hat^2, 1e-6)`.

    Args:
        t (`int`): period index.
        eval_covariates ([`EvaluationCovariates`]): the pool `E_N`, independent of the periods it scores.
        pi_e ([`PolicyFunction`]): evaluation policy.
        behavior ([`PolicyFunction`]): the behavior snapshot `pi_t`.
        nuisance ([`NuisancePair`]): outcome models fit through `t - 1`.
        theta_prev (`float`): estimate of the policy value from `Omega_{t-1}`.
        variance_form (`str`): `"per_arm"` or `"pooled"`, see [`conditional_variance_terms`].
        pi_e_probs, predictions, behavior_probs: precomputed values on the pool, to skip recomputation.
    """
    if eval_covariates is None or len(eval_covariates) == 0:
        raise ValueError("variance_estimate needs a nonempty covariate pool")
    if nuisance.fitted_through > t - 1:
        raise ValueError(f"outcome models fit through period {nuisance.fitted_through} cannot weight period {t}")
    contexts = eval_covariates.contexts
    if pi_e_probs is None:
        pi_e_probs = pi_e.probs(contexts)
    if behavior_probs is None:
        behavior_probs = behavior.probs(contexts)
    f_values, e_values = nuisance.predict(contexts) if predictions is None else predictions
    v_values = np.maximum(e_values - f_values**2, VARIANCE_FLOOR)
    terms = conditional_variance_terms(pi_e_probs, behavior_probs, f_values, v_values, theta_prev, variance_form)
    return eval_covariates.average(terms)


def running_means(q: np.ndarray) -> np.ndarray:
    """`theta_t = (1 / t) sum_{s <= t} q_s` for every `t`."""
    q = np.asarray(q, dtype=float)
    return np.cumsum(q) / np.arange(1, q.shape[0] + 1)


def running_weighted_means(q: np.ndarray, g: Union[float, np.ndarray]) -> np.ndarray:
    """Running inverse-root-variance weighted means; constant weights reduce to [`running_means`]."""
    q = np.asarray(q, dtype=float)
    g = np.broadcast_to(np.asarray(g, dtype=float), q.shape)
    if np.any(g <= 0):
        raise ValueError("initial variance weights must be strictly positive")
    if np.all(g == g[0]):
        return running_means(q)
    inverse_root = 1.0 / np.sqrt(g)
    return np.cumsum(inverse_root * q) / np.cumsum(inverse_root)


def lagged(values: np.ndarray, initial: float = 0.0) -> np.ndarray:
    """`[initial, v_1, ..., v_{T-1}]`: the estimate available before each period."""
    values = np.asarray(values, dtype=float)
    return np.concatenate([[initial], values[:-1]])


def weighted_mean(q: np.ndarray, g: np.ndarray) -> float:
    """`(sum 1/sqrt(g))^-1 sum q / sqrt(g)`; equal weights take the plain mean so the two coincide exactly."""
    if np.all(g == g[0]):
        return float(np.mean(q))
    inverse_root = 1.0 / np.sqrt(g)
    return float(np.sum(inverse_root * q) / np.sum(inverse_root))


def standardized_denominator(g: np.ndarray) -> float:
    """`(1 / sqrt(T)) sum_t 1 / sqrt(g_t)` over the window."""
    return float(np.sum(1.0 / np.sqrt(g)) / np.sqrt(g.shape[0]))


def ci_half_width(g: np.ndarray, alpha: float = 0.05) -> float:
    """`z_{1 - alpha/2} sqrt(T) / sum_t 1 / sqrt(g_t)`."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    g = np.asarray(g, dtype=float)
    if g.size == 0:
        raise ValueError("confidence_interval needs variance weights")
    return float(norm.ppf(1.0 - alpha / 2.0) / standardized_denominator(g))


def confidence_interval(theta_hat: float, g: np.ndarray, alpha: float = 0.05) -> Tuple[float, float]:
    half_width = ci_half_width(g, alpha)
    return theta_hat - half_width, theta_hat + half_width


def evaluation_probs(log: HistoricalLog, pi_e: PolicyFunction) -> np.ndarray:
    if pi_e.num_actions != log.K:
        raise ValueError(f"evaluation policy has {pi_e.num_actions} actions, the log has {log.K}")
    return pi_e.probs(log.contexts)


def unweighted_report(
    log: HistoricalLog, pi_e_probs: np.ndarray, terms: np.ndarray, method: str, **diagnostics
) -> EstimateReport:
    return EstimateReport(
        theta_hat=float(np.mean(terms)),
        method=method,
        diagnostics={
            "max_importance_ratio": max_importance_ratio(log, pi_e_probs),
            "window_length": int(terms.shape[0]),
            **diagnostics,
        },
    )


def weighted_report(
    log: HistoricalLog,
    pi_e_probs: np.ndarray,
    terms: np.ndarray,
    weights: VarianceWeights,
    method: str,
    alpha: float = 0.05,
    burn_in: int = 0,
    **diagnostics,
) -> EstimateReport:
    """Inverse-root-variance weighted mean of `terms` with its standardized statistic and normal interval."""
    g = weights.g
    if g.shape[0] != terms.shape[0]:
        raise ValueError(f"{g.shape[0]} variance weights for an estimation window of {terms.shape[0]} periods")
    theta_hat = weighted_mean(terms, g)
    ci_low = ci_high = None
    if terms.shape[0] > 1:
        ci_low, ci_high = confidence_interval(theta_hat, g, alpha)
    else:
        logger.warning(f"{method}: the estimation window has a single period, the confidence interval is suppressed")
    return EstimateReport(
        theta_hat=theta_hat,
        method=method,
        weights=g,
        standardized_stat_denominator=standardized_denominator(g),
        ci_low=ci_low,
        ci_high=ci_high,
        alpha=alpha,
        burn_in=burn_in,
        diagnostics={
            "max_importance_ratio": max_importance_ratio(log, pi_e_probs),
            "floor_hits": weights.floor_hits,
            "window_length": int(terms.shape[0]),
            "variance_source": weights.source,
            **diagnostics,
        },
    )


def default_theta_sequence(log: HistoricalLog, pi_e_probs: np.ndarray, nuisances: NuisanceSequence) -> np.ndarray:
    """`theta_{t-1}` for every period from running A2IPW means, starting at 0."""
    f_hat, _ = nuisances.predict_logged(log.contexts)
    return lagged(running_means(augmented_terms(log, pi_e_probs, f_hat)))


class OffPolicyEstimator(ABC):
    """
    Mixin for the configurable estimator classes. Subclasses set `estimator_name` and implement `estimate`.

    Class attributes:
        - **estimator_name** (`str`) -- registry key and the `method` tag of the reports.
        - **needs_snapshots** (`bool`) -- whether the estimator queries past behavior policies on new contexts.
        - **needs_eval_covariates** (`bool`) -- whether the estimator needs an independent covariate pool.
    """

    config_name = ESTIMATOR_CONFIG_NAME
    estimator_name: str = None
    needs_snapshots = False
    needs_eval_covariates = False

    @abstractmethod
    def estimate(
        self,
        log: HistoricalLog,
        pi_e: PolicyFunction,
        nuisances: Optional[NuisanceSequence] = None,
        eval_covariates: Optional[EvaluationCovariates] = None,
        **kwargs,
    ) -> EstimateReport:
        raise NotImplementedError


ESTIMATORS: Dict[str, Type[OffPolicyEstimator]] = {}


def register_estimator(cls: Type[OffPolicyEstimator]) -> Type[OffPolicyEstimator]:
    ESTIMATORS[cls.estimator_name] = cls
    return cls


def get_estimator(name: str, **kwargs) -> OffPolicyEstimator:
    if name not in ESTIMATORS:
        raise ValueError(f"unknown estimator {name!r}; available estimators: {sorted(ESTIMATORS)}")
    return ESTIMATORS[name](**kwargs)
