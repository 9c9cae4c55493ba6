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
"""Exact per-period variances on finite-support environments, and the A3IPW estimator that uses them."""
from typing import Optional, Union

import numpy as np

from ..configuration_utils import ConfigMixin, register_to_config
from ..core import EstimateReport, HistoricalLog, PolicyFunction
from ..envs.environment_utils import BanditEnvironment, EnvironmentSupport, true_policy_value
from ..nuisance.nuisance_utils import NuisanceSequence
from .estimator_utils import (
    DEFAULT_EPSILON,
    OffPolicyEstimator,
    VarianceWeights,
    conditional_variance_terms,
    floor_variances,
    register_estimator,
)
from .estimator_weighted import a3ipw_estimate


def _support_of(env_or_support: Union[BanditEnvironment, EnvironmentSupport]) -> EnvironmentSupport:
    support = env_or_support if isinstance(env_or_support, EnvironmentSupport) else env_or_support.support
    if support is None:
        raise ValueError(f"{env_or_support.__class__.__name__} has no finite support; exact variances are unavailable")
    return support


def oracle_sigma_star(
    env_or_support: Union[BanditEnvironment, EnvironmentSupport],
    behavior: PolicyFunction,
    pi_e: PolicyFunction,
    theta0: float,
    variance_form: str = "per_arm",
) -> float:
    """
    Exact `sigma*_t^2 = E[sum_a {pi_e(a|X)^2 v*(a, X) / pi_t(a|X) + (pi_e(a|X) f*(a, X) - theta0)^2}]` by summation
    over the support, for the behavior snapshot `behavior` of period `t`.
    """
    support = _support_of(env_or_support)
    terms = conditional_variance_terms(
        pi_e.probs(support.contexts),
        behavior.probs(support.contexts),
        support.means,
        support.variances,
        theta0,
        variance_form,
    )
    return float(np.sum(support.weights * terms))


def oracle_variance_weights(
    env: BanditEnvironment,
    log: HistoricalLog,
    pi_e: PolicyFunction,
    theta0: Optional[float] = None,
    epsilon: float = DEFAULT_EPSILON,
    variance_form: str = "per_arm",
) -> VarianceWeights:
    """Known weights `g_t = max(sigma*_t^2, epsilon)` for every period of a log carrying behavior snapshots."""
    if not log.has_snapshots:
        raise ValueError("oracle variance weights need the behavior snapshot of every period")
    support = _support_of(env)
    theta0 = true_policy_value(env, pi_e) if theta0 is None else theta0
    sigmas = np.empty(log.T)
    previous, value = None, None
    for i, snapshot in enumerate(log.snapshots):
        if snapshot is not previous:
            previous, value = snapshot, oracle_sigma_star(support, snapshot, pi_e, theta0, variance_form)
        sigmas[i] = value
    weights = floor_variances(sigmas, epsilon, source="known")
    return weights


def efficiency_bound(env_or_support, behavior: PolicyFunction, pi_e: PolicyFunction) -> float:
    """
    Semiparametric variance bound for a time-invariant behavior policy,
    `E[sum_a pi_e^2 v* / pi + (sum_a pi_e f* - theta0)^2]`. Reported as a diagnostic only.
    """
    support = _support_of(env_or_support)
    pi_e_probs = pi_e.probs(support.contexts)
    theta0 = float(np.sum(support.weights * np.sum(pi_e_probs * support.means, axis=1)))
    terms = conditional_variance_terms(
        pi_e_probs, behavior.probs(support.contexts), support.means, support.variances, theta0, "pooled"
    )
    return float(np.sum(support.weights * terms))


@register_estimator
class OracleA3IPWEstimator(OffPolicyEstimator, ConfigMixin):
    """
    A3IPW with the exact per-period variances of a finite-support environment. The environment is passed to
    `estimate` through the `env` keyword.
    """

    estimator_name = "a3ipw"
    needs_snapshots = True

    @register_to_config
    def __init__(self, epsilon: float = DEFAULT_EPSILON, alpha: float = 0.05, variance_form: str = "per_arm"):
        if epsilon <= 0:
            raise ValueError(f"epsilon must be strictly positive, got {epsilon}")

    def estimate(
        self,
        log: HistoricalLog,
        pi_e: PolicyFunction,
        nuisances: Optional[NuisanceSequence] = None,
        eval_covariates=None,
        env: Optional[BanditEnvironment] = None,
        theta0: Optional[float] = None,
        **kwargs,
    ) -> EstimateReport:
        if env is None:
            raise ValueError("oracle a3ipw needs the environment that generated the log")
        weights = oracle_variance_weights(
            env, log, pi_e, theta0, epsilon=self.config.epsilon, variance_form=self.config.variance_form
        )
        return a3ipw_estimate(log, pi_e, nuisances, weights, alpha=self.config.alpha)
