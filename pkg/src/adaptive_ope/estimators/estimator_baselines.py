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
import numpy as np

from ..configuration_utils import ConfigMixin, register_to_config
from ..core import EstimateReport, HistoricalLog, PolicyFunction
from ..nuisance.nuisance_utils import NuisanceSequence
from .estimator_utils import (
    OffPolicyEstimator,
    augmented_terms,
    evaluation_probs,
    register_estimator,
    unweighted_report,
)


def dm_estimate(log: HistoricalLog, pi_e: PolicyFunction, nuisances: NuisanceSequence) -> EstimateReport:
    """
    Direct method: `(1 / T) sum_t sum_a pi_e(a|x_t) f_hat_{t-1}(a, x_t)`. No interval is attached.
    """
    pi_e_probs = evaluation_probs(log, pi_e)
    f_hat, _ = nuisances.predict_logged(log.contexts)
    return unweighted_report(log, pi_e_probs, np.sum(pi_e_probs * f_hat, axis=1), method="dm")


def adaipw_estimate(log: HistoricalLog, pi_e: PolicyFunction) -> EstimateReport:
    """
    Adaptive IPW: `(1 / T) sum_t pi_e(A_t|x_t) Y_t / pi_t(A_t|x_t)`, the augmented mean with a zero outcome model.
    """
    pi_e_probs = evaluation_probs(log, pi_e)
    terms = augmented_terms(log, pi_e_probs, np.zeros((log.T, log.K)))
    return unweighted_report(log, pi_e_probs, terms, method="adaipw")


def a2ipw_estimate(log: HistoricalLog, pi_e: PolicyFunction, nuisances: NuisanceSequence) -> EstimateReport:
    """
    Adaptive AIPW: the unweighted mean of the per-period augmented terms, each built with outcome models fit on the
    strict past of its period.
    """
    pi_e_probs = evaluation_probs(log, pi_e)
    f_hat, _ = nuisances.predict_logged(log.contexts)
    return unweighted_report(log, pi_e_probs, augmented_terms(log, pi_e_probs, f_hat), method="a2ipw")


@register_estimator
class DMEstimator(OffPolicyEstimator, ConfigMixin):
    estimator_name = "dm"

    @register_to_config
    def __init__(self):
        pass

    def estimate(self, log, pi_e, nuisances=None, eval_covariates=None, **kwargs):
        if nuisances is None:
            raise ValueError("the direct method needs outcome models")
        return dm_estimate(log, pi_e, nuisances)


@register_estimator
class AdaIPWEstimator(OffPolicyEstimator, ConfigMixin):
    estimator_name = "adaipw"

    @register_to_config
    def __init__(self):
        pass

    def estimate(self, log, pi_e, nuisances=None, eval_covariates=None, **kwargs):
        return adaipw_estimate(log, pi_e)


@register_estimator
class A2IPWEstimator(OffPolicyEstimator, ConfigMixin):
    estimator_name = "a2ipw"

    @register_to_config
    def __init__(self):
        pass

    def estimate(self, log, pi_e, nuisances=None, eval_covariates=None, **kwargs):
        if nuisances is None:
            raise ValueError("a2ipw needs outcome models")
        return a2ipw_estimate(log, pi_e, nuisances)
