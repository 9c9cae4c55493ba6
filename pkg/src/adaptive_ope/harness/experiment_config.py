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
import os
from typing import Any, Dict, List, Optional

from ..configuration_utils import ConfigMixin, register_to_config
from ..estimators.estimator_utils import ESTIMATORS, VARIANCE_FORMS
from ..utils import EXPERIMENT_CONFIG_NAME, logging, seed_from_env


logger = logging.get_logger(__name__)

DEFAULT_ENV_SPEC = {
    "type": "synthetic",
    "num_actions": 3,
    "dim": 2,
    "arm_weights": [[0.3, 0.0], [0.0, 0.3], [-0.2, -0.2]],
    "arm_intercepts": [0.4, 0.4, 0.5],
    "context_law": "finite",
    "num_contexts": 20,
    "context_seed": 0,
    "noise": "truncated_gaussian",
    "noise_scale": 0.1,
    "reward_bound": 1.5,
}
DEFAULT_BEHAVIOR_SPEC = {"type": "rw", "weight": 0.7, "step_sd": 0.05, "floor": 1e-3}
DEFAULT_EVALUATION_SPEC = {"weight": 0.7}
DEFAULT_NUISANCE_SPEC = {"method": "nw", "refit_every": 10}
DEFAULT_ESTIMATORS = ["dm", "adaipw", "a2ipw", "fa3ipw", "sfa3ipw", "tsfa3ipw", "fa2daipw"]

ENV_TYPES = ("synthetic", "dataset")
BEHAVIOR_TYPES = ("rw", "linucb", "uniform")
EVALUATION_TYPES = ("logistic", "best_arm", "uniform", "constant")
NUISANCE_METHODS = ("nw", "knn", "oracle", "zero")


class ExperimentConfig(ConfigMixin):
    """
    Everything that determines a replication experiment. Together with `base_seed` it fixes every emitted number
    except the timing columns.

    Args:
        env (`dict`, *optional*):
            `{"type": "synthetic", **SyntheticEnvironment kwargs}` or `{"type": "dataset", "path": ..., "standardize":
            true, "with_replacement": false, "max_rows": null}`.
        behavior (`dict`, *optional*):
            `{"type": "rw" | "linucb" | "uniform", "weight": 0.7, ...}`; the adaptive policy is mixed with the uniform
            policy using `weight`. Remaining keys go to the policy (`step_sd`, `floor`, `ridge`, `exploration`).
        evaluation (`dict`, *optional*):
            `{"type": "logistic" | "best_arm" | "uniform" | "constant", "weight": 0.7, ...}`. `logistic` fits the
            classifier on a row split disjoint from the bandit rows (dataset environments) or on contexts labelled by
            their best arm (synthetic environments).
        nuisance (`dict`, *optional*):
            `{"method": "nw" | "knn" | "oracle" | "zero", "refit_every": 10, ...}`; remaining keys go to the regressor.
        num_periods (`int`, defaults to 1000): T.
        num_covariates (`int`, defaults to 1000): N, size of the evaluation covariate pool.
        split_ratio (`float`, defaults to 0.5): r of the sample-splitting estimator.
        burn_in (`int`, *optional*): B of the stabilized estimator; `T // 2` when omitted.
        epsilon (`float`, defaults to 1e-3): floor of the variance weights.
        g_init (`float`, defaults to 1.0): initial weights of the two-step pass.
        alpha (`float`, defaults to 0.05): level of the intervals.
        estimators (`List[str]`): estimator names, see [`~estimators.ESTIMATORS`].
        num_replications (`int`, defaults to 20): R.
        base_seed (`int`, defaults to 0): replication `i` uses the seed `base_seed ^ i`.
        two_step (`bool`, defaults to `True`): run FA3IPW, SFA3IPW and FA2daIPW on two-step values of the policy value.
        variance_form (`str`, defaults to `"per_arm"`): form of the conditional variance estimate.
        fit_on_log (`bool`, defaults to `False`): fit the evaluation classifier on each replication's logged rows.
        fit_fraction (`float`, defaults to 0.3): share of dataset rows reserved for the evaluation classifier.
        num_workers (`int`, defaults to 1): worker processes.
        allow_failures (`bool`, defaults to `False`): record failed replications and continue.
        output (`str`, *optional*): path of the emitted table.
    """

    config_name = EXPERIMENT_CONFIG_NAME

    @register_to_config
    def __init__(
        self,
        env: Optional[Dict[str, Any]] = None,
        behavior: Optional[Dict[str, Any]] = None,
        evaluation: Optional[Dict[str, Any]] = None,
        nuisance: Optional[Dict[str, Any]] = None,
        num_periods: int = 1000,
        num_covariates: int = 1000,
        split_ratio: float = 0.5,
        burn_in: Optional[int] = None,
        epsilon: float = 1e-3,
        g_init: float = 1.0,
        alpha: float = 0.05,
        estimators: Optional[List[str]] = None,
        num_replications: int = 20,
        base_seed: int = 0,
        two_step: bool = True,
        variance_form: str = "per_arm",
        fit_on_log: bool = False,
        fit_fraction: float = 0.3,
        num_workers: int = 1,
        allow_failures: bool = False,
        output: Optional[str] = None,
    ):
        if num_replications < 1:
            raise ValueError(f"num_replications must be at least 1, got {num_replications}")
        if num_periods < 1 or num_covariates < 1:
            raise ValueError(f"num_periods and num_covariates must be at least 1, got {num_periods}, {num_covariates}")
        if burn_in is not None and not 0 <= burn_in < num_periods:
            raise ValueError(f"burn_in must lie in 0..{num_periods - 1}, got {burn_in}")
        if not 0.0 < split_ratio < 1.0:
            raise ValueError(f"split_ratio must lie in (0, 1), got {split_ratio}")
        if epsilon <= 0 or g_init <= 0:
            raise ValueError(f"epsilon and g_init must be strictly positive, got {epsilon}, {g_init}")
        if variance_form not in VARIANCE_FORMS:
            raise ValueError(f"variance_form must be one of {VARIANCE_FORMS}, got {variance_form!r}")
        if num_workers < 1:
            raise ValueError(f"num_workers must be at least 1, got {num_workers}")
        unknown = [name for name in (estimators or DEFAULT_ESTIMATORS) if name not in ESTIMATORS]
        if unknown:
            raise ValueError(f"unknown estimators {unknown}; available estimators: {sorted(ESTIMATORS)}")

        env_spec = env or DEFAULT_ENV_SPEC
        if env_spec.get("type", "synthetic") not in ENV_TYPES:
            raise ValueError(f"env type must be one of {ENV_TYPES}, got {env_spec.get('type')!r}")
        if env_spec.get("type") == "dataset":
            path = env_spec.get("path")
            if path is None or not os.path.isfile(path):
                raise ValueError(f"dataset file {path!r} does not exist")
        if (behavior or DEFAULT_BEHAVIOR_SPEC).get("type", "rw") not in BEHAVIOR_TYPES:
            raise ValueError(f"behavior type must be one of {BEHAVIOR_TYPES}, got {behavior.get('type')!r}")
        if (evaluation or {}).get("type", "logistic") not in EVALUATION_TYPES:
            raise ValueError(f"evaluation type must be one of {EVALUATION_TYPES}, got {evaluation.get('type')!r}")
        if (nuisance or DEFAULT_NUISANCE_SPEC).get("method", "nw") not in NUISANCE_METHODS:
            raise ValueError(f"nuisance method must be one of {NUISANCE_METHODS}, got {nuisance.get('method')!r}")

    def env_spec(self) -> Dict[str, Any]:
        return dict(self.config.env or DEFAULT_ENV_SPEC)

    def behavior_spec(self) -> Dict[str, Any]:
        return {**DEFAULT_BEHAVIOR_SPEC, **(self.config.behavior or {})}

    def evaluation_spec(self) -> Dict[str, Any]:
        """Evaluation policy spec; the type defaults to `logistic` on datasets and `best_arm` on synthetic envs."""
        spec = {**DEFAULT_EVALUATION_SPEC, **(self.config.evaluation or {})}
        spec.setdefault("type", "logistic" if self.env_spec().get("type") == "dataset" else "best_arm")
        return spec

    def nuisance_spec(self) -> Dict[str, Any]:
        return {**DEFAULT_NUISANCE_SPEC, **(self.config.nuisance or {})}

    def estimator_names(self) -> List[str]:
        return list(self.config.estimators or DEFAULT_ESTIMATORS)

    def resolved_burn_in(self) -> int:
        return self.config.num_periods // 2 if self.config.burn_in is None else self.config.burn_in

    def replace(self, **overrides) -> "ExperimentConfig":
        """A copy with some keys replaced; `None` values leave the key untouched."""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return ExperimentConfig.from_config(dict(self.config), **overrides)


def load_experiment_config(path: Optional[str] = None, seed: Optional[int] = None, **overrides) -> ExperimentConfig:
    """
    Loads a config file (or the defaults) and applies overrides. The base seed is taken from `seed`, then from the
    `OPE_SEED` environment variable, then from the file.
    """
    config_dict = {} if path is None else ExperimentConfig.get_config_dict(path)
    seed = seed if seed is not None else seed_from_env()
    if seed is not None:
        overrides["base_seed"] = seed
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return ExperimentConfig.from_config(config_dict, **overrides)
