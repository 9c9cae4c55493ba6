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
from typing import Any, Dict, List, Optional, Union

import numpy as np
from scipy.stats import truncnorm

from ..configuration_utils import ConfigMixin, register_to_config
from ..core import PolicyFunction
from ..utils import logging
from .environment_utils import BanditEnvironment, EnvironmentSupport


logger = logging.get_logger(__name__)

ENVIRONMENT_CONFIG_NAME = "environment_config.json"

BOUNDED_NOISE_KINDS = ("none", "truncated_gaussian", "bernoulli")
UNBOUNDED_NOISE_KINDS = ("gaussian", "normal", "laplace", "student_t")


class SyntheticEnvironment(BanditEnvironment, ConfigMixin):
    """
    Linear-mean synthetic bandit with a known ground truth.

    The conditional mean of arm `a` is `arm_weights[a] . x + arm_intercepts[a]` (clipped to `[0, 1]` for Bernoulli
    rewards). Contexts come either from a finite set with known probabilities, which enables the exact oracles, or
    from an isotropic Gaussian law.

    [`~ConfigMixin`] stores every argument of `__init__`, they can be read back through `env.config` and the
    environment can be rebuilt with [`~ConfigMixin.from_config`].

    Args:
        num_actions (`int`): K.
        dim (`int`): d.
        arm_weights (`List[List[float]]`, *optional*): `K x d` slopes, zeros by default.
        arm_intercepts (`List[float]`, *optional*): `K` intercepts, zeros by default.
        context_law (`str`): `"finite"` or `"gaussian"`.
        contexts (`List[List[float]]`, *optional*): the finite support; drawn from the Gaussian law with
            `context_seed` when omitted.
        num_contexts (`int`): size of the drawn finite support.
        context_probs (`List[float]`, *optional*): probabilities of the finite contexts, uniform by default.
        context_mean (`float` or `List[float]`), context_scale (`float`): parameters of the Gaussian law.
        context_seed (`int`): seed used to draw the finite support.
        noise (`str`): `"none"`, `"truncated_gaussian"` or `"bernoulli"`. Unbounded laws are rejected.
        noise_scale (`float`): standard deviation of the Gaussian before truncation.
        noise_bound (`float`, *optional*): truncation point `c`, the noise lives on `[-c, c]`; `2 * noise_scale` by
            default.
        reward_bound (`float`): C2; draws outside `[-C2, C2]` are clipped and counted.
    """

    config_name = ENVIRONMENT_CONFIG_NAME

    @register_to_config
    def __init__(
        self,
        num_actions: int = 2,
        dim: int = 1,
        arm_weights: Optional[List[List[float]]] = None,
        arm_intercepts: Optional[List[float]] = None,
        context_law: str = "finite",
        contexts: Optional[List[List[float]]] = None,
        num_contexts: int = 10,
        context_probs: Optional[List[float]] = None,
        context_mean: Union[float, List[float]] = 0.0,
        context_scale: float = 1.0,
        context_seed: int = 0,
        noise: str = "none",
        noise_scale: float = 0.1,
        noise_bound: Optional[float] = None,
        reward_bound: float = 1.0,
    ):
        if noise in UNBOUNDED_NOISE_KINDS:
            raise ValueError(
                f"noise law {noise!r} is unbounded; rewards must satisfy |Y| <= reward_bound, use one of "
                f"{BOUNDED_NOISE_KINDS}"
            )
        if noise not in BOUNDED_NOISE_KINDS:
            raise NotImplementedError(f"{noise} noise is not implemented for {self.__class__}")
        if context_law not in ("finite", "gaussian"):
            raise NotImplementedError(f"{context_law} context law is not implemented for {self.__class__}")
        if reward_bound <= 0:
            raise ValueError(f"reward_bound must be strictly positive, got {reward_bound}")

        self.num_actions = num_actions
        self.dim = dim
        self.reward_bound = float(reward_bound)
        self._noise = noise

        self._weights = np.zeros((num_actions, dim)) if arm_weights is None else np.array(arm_weights, dtype=float)
        self._intercepts = np.zeros(num_actions) if arm_intercepts is None else np.array(arm_intercepts, dtype=float)
        if self._weights.shape != (num_actions, dim) or self._intercepts.shape != (num_actions,):
            raise ValueError(
                f"arm_weights must be {num_actions}x{dim} and arm_intercepts of length {num_actions}, got "
                f"{self._weights.shape} and {self._intercepts.shape}"
            )
        self._context_mean = np.broadcast_to(np.asarray(context_mean, dtype=float), (dim,)).copy()

        if noise == "truncated_gaussian":
            if noise_scale <= 0:
                raise ValueError(f"noise_scale must be strictly positive, got {noise_scale}")
            bound = 2.0 * noise_scale if noise_bound is None else float(noise_bound)
            self._noise_law = truncnorm(-bound / noise_scale, bound / noise_scale, loc=0.0, scale=noise_scale)
            self._noise_variance = float(self._noise_law.var())
            self._noise_bound = bound
        else:
            self._noise_law = None
            self._noise_variance = 0.0
            self._noise_bound = 0.0

        self._contexts = None
        self._context_probs = None
        if context_law == "finite":
            if contexts is None:
                draw = np.random.default_rng(context_seed).standard_normal((num_contexts, dim))
                support = self._context_mean + context_scale * draw
            else:
                support = np.array(contexts, dtype=float, ndmin=2)
            if support.shape[1] != dim:
                raise ValueError(f"contexts have dimension {support.shape[1]}, expected {dim}")
            probs = np.full(support.shape[0], 1.0 / support.shape[0]) if context_probs is None else context_probs
            probs = np.asarray(probs, dtype=float)
            if probs.shape != (support.shape[0],) or np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
                raise ValueError("context_probs must be a probability vector over the finite contexts")
            self._contexts = support
            self._context_probs = probs / probs.sum()

            peak = np.max(np.abs(self.mean_rewards(support))) + self._noise_bound
            if peak > self.reward_bound:
                logger.warning(
                    f"reward draws can reach {peak:.4g} > reward_bound={self.reward_bound}; clipped draws bias the "
                    "analytic conditional moments"
                )

    def linear_means(self, contexts: np.ndarray) -> np.ndarray:
        return np.atleast_2d(contexts) @ self._weights.T + self._intercepts

    def mean_rewards(self, contexts):
        means = self.linear_means(contexts)
        if self._noise == "bernoulli":
            means = np.clip(means, 0.0, 1.0)
        return means

    def reward_variances(self, contexts: np.ndarray) -> np.ndarray:
        means = self.mean_rewards(contexts)
        if self._noise == "bernoulli":
            return means * (1.0 - means)
        return np.full_like(means, self._noise_variance)

    def second_moments(self, contexts):
        return self.mean_rewards(contexts) ** 2 + self.reward_variances(contexts)

    def linear_parameters(self):
        """Copies of the `K x d` slopes and `K` intercepts of the arm means."""
        return self._weights.copy(), self._intercepts.copy()

    @property
    def noise_variance(self) -> float:
        """Variance of the additive noise (zero for Bernoulli and noiseless rewards)."""
        return self._noise_variance

    def sample_context(self, rng):
        if self._contexts is not None:
            return self._contexts[rng.choice(self._contexts.shape[0], p=self._context_probs)].copy()
        return self._context_mean + self.config.context_scale * rng.standard_normal(self.dim)

    def sample_reward(self, rng, a, x, row=None):
        mean = self.mean_rewards(np.reshape(x, (1, -1)))[0, a]
        if self._noise == "bernoulli":
            return float(rng.random() < mean)
        if self._noise == "truncated_gaussian":
            return float(mean + self._noise_law.rvs(random_state=rng))
        return float(mean)

    @property
    def support(self):
        if self._contexts is None:
            return None
        return EnvironmentSupport(
            contexts=self._contexts,
            weights=self._context_probs,
            means=self.mean_rewards(self._contexts),
            second_moments=self.second_moments(self._contexts),
        )

    def closed_form_value(self, pi_e: PolicyFunction) -> float:
        if self.config.context_law == "gaussian" and pi_e.context_free and self._noise != "bernoulli":
            probs = pi_e.prob(np.zeros(self.dim))
            return float(probs @ self.linear_means(self._context_mean)[0])
        return super().closed_form_value(pi_e)


def make_synthetic_env(spec: Union[Dict[str, Any], str, os.PathLike], **kwargs) -> SyntheticEnvironment:
    """Builds a [`SyntheticEnvironment`] from a config dictionary, a JSON file or a directory holding one."""
    return SyntheticEnvironment.from_config(spec, **kwargs)
