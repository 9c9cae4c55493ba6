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
import json
import os
from abc import ABC, abstractmethod
from typing import Any, Dict, Union

import numpy as np

from ..core import ConstantPolicy, PolicyFunction, check_probability_vectors
from ..utils import logging


logger = logging.get_logger(__name__)

POLICY_CONFIG_NAME = "policy_config.json"


class AdaptivePolicy(ABC):
    """
    Mixin for behavior policies that are updated from past observations.

    `current(x)` is `pi_t(. | x, Omega_{t-1})`; `update(x, a, y)` folds in the observation of period `t`;
    `snapshot()` freezes the policy of the current period into an immutable [`PolicyFunction`] so that it can later
    be queried on arbitrary contexts. An instance is single-owner state confined to one log-generation task.
    """

    config_name = POLICY_CONFIG_NAME
    num_actions: int

    @abstractmethod
    def current(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @abstractmethod
    def update(self, x: np.ndarray, a: int, y: float):
        raise NotImplementedError

    @abstractmethod
    def snapshot(self) -> PolicyFunction:
        raise NotImplementedError


class StaticPolicy(AdaptivePolicy):
    """A time-invariant behavior policy: updates are ignored."""

    def __init__(self, policy: PolicyFunction):
        self.policy = policy
        self.num_actions = policy.num_actions

    def current(self, x):
        return self.policy.prob(x)

    def update(self, x, a, y):
        pass

    def snapshot(self):
        return self.policy


class CyclicPolicy(AdaptivePolicy):
    """
    Context-free schedule that plays `vectors[0]` for `block_length` periods, then `vectors[1]`, and so on, cycling.
    The schedule is fixed in advance, so the per-period variance of the augmented terms changes in a known way.
    """

    def __init__(self, vectors, block_length: int = 1):
        if block_length < 1:
            raise ValueError(f"block_length must be at least 1, got {block_length}")
        vectors = np.array(vectors, dtype=float, ndmin=2)
        check_probability_vectors(vectors, strictly_positive=True, what="cyclic schedule")
        self.policies = [ConstantPolicy(v, kind="behavior-snapshot") for v in vectors]
        self.block_length = int(block_length)
        self.num_actions = vectors.shape[1]
        self._period = 0

    def _active(self) -> ConstantPolicy:
        return self.policies[(self._period // self.block_length) % len(self.policies)]

    def current(self, x):
        return self._active().vector.copy()

    def update(self, x, a, y):
        self._period += 1

    def snapshot(self):
        return self._active()


def uniform_policy(num_actions: int) -> ConstantPolicy:
    """The uniform random policy `1 / K` on every action."""
    if num_actions < 2:
        raise ValueError(f"the uniform policy needs at least two actions, got {num_actions}")
    return ConstantPolicy(np.full(num_actions, 1.0 / num_actions))


class MixturePolicyFunction(PolicyFunction):
    """`weight * inner(x) + (1 - weight) / K`, a fixed mixture with the uniform policy."""

    def __init__(self, inner: PolicyFunction, weight: float, kind: str = None):
        if not 0.0 <= weight <= 1.0:
            raise ValueError(f"mixture weight must lie in [0, 1], got {weight}")
        super().__init__(num_actions=inner.num_actions, dim=inner.dim)
        self.inner = inner
        self.weight = float(weight)
        self.kind = inner.kind if kind is None else kind

    def _compute_probs(self, contexts):
        return self.weight * self.inner.probs(contexts) + (1.0 - self.weight) / self.num_actions

    def to_dict(self):
        return {"kind": "mixture", "weight": self.weight, "inner": self.inner.to_dict()}


class MixturePolicy(AdaptivePolicy):
    """
    Mixes an adaptive policy with the uniform policy. With `weight < 1` every entry is at least `(1 - weight) / K`,
    which bounds the importance ratio of any evaluation policy by `K / (1 - weight)`.
    """

    def __init__(self, inner: AdaptivePolicy, weight: float):
        if not 0.0 <= weight <= 1.0:
            raise ValueError(f"mixture weight must lie in [0, 1], got {weight}")
        self.inner = inner
        self.weight = float(weight)
        self.num_actions = inner.num_actions

    def current(self, x):
        return self.weight * np.asarray(self.inner.current(x), dtype=float) + (1.0 - self.weight) / self.num_actions

    def update(self, x, a, y):
        self.inner.update(x, a, y)

    def snapshot(self):
        return MixturePolicyFunction(self.inner.snapshot(), self.weight, kind="behavior-snapshot")


def mixture_policy(
    adaptive: Union[AdaptivePolicy, PolicyFunction], weight: float
) -> Union[MixturePolicy, MixturePolicyFunction]:
    """Wraps an adaptive policy (or a fixed policy function) into its mixture with the uniform policy."""
    if isinstance(adaptive, PolicyFunction):
        return MixturePolicyFunction(adaptive, weight)
    return MixturePolicy(adaptive, weight)


def policy_from_dict(config: Dict[str, Any], kind: str = "evaluation") -> PolicyFunction:
    """Rebuilds a policy function written by `PolicyFunction.to_dict`."""
    policy_kind = config.get("kind")
    if policy_kind == "constant":
        vector = np.asarray(config["probs"], dtype=float)
        check_probability_vectors(vector, what="serialized constant policy")
        return ConstantPolicy(vector, kind=kind)
    if policy_kind == "mixture":
        return MixturePolicyFunction(policy_from_dict(config["inner"], kind=kind), config["weight"], kind=kind)
    if policy_kind == "linear_argmax":
        from .policy_logistic import LinearArgmaxPolicy

        policy = LinearArgmaxPolicy(config["coef"], config["intercept"])
        policy.kind = kind
        return policy
    raise ValueError(f"unknown policy kind {policy_kind!r}; expected one of constant, mixture, linear_argmax")


def save_policy(policy: PolicyFunction, path: Union[str, os.PathLike]):
    with open(path, "w", encoding="utf-8") as writer:
        writer.write(json.dumps(policy.to_dict(), indent=2) + "\n")
    logger.info(f"Policy saved in {path}")


def load_policy(path: Union[str, os.PathLike], kind: str = "evaluation") -> PolicyFunction:
    with open(path, "r", encoding="utf-8") as reader:
        config = json.load(reader)
    return policy_from_dict(config, kind=kind)
