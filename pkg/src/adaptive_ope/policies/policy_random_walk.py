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
from typing import Optional, Sequence, Union

import numpy as np

from ..configuration_utils import ConfigMixin, register_to_config
from ..core import ConstantPolicy
from .policy_utils import AdaptivePolicy


def clamp_and_normalize(values: np.ndarray, floor: float) -> np.ndarray:
    """
    Projects `values` onto the simplex with every entry at least `floor`. Entries below the floor are pinned to it and
    the remaining entries are rescaled to carry the rest of the mass; rescaling is repeated until no free entry falls
    below the floor. When every entry ends up pinned, the uniform vector is returned.
    """
    probs = np.maximum(np.asarray(values, dtype=float), floor)
    pinned = probs <= floor
    while True:
        free = ~pinned
        if not free.any():
            return np.full(len(probs), 1.0 / len(probs))
        free_mass = 1.0 - floor * pinned.sum()
        probs = np.where(pinned, floor, probs * (free_mass / probs[free].sum()))
        newly_pinned = free & (probs < floor)
        if not newly_pinned.any():
            return probs
        pinned |= newly_pinned


class RandomWalkPolicy(AdaptivePolicy, ConfigMixin):
    """
    Context-free random-walk behavior policy.

    The initial vector has i.i.d. Uniform(0, 1) entries, clamped at `floor` and normalized. Every update adds
    independent Gaussian noise of standard deviation `step_sd` to every entry, clamps at `floor` and renormalizes.
    The context and the observed reward are ignored, so the policy does not converge.

    Args:
        num_actions (`int`): number of actions K.
        step_sd (`float`, defaults to 0.05): standard deviation of the per-entry Gaussian step; `0` freezes the walk.
        floor (`float`, defaults to 1e-3): smallest admissible probability; `num_actions * floor` must be below one.
        seed (`int` or sequence of `int`, *optional*): seed of the policy's private generator.
        rng (`np.random.Generator`, *optional*): generator to use instead of `seed`; not stored in the config.
    """

    ignore_for_config = ["rng"]

    @register_to_config
    def __init__(
        self,
        num_actions: int = 2,
        step_sd: float = 0.05,
        floor: float = 1e-3,
        seed: Optional[Union[int, Sequence[int]]] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        if num_actions < 1:
            raise ValueError(f"num_actions must be at least 1, got {num_actions}")
        if step_sd < 0:
            raise ValueError(f"step_sd must be non-negative, got {step_sd}")
        if not 0 < floor * num_actions < 1:
            raise ValueError(f"floor={floor} must be positive with num_actions * floor < 1")
        self.num_actions = num_actions
        self._rng = rng if rng is not None else np.random.default_rng(seed)
        self._probs = clamp_and_normalize(self._rng.uniform(0.0, 1.0, size=num_actions), floor)

    @property
    def probs(self) -> np.ndarray:
        return self._probs.copy()

    def current(self, x):
        return self._probs.copy()

    def update(self, x, a, y):
        if self.config.step_sd == 0:
            return
        step = self._rng.normal(0.0, self.config.step_sd, size=self.num_actions)
        self._probs = clamp_and_normalize(self._probs + step, self.config.floor)

    def snapshot(self):
        return ConstantPolicy(self._probs.copy(), kind="behavior-snapshot")


def random_walk_policy(
    num_actions: int, step_sd: float = 0.05, rng: Optional[Union[int, np.random.Generator]] = None, floor: float = 1e-3
) -> RandomWalkPolicy:
    if isinstance(rng, np.random.Generator):
        return RandomWalkPolicy(num_actions=num_actions, step_sd=step_sd, floor=floor, rng=rng)
    return RandomWalkPolicy(num_actions=num_actions, step_sd=step_sd, floor=floor, seed=rng)
