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
from typing import Sequence

import numpy as np

from ..configuration_utils import ConfigMixin, register_to_config
from ..core import PolicyFunction
from .policy_utils import AdaptivePolicy


def linucb_scores(
    contexts: np.ndarray, thetas: Sequence[np.ndarray], design_inverses: Sequence[np.ndarray], exploration: float
) -> np.ndarray:
    """`x . theta_a + alpha * sqrt(x^T A_a^-1 x)` for every context and arm, shape `(n, K)`."""
    contexts = np.atleast_2d(contexts)
    scores = np.empty((contexts.shape[0], len(thetas)))
    for a, (theta, design_inverse) in enumerate(zip(thetas, design_inverses)):
        width = np.einsum("ij,jk,ik->i", contexts, design_inverse, contexts)
        scores[:, a] = contexts @ theta + exploration * np.sqrt(np.maximum(width, 0.0))
    return scores


def one_hot_argmax(scores: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, ties go to the lowest index
    scores = np.atleast_2d(scores)
    probs = np.zeros_like(scores, dtype=float)
    probs[np.arange(scores.shape[0]), np.argmax(scores, axis=1)] = 1.0
    return probs


class LinUCBSnapshot(PolicyFunction):
    """Frozen LinUCB policy of one period. Shares the (never mutated) per-arm arrays of the live policy."""

    kind = "behavior-snapshot"

    def __init__(self, thetas, design_inverses, exploration: float):
        super().__init__(num_actions=len(thetas), dim=thetas[0].shape[0])
        self.thetas = tuple(thetas)
        self.design_inverses = tuple(design_inverses)
        self.exploration = exploration

    def _compute_probs(self, contexts):
        return one_hot_argmax(linucb_scores(contexts, self.thetas, self.design_inverses, self.exploration))


class LinUCBPolicy(AdaptivePolicy, ConfigMixin):
    """
    LinUCB with one ridge regression per arm.

    Arm `a` keeps `A_a = ridge * I + sum x x^T` and `b_a = sum y x` over the periods it was played. The policy is
    one-hot on `argmax_a x . theta_a + exploration * sqrt(x^T A_a^-1 x)` with `theta_a = A_a^-1 b_a`, ties broken by
    the lowest arm index. `A_a^-1` is kept by Sherman-Morrison rank-one updates. Every update allocates fresh arrays
    for the played arm instead of writing in place, so snapshots keep references instead of copies; the memory held
    by a log's snapshots therefore grows with `T * d^2`.

    Args:
        num_actions (`int`): number of arms K.
        dim (`int`): context dimension d.
        ridge (`float`, defaults to 1.0): regularization `lambda > 0`.
        exploration (`float`, defaults to 1.0): width multiplier `alpha >= 0`.
    """

    @register_to_config
    def __init__(self, num_actions: int = 2, dim: int = 1, ridge: float = 1.0, exploration: float = 1.0):
        if ridge <= 0:
            raise ValueError(f"ridge must be strictly positive, got {ridge}")
        if exploration < 0:
            raise ValueError(f"exploration must be non-negative, got {exploration}")
        self.num_actions = num_actions
        self._design_inverses = [np.eye(dim) / ridge for _ in range(num_actions)]
        self._responses = [np.zeros(dim) for _ in range(num_actions)]
        self._thetas = [np.zeros(dim) for _ in range(num_actions)]
        self._counts = np.zeros(num_actions, dtype=int)

    @property
    def counts(self) -> np.ndarray:
        return self._counts.copy()

    def scores(self, x: np.ndarray) -> np.ndarray:
        return linucb_scores(np.reshape(x, (1, -1)), self._thetas, self._design_inverses, self.config.exploration)[0]

    def current(self, x):
        return one_hot_argmax(self.scores(x))[0]

    def update(self, x, a, y):
        x = np.asarray(x, dtype=float).reshape(-1)
        design_inverse = self._design_inverses[a]
        projected = design_inverse @ x
        self._design_inverses[a] = design_inverse - np.outer(projected, projected) / (1.0 + x @ projected)
        self._responses[a] = self._responses[a] + y * x
        self._thetas[a] = self._design_inverses[a] @ self._responses[a]
        self._counts[a] += 1

    def snapshot(self):
        return LinUCBSnapshot(list(self._thetas), list(self._design_inverses), self.config.exploration)


def linucb_policy(
    num_actions: int, dim: int, ridge: float = 1.0, exploration: float = 1.0, rng: np.random.Generator = None
) -> LinUCBPolicy:
    # LinUCB is deterministic given its history, the generator is accepted for a uniform factory signature
    return LinUCBPolicy(num_actions=num_actions, dim=dim, ridge=ridge, exploration=exploration)
