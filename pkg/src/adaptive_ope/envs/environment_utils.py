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
import copy
import json
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from ..core import HistoricalLog, PolicyFunction, PolicyOutputError, check_probability_vectors
from ..policies.policy_utils import AdaptivePolicy, StaticPolicy, policy_from_dict
from ..utils import logging


logger = logging.get_logger(__name__)


@dataclass(frozen=True)
class EnvironmentSupport:
    """
    Finite context law with exact conditional moments, used by the exact oracles.

    Args:
        contexts (`np.ndarray` of shape `(M, d)`)
        weights (`np.ndarray` of shape `(M,)`): probabilities of the contexts, summing to one.
        means (`np.ndarray` of shape `(M, K)`): `f*(a, x_m)`.
        second_moments (`np.ndarray` of shape `(M, K)`): `e*(a, x_m)`.
    """

    contexts: np.ndarray
    weights: np.ndarray
    means: np.ndarray
    second_moments: np.ndarray

    @property
    def variances(self) -> np.ndarray:
        return np.maximum(self.second_moments - self.means**2, 0.0)

    def as_covariates(self) -> "EvaluationCovariates":
        """The whole support as a weighted covariate pool, for exact expectations."""
        return EvaluationCovariates(self.contexts, weights=self.weights)


@dataclass(frozen=True)
class EvaluationCovariates:
    """
    Covariate-only evaluation data `E_N`, independent of the historical log.

    Args:
        contexts (`np.ndarray` of shape `(N, d)`)
        weights (`np.ndarray` of shape `(N,)`, *optional*): probabilities of the contexts when the pool is a finite
            support; sample averages use equal weights when omitted.
    """

    contexts: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        contexts = np.array(self.contexts, dtype=float, ndmin=2)
        if contexts.shape[0] == 0:
            raise ValueError("evaluation covariates must be nonempty")
        contexts.setflags(write=False)
        object.__setattr__(self, "contexts", contexts)
        if self.weights is not None:
            weights = np.array(self.weights, dtype=float).reshape(-1)
            if weights.shape[0] != contexts.shape[0] or np.any(weights < 0) or not np.isclose(weights.sum(), 1.0):
                raise ValueError("covariate weights must be a probability vector over the contexts")
            weights.setflags(write=False)
            object.__setattr__(self, "weights", weights)

    def average(self, values: np.ndarray) -> float:
        """Sample mean of `values` (one per context), or the weighted mean for a weighted pool."""
        if self.weights is None:
            return float(np.mean(values))
        return float(np.sum(self.weights * values))

    def __len__(self) -> int:
        return self.contexts.shape[0]

    @property
    def d(self) -> int:
        return self.contexts.shape[1]


class BanditEnvironment(ABC):
    """
    Stationary contextual bandit law `p(x) p(y | a, x)`.

    Attributes:
        num_actions (`int`): K.
        dim (`int`): context dimension d.
        reward_bound (`float`): C2, every reward handed out satisfies `|y| <= reward_bound`.
    """

    num_actions: int
    dim: int
    reward_bound: float

    @abstractmethod
    def sample_context(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    @abstractmethod
    def sample_reward(self, rng: np.random.Generator, a: int, x: np.ndarray, row: Optional[int] = None) -> float:
        raise NotImplementedError

    @abstractmethod
    def mean_rewards(self, contexts: np.ndarray) -> np.ndarray:
        """`f*(a, x)` for a batch of contexts, shape `(n, K)`."""
        raise NotImplementedError

    @abstractmethod
    def second_moments(self, contexts: np.ndarray) -> np.ndarray:
        """`e*(a, x)` for a batch of contexts, shape `(n, K)`."""
        raise NotImplementedError

    def f_star(self, a: int, x: np.ndarray) -> float:
        return float(self.mean_rewards(np.reshape(x, (1, -1)))[0, a])

    def e_star(self, a: int, x: np.ndarray) -> float:
        return float(self.second_moments(np.reshape(x, (1, -1)))[0, a])

    @property
    def support(self) -> Optional[EnvironmentSupport]:
        """The finite context law, or `None` for continuous laws."""
        return None

    @property
    def max_periods(self) -> Optional[int]:
        """Largest number of contexts an episode can hand out, `None` when unbounded."""
        return None

    def closed_form_value(self, pi_e: PolicyFunction) -> float:
        raise NotImplementedError(
            f"{self.__class__.__name__} has no closed-form policy value for {pi_e.__class__.__name__}"
        )

    def start_episode(self, rng: np.random.Generator) -> "EnvironmentEpisode":
        return EnvironmentEpisode(self, rng)


class EnvironmentEpisode:
    """
    Single-owner stream of contexts and rewards for one replication. Clips rewards to the environment's bound and
    counts the clipping events.
    """

    def __init__(self, env: BanditEnvironment, rng: np.random.Generator):
        self.env = env
        self.rng = rng
        self.reward_clips = 0

    def next_context(self) -> Tuple[np.ndarray, Optional[int]]:
        return np.asarray(self.env.sample_context(self.rng), dtype=float), None

    def reward(self, a: int, x: np.ndarray, row: Optional[int] = None) -> float:
        y = float(self.env.sample_reward(self.rng, a, x, row))
        bound = self.env.reward_bound
        if abs(y) > bound:
            self.reward_clips += 1
            y = float(np.clip(y, -bound, bound))
        return y

    def evaluation_covariates(self, num_covariates: int) -> EvaluationCovariates:
        if num_covariates < 1:
            raise ValueError(f"need at least one evaluation covariate, got {num_covariates}")
        return EvaluationCovariates(np.stack([self.env.sample_context(self.rng) for _ in range(num_covariates)]))


def _draw_action(rng: np.random.Generator, probs: np.ndarray) -> int:
    cumulative = np.cumsum(probs)
    u = rng.random() * cumulative[-1]
    return int(min(np.searchsorted(cumulative, u, side="right"), probs.shape[0] - 1))


def generate_log(
    env: BanditEnvironment,
    behavior: Union[AdaptivePolicy, PolicyFunction],
    T: int,
    seed: Union[int, np.random.Generator, None] = None,
    episode: Optional[EnvironmentEpisode] = None,
    record_snapshots: bool = True,
) -> HistoricalLog:
    """
    Runs the sequential logging process for `T` periods.

    At period `t` a context is drawn, the behavior policy is queried for `pi_t(. | x_t, Omega_{t-1})`, the action is
    sampled from that vector, the reward is drawn, the full vector is stored and `(x_t, a_t, y_t)` is fed back to the
    behavior policy. The caller's policy object is copied first, so calling twice with the same seed gives identical
    logs.

    Args:
        env ([`BanditEnvironment`]): the environment.
        behavior ([`AdaptivePolicy`] or [`PolicyFunction`]): initialized behavior policy; static policy functions
            are wrapped in a [`StaticPolicy`].
        T (`int`): number of periods, at least 1.
        seed (`int` or `np.random.Generator`): drives contexts, actions and rewards.
        episode ([`EnvironmentEpisode`], *optional*): an already started episode (the harness draws evaluation
            covariates from the same episode).
        record_snapshots (`bool`): keep an immutable copy of the behavior policy of every period.

    Raises:
        `PolicyOutputError` naming the period when the behavior policy emits an invalid vector or a vector without
        full support.
    """
    if T < 1:
        raise ValueError(f"T must be at least 1, got {T}")
    if env.max_periods is not None and T > env.max_periods:
        raise ValueError(f"T={T} exceeds the {env.max_periods} contexts available without replacement")
    if isinstance(behavior, PolicyFunction):
        behavior = StaticPolicy(behavior)
    else:
        behavior = copy.deepcopy(behavior)
    if behavior.num_actions != env.num_actions:
        raise ValueError(f"behavior policy has {behavior.num_actions} actions, the environment {env.num_actions}")

    if episode is None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        episode = env.start_episode(rng)
    rng = episode.rng

    contexts = np.empty((T, env.dim))
    actions = np.empty(T, dtype=int)
    rewards = np.empty(T)
    propensities = np.empty((T, env.num_actions))
    rows = []
    snapshots = [] if record_snapshots else None

    for i in range(T):
        t = i + 1
        x, row = episode.next_context()
        try:
            probs = np.asarray(behavior.current(x), dtype=float)
            check_probability_vectors(probs, strictly_positive=True, what="behavior policy output")
        except PolicyOutputError as err:
            raise PolicyOutputError(str(err), period=t) from err
        if record_snapshots:
            snapshots.append(behavior.snapshot())
        a = _draw_action(rng, probs)
        y = episode.reward(a, x, row)
        contexts[i] = x
        actions[i] = a
        rewards[i] = y
        propensities[i] = probs
        rows.append(row)
        behavior.update(x, a, y)

    if episode.reward_clips:
        logger.info(f"{episode.reward_clips} reward draws were clipped to [-{env.reward_bound}, {env.reward_bound}]")
    source_rows = np.array(rows, dtype=int) if all(r is not None for r in rows) else None
    return HistoricalLog(
        contexts=contexts,
        actions=actions,
        rewards=rewards,
        propensities=propensities,
        snapshots=snapshots,
        source_rows=source_rows,
        reward_clips=episode.reward_clips,
    )


def true_policy_value(
    env: BanditEnvironment, pi_e: PolicyFunction, num_samples: Optional[int] = 100_000, seed=0
) -> float:
    """
    Policy value `theta_0 = E[sum_a pi_e(a|X) f*(a, X)]`.

    Summed over the finite support when there is one, otherwise taken from the environment's closed form. Without
    either, `f*` is averaged over `num_samples` contexts drawn with the generator seeded by `seed`.

    Raises:
        `NotImplementedError` when there is no exact value and `num_samples` is `None`.
    """
    support = env.support
    if support is None:
        try:
            return float(env.closed_form_value(pi_e))
        except NotImplementedError:
            if num_samples is None:
                raise
        if num_samples < 1:
            raise ValueError(f"num_samples must be at least 1, got {num_samples}")
        rng = np.random.default_rng(seed)
        contexts = np.stack([env.sample_context(rng) for _ in range(num_samples)])
        logger.info(f"policy value of {pi_e.__class__.__name__} estimated from {num_samples} sampled contexts")
        return float(np.mean(np.sum(pi_e.probs(contexts) * env.mean_rewards(contexts), axis=1)))
    pi = pi_e.probs(support.contexts)
    return float(np.sum(support.weights * np.sum(pi * support.means, axis=1)))


def save_log_jsonl(log: HistoricalLog, path: Union[str, os.PathLike]):
    """
    Writes one JSON object per period with fields `t, x, a, y, propensities`. Context-free behavior snapshots are
    written under `snapshot` so the per-period behavior function survives the round trip.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as writer:
        for i in range(log.T):
            record = {
                "t": i + 1,
                "x": log.contexts[i].tolist(),
                "a": int(log.actions[i]),
                "y": float(log.rewards[i]),
                "propensities": log.propensities[i].tolist(),
            }
            if log.has_snapshots:
                try:
                    record["snapshot"] = log.snapshots[i].to_dict()
                except NotImplementedError:
                    pass
            writer.write(json.dumps(record) + "\n")
    logger.info(f"Log of {log.T} periods saved in {path}")


def load_log_jsonl(path: Union[str, os.PathLike]) -> HistoricalLog:
    """Reads a log written by [`save_log_jsonl`] or by an external logger using the same fields."""
    records = []
    with open(path, "r", encoding="utf-8") as reader:
        for line_number, line in enumerate(reader, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as err:
                raise ValueError(f"{path}, line {line_number}: not valid JSON ({err})")
    if not records:
        raise ValueError(f"{path} contains no logged periods")
    periods = [r["t"] for r in records]
    if periods != list(range(1, len(records) + 1)):
        raise ValueError(f"{path}: period indices must run 1..T without gaps")

    snapshots = None
    if all("snapshot" in r for r in records):
        snapshots = [policy_from_dict(r["snapshot"], kind="behavior-snapshot") for r in records]
    else:
        logger.info(f"{path} carries no behavior snapshots for every period")
    return HistoricalLog(
        contexts=np.array([r["x"] for r in records], dtype=float),
        actions=np.array([r["a"] for r in records], dtype=int),
        rewards=np.array([r["y"] for r in records], dtype=float),
        propensities=np.array([r["propensities"] for r in records], dtype=float),
        snapshots=snapshots,
    )
