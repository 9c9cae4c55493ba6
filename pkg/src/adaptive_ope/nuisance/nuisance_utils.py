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
Outcome models `f(a, x)` (conditional mean) and `e(a, x)` (conditional second moment) fit sequentially on the strict
past of a log.
"""
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from ..core import HistoricalLog
from ..utils import logging


logger = logging.get_logger(__name__)

NUISANCE_CONFIG_NAME = "nuisance_config.json"
VARIANCE_FLOOR = 1e-6


class NuisancePair(ABC):
    """
    A pair of outcome models `(f_hat, e_hat)`.

    `predict` clamps `f_hat` to `[-C2, C2]` and `e_hat` to `[0, C2 ** 2]`.

    Attributes:
        num_actions (`int`): K.
        reward_bound (`float`): C2.
        fitted_through (`int`): largest period index the pair has seen; `0` for a pair that saw no data.
    """

    def __init__(self, num_actions: int, reward_bound: float, fitted_through: int = 0):
        if reward_bound <= 0:
            raise ValueError(f"reward_bound must be strictly positive, got {reward_bound}")
        self.num_actions = int(num_actions)
        self.reward_bound = float(reward_bound)
        self.fitted_through = int(fitted_through)

    @abstractmethod
    def _predict(self, contexts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def predict(self, contexts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Args:
            contexts (`np.ndarray` of shape `(n, d)`)

        Returns:
            `Tuple[np.ndarray, np.ndarray]`: `f_hat` and `e_hat`, each of shape `(n, K)`.
        """
        contexts = np.atleast_2d(np.asarray(contexts, dtype=float))
        f_hat, e_hat = self._predict(contexts)
        bound = self.reward_bound
        return np.clip(f_hat, -bound, bound), np.clip(e_hat, 0.0, bound**2)

    def f_hat(self, a: int, x: np.ndarray) -> float:
        return float(self.predict(np.reshape(x, (1, -1)))[0][0, a])

    def e_hat(self, a: int, x: np.ndarray) -> float:
        return float(self.predict(np.reshape(x, (1, -1)))[1][0, a])

    def variance(self, contexts: np.ndarray, floor: float = VARIANCE_FLOOR) -> np.ndarray:
        """`v_hat = max(e_hat - f_hat ** 2, floor)`."""
        f_hat, e_hat = self.predict(contexts)
        return np.maximum(e_hat - f_hat**2, floor)

    def zero_mean(self) -> "NuisancePair":
        return ZeroMeanNuisancePair(self)


class ConstantNuisancePair(NuisancePair):
    """`f_hat(a, x) = f_values[a]` and `e_hat(a, x) = e_values[a]` everywhere."""

    def __init__(self, f_values, e_values=None, reward_bound: float = 1.0, fitted_through: int = 0):
        f_values = np.asarray(f_values, dtype=float).reshape(-1)
        e_values = f_values**2 if e_values is None else np.asarray(e_values, dtype=float).reshape(-1)
        super().__init__(f_values.shape[0], reward_bound, fitted_through)
        self.f_values = f_values
        self.e_values = e_values

    def _predict(self, contexts):
        n = contexts.shape[0]
        return np.tile(self.f_values, (n, 1)), np.tile(self.e_values, (n, 1))


class OracleNuisancePair(NuisancePair):
    """The true `f*` and `e*` of an environment."""

    def __init__(self, env):
        super().__init__(env.num_actions, env.reward_bound, fitted_through=0)
        self.env = env

    def _predict(self, contexts):
        return self.env.mean_rewards(contexts), self.env.second_moments(contexts)


class ZeroMeanNuisancePair(NuisancePair):
    """Keeps the second-moment model of `inner` and forces `f_hat = 0`, which turns the augmented term into IPW."""

    def __init__(self, inner: NuisancePair):
        super().__init__(inner.num_actions, inner.reward_bound, inner.fitted_through)
        self.inner = inner

    def _predict(self, contexts):
        _, e_hat = self.inner._predict(contexts)
        return np.zeros((contexts.shape[0], self.num_actions)), e_hat


class FittedNuisancePair(NuisancePair):
    """
    Outcome models fit by a [`NuisanceRegressor`] on a log prefix. Arms without samples fall back to the cold-start
    values `f_hat = 0`, `e_hat = C2 ** 2`.
    """

    def __init__(
        self,
        regressor: "NuisanceRegressor",
        contexts: np.ndarray,
        actions: np.ndarray,
        rewards: np.ndarray,
        num_actions: int,
        reward_bound: float,
        params: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(num_actions, reward_bound, fitted_through=contexts.shape[0])
        self.regressor = regressor
        self.params = params or {}
        self._arm_data = []
        for a in range(num_actions):
            mask = actions == a
            y = rewards[mask]
            self._arm_data.append((contexts[mask], np.stack([y, y**2], axis=1)))

    def arm_count(self, a: int) -> int:
        return self._arm_data[a][0].shape[0]

    def _predict(self, contexts):
        n = contexts.shape[0]
        f_hat = np.zeros((n, self.num_actions))
        e_hat = np.full((n, self.num_actions), self.reward_bound**2)
        for a, (train_contexts, targets) in enumerate(self._arm_data):
            if train_contexts.shape[0] == 0:
                continue
            averages = self.regressor.average(train_contexts, targets, contexts, **self.params)
            f_hat[:, a] = averages[:, 0]
            e_hat[:, a] = averages[:, 1]
        return f_hat, e_hat


class NuisanceRegressor(ABC):
    """
    Mixin for local-averaging regressors. `average` returns, for every query, a weighted average of the rows of
    `targets` (columns `y` and `y ** 2`) over one arm's training samples.
    """

    config_name = NUISANCE_CONFIG_NAME
    method: str = None

    @abstractmethod
    def average(self, train_contexts: np.ndarray, targets: np.ndarray, queries: np.ndarray, **params) -> np.ndarray:
        raise NotImplementedError

    def fit_params(self, contexts: np.ndarray) -> Dict[str, Any]:
        """Hyperparameters resolved from the training contexts at fit time."""
        return {}

    def fit(
        self, contexts: np.ndarray, actions: np.ndarray, rewards: np.ndarray, num_actions: int, reward_bound: float
    ) -> FittedNuisancePair:
        contexts = np.array(contexts, dtype=float, ndmin=2)
        actions = np.asarray(actions, dtype=int).reshape(-1)
        rewards = np.asarray(rewards, dtype=float).reshape(-1)
        params = self.fit_params(contexts) if contexts.shape[0] > 0 else {}
        return FittedNuisancePair(self, contexts, actions, rewards, num_actions, reward_bound, params=params)

    def fit_log(self, log: HistoricalLog, t: int, reward_bound: float) -> FittedNuisancePair:
        """Fits on `Omega_t`, the first `t` periods of `log` (`t = 0` gives the cold-start pair)."""
        if not 0 <= t <= log.T:
            raise ValueError(f"prefix length must be in 0..{log.T}, got {t}")
        return self.fit(log.contexts[:t].reshape(t, log.d), log.actions[:t], log.rewards[:t], log.K, reward_bound)


class NuisanceSequence:
    """
    The outcome models used at every period of a log: entry `t` (1-based) only depends on `Omega_{t-1}`.

    Pairs are refit when `(t - 1)` is a multiple of `refit_every` and reused in between, so entry `t` is fit on the
    first `((t - 1) // refit_every) * refit_every` periods. Entry `T + 1` (fit on the whole log) is also available.

    Args:
        num_periods (`int`): T.
        pair_for_prefix (`Callable[[int], NuisancePair]`): builds the pair fit on the first `s` periods.
        refit_every (`int`): refit period `m >= 1`.
    """

    def __init__(self, num_periods: int, pair_for_prefix: Callable[[int], NuisancePair], refit_every: int = 1):
        if refit_every < 1:
            raise ValueError(f"refit_every must be at least 1, got {refit_every}")
        self.num_periods = int(num_periods)
        self.refit_every = int(refit_every)
        self._pair_for_prefix = pair_for_prefix
        self._pairs: Dict[int, NuisancePair] = {}
        self._logged_predictions = None
        self._cached_key = None
        self._cached_value = None

    @classmethod
    def constant(cls, num_periods: int, pair: NuisancePair) -> "NuisanceSequence":
        """The same pair at every period (oracle or hand-built outcome models)."""
        return cls(num_periods, lambda s: pair, refit_every=num_periods + 1)

    def __len__(self) -> int:
        return self.num_periods

    def prefix_length(self, t: int) -> int:
        if not 1 <= t <= self.num_periods + 1:
            raise IndexError(f"period {t} is outside 1..{self.num_periods + 1}")
        return ((t - 1) // self.refit_every) * self.refit_every

    def __getitem__(self, t: int) -> NuisancePair:
        return self._pair_at_prefix(self.prefix_length(t))

    def predict(self, t: int, contexts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Predictions of entry `t` on `contexts`; the last (prefix, contexts) query is cached."""
        s = self.prefix_length(t)
        if self._cached_key is not None and self._cached_key[0] == s and self._cached_key[1] is contexts:
            return self._cached_value
        value = self._pair_at_prefix(s).predict(contexts)
        self._cached_key = (s, contexts)
        self._cached_value = value
        return value

    def predict_logged(self, contexts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        `f_hat_{t-1}(., x_t)` and `e_hat_{t-1}(., x_t)` for every period, each of shape `(T, K)`, where `contexts` are
        the log's contexts.
        """
        if self._logged_predictions is not None and self._logged_predictions[0] is contexts:
            return self._logged_predictions[1]
        contexts = np.atleast_2d(contexts)
        if contexts.shape[0] != self.num_periods:
            raise ValueError(f"expected {self.num_periods} logged contexts, got {contexts.shape[0]}")
        f_hat = np.empty((self.num_periods, self[1].num_actions))
        e_hat = np.empty_like(f_hat)
        start = 1
        while start <= self.num_periods:
            stop = min(self.num_periods, start - 1 + self.refit_every - (start - 1) % self.refit_every)
            block_f, block_e = self[start].predict(contexts[start - 1 : stop])
            f_hat[start - 1 : stop] = block_f
            e_hat[start - 1 : stop] = block_e
            start = stop + 1
        self._logged_predictions = (contexts, (f_hat, e_hat))
        return f_hat, e_hat

    def zero_mean(self) -> "NuisanceSequence":
        """The same sequence with `f_hat = 0` and the second-moment models kept."""
        return NuisanceSequence(self.num_periods, lambda s: self._pair_at_prefix(s).zero_mean(), self.refit_every)

    def _pair_at_prefix(self, s: int) -> NuisancePair:
        if s not in self._pairs:
            self._pairs[s] = self._pair_for_prefix(s)
        return self._pairs[s]


def zero_nuisance(num_periods: int, num_actions: int, reward_bound: float = 1.0) -> NuisanceSequence:
    """`f_hat = 0` at every period (the IPW special case)."""
    pair = ConstantNuisancePair(np.zeros(num_actions), reward_bound=reward_bound)
    return NuisanceSequence.constant(num_periods, pair)


def oracle_nuisance(num_periods: int, env) -> NuisanceSequence:
    return NuisanceSequence.constant(num_periods, OracleNuisancePair(env))


def sequential_nuisance(
    log: HistoricalLog,
    method="nw",
    refit_every: int = 10,
    reward_bound: float = 1.0,
    **regressor_kwargs,
) -> NuisanceSequence:
    """
    Fits outcome models along a log without lookahead.

    Args:
        log ([`HistoricalLog`]): the logged data.
        method (`str` or [`NuisanceRegressor`]): `"nw"`, `"knn"` or a regressor instance.
        refit_every (`int`, defaults to 10): refit period `m`.
        reward_bound (`float`, defaults to 1.0): C2, clamp of the outcome models and cold-start second moment.
        regressor_kwargs: forwarded to the regressor constructor when `method` is a string.

    Returns:
        [`NuisanceSequence`]: entry `t` is fit on `Omega_{t-1}`, entry 1 is the cold-start pair.
    """
    regressor = make_regressor(method, **regressor_kwargs) if isinstance(method, str) else method
    return NuisanceSequence(log.T, lambda s: regressor.fit_log(log, s, reward_bound), refit_every=refit_every)


def make_regressor(method: str, **kwargs) -> NuisanceRegressor:
    from .nuisance_knn import KNNRegressor
    from .nuisance_nadaraya_watson import NadarayaWatsonRegressor

    regressors = {"nw": NadarayaWatsonRegressor, "knn": KNNRegressor}
    if method not in regressors:
        raise ValueError(f"unknown nuisance method {method!r}; expected one of {sorted(regressors)}")
    return regressors[method](**kwargs)


def nuisance_error(pair: NuisancePair, env, contexts: np.ndarray) -> float:
    """Mean `|f_hat - f*|` over `contexts` and all arms."""
    f_hat, _ = pair.predict(contexts)
    return float(np.mean(np.abs(f_hat - env.mean_rewards(contexts))))
