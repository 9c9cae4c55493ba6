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
Classification-to-bandit transform: every row is a context, the reward is one when the action equals the row's class.
"""
from typing import Optional, Sequence, Tuple

import numpy as np

from ..ingest import ClassificationDataset
from ..utils import logging
from .environment_utils import BanditEnvironment, EnvironmentEpisode, EnvironmentSupport, EvaluationCovariates


logger = logging.get_logger(__name__)


class ClassificationEnvironment(BanditEnvironment):
    """
    Bandit view of a [`ClassificationDataset`].

    The context law is uniform over the rows. Rewards are `1[a == label]`, so `f*(a, x) = e*(a, x)` is the frequency
    of label `a` among the rows whose features equal `x`. The conditional variance is zero unless identical feature
    rows carry different labels.

    Args:
        dataset ([`ClassificationDataset`]): the source rows.
        with_replacement (`bool`, defaults to `False`): draw contexts with replacement instead of walking a fresh
            permutation per episode.
        rows (`Sequence[int]`, *optional*): restrict the environment to these dataset rows.
    """

    def __init__(
        self, dataset: ClassificationDataset, with_replacement: bool = False, rows: Optional[Sequence[int]] = None
    ):
        if len(dataset) == 0:
            raise ValueError("cannot build a bandit environment from an empty dataset")
        self.dataset = dataset
        self.with_replacement = with_replacement
        self.row_ids = np.arange(len(dataset)) if rows is None else np.asarray(rows, dtype=int)
        if self.row_ids.size == 0:
            raise ValueError("the environment needs at least one row")
        self.features = dataset.dense()[self.row_ids]
        self.labels = dataset.labels[self.row_ids]
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

        self.num_actions = dataset.n_classes
        self.dim = dataset.n_features
        self.reward_bound = 1.0
        self._local_of_row = {int(r): i for i, r in enumerate(self.row_ids)}
        # identical feature rows form one context; its mean reward is the label frequency over those rows
        self._group_of_context = {}
        groups = np.empty(len(self.labels), dtype=int)
        for i in range(self.features.shape[0]):
            groups[i] = self._group_of_context.setdefault(self.features[i].tobytes(), len(self._group_of_context))
        counts = np.zeros((len(self._group_of_context), self.num_actions))
        np.add.at(counts, (groups, self.labels), 1.0)
        self._group_means = counts / counts.sum(axis=1, keepdims=True)
        self._row_groups = groups
        duplicates = int(np.sum(self._group_means.max(axis=1) < 1.0))
        if duplicates:
            logger.info(f"{duplicates} contexts appear with more than one label")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def max_periods(self) -> Optional[int]:
        return None if self.with_replacement else len(self)

    def _group(self, x: np.ndarray) -> int:
        key = np.asarray(x, dtype=float).reshape(-1).tobytes()
        if key not in self._group_of_context:
            raise ValueError("context does not match any row of the dataset")
        return self._group_of_context[key]

    def labels_for(self, rows: Sequence[int]) -> np.ndarray:
        """Labels of dataset rows (original row ids) held by the environment."""
        return np.array([self.labels[self._local_of_row[int(r)]] for r in rows], dtype=int)

    def sample_context(self, rng):
        return self.features[rng.integers(len(self))].copy()

    def sample_reward(self, rng, a, x, row=None):
        if row is not None:
            return float(a == self.labels[self._local_of_row[row]])
        means = self._group_means[self._group(x)]
        if means.max() == 1.0:
            return float(means[a])
        # a context shared by rows with different labels: the label is drawn by frequency
        return float(a == rng.choice(self.num_actions, p=means))

    def mean_rewards(self, contexts):
        contexts = np.atleast_2d(contexts)
        return self._group_means[[self._group(x) for x in contexts]]

    def second_moments(self, contexts):
        return self.mean_rewards(contexts)

    @property
    def support(self):
        means = self._group_means[self._row_groups]
        return EnvironmentSupport(
            contexts=self.features,
            weights=np.full(len(self), 1.0 / len(self)),
            means=means,
            second_moments=means,
        )

    def start_episode(self, rng):
        return ClassificationEpisode(self, rng)


class ClassificationEpisode(EnvironmentEpisode):
    """
    One replication over a classification environment. Without replacement the rows are permuted once; the log
    consumes the permutation from the front and evaluation covariates are taken from the back, so the two never
    share a row.
    """

    def __init__(self, env: ClassificationEnvironment, rng: np.random.Generator):
        super().__init__(env, rng)
        self.order = None if env.with_replacement else rng.permutation(len(env))
        self.front = 0
        self.back = 0

    def _check_room(self, requested: int):
        if self.front + self.back + requested > len(self.env):
            raise ValueError(
                f"requested {self.front + self.back + requested} rows without replacement but the dataset has only "
                f"{len(self.env)}"
            )

    def next_context(self) -> Tuple[np.ndarray, Optional[int]]:
        if self.order is None:
            local = int(self.rng.integers(len(self.env)))
        else:
            self._check_room(1)
            local = int(self.order[self.front])
            self.front += 1
        return self.env.features[local].copy(), int(self.env.row_ids[local])

    def evaluation_covariates(self, num_covariates: int) -> EvaluationCovariates:
        if num_covariates < 1:
            raise ValueError(f"need at least one evaluation covariate, got {num_covariates}")
        if self.order is None:
            local = self.rng.integers(len(self.env), size=num_covariates)
        else:
            self._check_room(num_covariates)
            stop = len(self.env) - self.back
            local = self.order[stop - num_covariates : stop]
            self.back += num_covariates
        return EvaluationCovariates(self.env.features[local])


def classification_to_bandit(
    dataset: ClassificationDataset, with_replacement: bool = False, rows: Optional[Sequence[int]] = None
) -> ClassificationEnvironment:
    return ClassificationEnvironment(dataset, with_replacement=with_replacement, rows=rows)


def split_rows(num_rows: int, fit_fraction: float, seed) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded split of `0..num_rows - 1` into sorted (fit rows, bandit rows)."""
    if not 0.0 < fit_fraction < 1.0:
        raise ValueError(f"fit_fraction must lie in (0, 1), got {fit_fraction}")
    order = np.random.default_rng(seed).permutation(num_rows)
    cut = max(1, int(np.floor(fit_fraction * num_rows)))
    if cut >= num_rows:
        raise ValueError(f"a dataset of {num_rows} rows is too small to split")
    return np.sort(order[:cut]), np.sort(order[cut:])
