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
from scipy.spatial.distance import cdist

from ..configuration_utils import ConfigMixin, register_to_config
from ..core import HistoricalLog
from .nuisance_utils import FittedNuisancePair, NuisanceRegressor


class KNNRegressor(NuisanceRegressor, ConfigMixin):
    """
    k-nearest-neighbor regression: the plain mean over the `min(k, n_a)` closest same-arm samples in Euclidean
    distance. Training samples are kept in period order and sorted stably, so ties go to the earlier period.

    Args:
        num_neighbors (`int`, defaults to 10): k.
    """

    method = "knn"

    @register_to_config
    def __init__(self, num_neighbors: int = 10):
        if num_neighbors < 1:
            raise ValueError(f"num_neighbors must be at least 1, got {num_neighbors}")

    def average(self, train_contexts, targets, queries):
        k = min(self.config.num_neighbors, train_contexts.shape[0])
        squared = cdist(queries, train_contexts, "sqeuclidean")
        nearest = np.argsort(squared, axis=1, kind="stable")[:, :k]
        return targets[nearest].mean(axis=1)


def knn_fit(log: HistoricalLog, t: int, k: int = 10, reward_bound: float = 1.0) -> FittedNuisancePair:
    """k-NN pair fit on `Omega_t`."""
    return KNNRegressor(num_neighbors=k).fit_log(log, t, reward_bound)
