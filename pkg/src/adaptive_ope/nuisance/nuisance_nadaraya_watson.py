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
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.special import softmax

from ..configuration_utils import ConfigMixin, register_to_config
from ..core import HistoricalLog
from .nuisance_utils import FittedNuisancePair, NuisanceRegressor


def median_heuristic_bandwidth(contexts: np.ndarray, max_points: int = 200) -> float:
    """Median pairwise distance of the first `max_points` contexts, or 1.0 with fewer than two distinct points."""
    distances = pdist(np.atleast_2d(contexts)[:max_points])
    distances = distances[distances > 0]
    if distances.size == 0:
        return 1.0
    return float(np.median(distances))


def scott_bandwidth(contexts: np.ndarray) -> float:
    """`mean column sd * n ** (-1 / (d + 4))`, shrinking at the rate that keeps the kernel estimate consistent."""
    contexts = np.atleast_2d(contexts)
    n, d = contexts.shape
    spread = float(np.mean(contexts.std(axis=0)))
    if spread <= 0:
        return 1.0
    return spread * n ** (-1.0 / (d + 4))


class NadarayaWatsonRegressor(NuisanceRegressor, ConfigMixin):
    """
    Nadaraya-Watson kernel regression with a Gaussian kernel `G(u) = exp(-u^2 / 2)`.

    Weights are normalized with a softmax over `-||x - x_s||^2 / (2 h^2)`, so a query far from every sample still
    gets a proper average dominated by its nearest samples.

    Args:
        bandwidth (`float` or `str`, defaults to `"median"`):
            a fixed `h > 0`, `"median"` for the median pairwise distance of the first `bandwidth_sample` training
            contexts of each refit, or `"scott"` for a rule of thumb shrinking with the prefix length.
        bandwidth_sample (`int`, defaults to 200): number of contexts used by the median heuristic.
    """

    method = "nw"

    @register_to_config
    def __init__(self, bandwidth: Union[float, str] = "median", bandwidth_sample: int = 200):
        if isinstance(bandwidth, str):
            if bandwidth not in ("median", "scott"):
                raise NotImplementedError(f"{bandwidth} bandwidth rule is not implemented for {self.__class__}")
        elif bandwidth <= 0:
            raise ValueError(f"bandwidth must be strictly positive, got {bandwidth}")
        if bandwidth_sample < 2:
            raise ValueError(f"bandwidth_sample must be at least 2, got {bandwidth_sample}")

    def fit_params(self, contexts):
        bandwidth = self.config.bandwidth
        if bandwidth == "median":
            bandwidth = median_heuristic_bandwidth(contexts, self.config.bandwidth_sample)
        elif bandwidth == "scott":
            bandwidth = scott_bandwidth(contexts)
        return {"bandwidth": float(bandwidth)}

    def average(self, train_contexts, targets, queries, bandwidth: float = 1.0):
        squared = cdist(queries, train_contexts, "sqeuclidean")
        weights = softmax(-squared / (2.0 * bandwidth**2), axis=1)
        return weights @ targets


def nw_fit(
    log: HistoricalLog, t: int, bandwidth: Optional[float] = None, reward_bound: float = 1.0
) -> FittedNuisancePair:
    """Nadaraya-Watson pair fit on `Omega_t`; `bandwidth=None` uses the median heuristic."""
    regressor = NadarayaWatsonRegressor(bandwidth="median" if bandwidth is None else bandwidth)
    return regressor.fit_log(log, t, reward_bound)
