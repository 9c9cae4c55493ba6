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
Evaluation policies derived from a linear classifier: a multinomial logistic regression trained by full-batch gradient
descent, whose predicted class becomes a one-hot policy mixed with the uniform policy.
"""
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import softmax

from ..configuration_utils import ConfigMixin, register_to_config
from ..core import PolicyFunction
from ..ingest import ClassificationDataset
from ..utils import logging
from .policy_linucb import one_hot_argmax
from .policy_utils import MixturePolicyFunction


logger = logging.get_logger(__name__)


class LinearArgmaxPolicy(PolicyFunction):
    """
    One-hot policy on `argmax_a coef[a] . x + intercept[a]`, ties broken by the lowest index.

    Args:
        coef (`np.ndarray` of shape `(K, d)`)
        intercept (`np.ndarray` of shape `(K,)`)
    """

    def __init__(self, coef, intercept):
        coef = np.array(coef, dtype=float, ndmin=2)
        intercept = np.asarray(intercept, dtype=float).reshape(-1)
        if intercept.shape[0] != coef.shape[0]:
            raise ValueError(f"coef has {coef.shape[0]} rows but intercept has {intercept.shape[0]} entries")
        super().__init__(num_actions=coef.shape[0], dim=coef.shape[1])
        coef.setflags(write=False)
        intercept.setflags(write=False)
        self.coef = coef
        self.intercept = intercept

    def decision_function(self, contexts: np.ndarray) -> np.ndarray:
        return np.atleast_2d(contexts) @ self.coef.T + self.intercept

    def _compute_probs(self, contexts):
        return one_hot_argmax(self.decision_function(contexts))

    def to_dict(self):
        return {"kind": "linear_argmax", "coef": self.coef.tolist(), "intercept": self.intercept.tolist()}


class LogisticRegressionClassifier(ConfigMixin):
    """
    Multinomial logistic regression with an L2 penalty on the coefficients, fit by full-batch gradient descent for a
    fixed number of iterations from a zero start.

    Args:
        num_classes (`int`): number of classes.
        num_iterations (`int`, defaults to 500)
        learning_rate (`float`, defaults to 0.1)
        l2 (`float`, defaults to 1e-4): penalty weight; the intercept is not penalized.
    """

    config_name = "classifier_config.json"

    @register_to_config
    def __init__(self, num_classes: int = 2, num_iterations: int = 500, learning_rate: float = 0.1, l2: float = 1e-4):
        if num_classes < 2:
            raise ValueError(f"num_classes must be at least 2, got {num_classes}")
        if num_iterations < 1 or learning_rate <= 0 or l2 < 0:
            raise ValueError(
                f"invalid optimizer settings: num_iterations={num_iterations}, learning_rate={learning_rate}, l2={l2}"
            )
        self.coef_ = None
        self.intercept_ = None

    def fit(self, features: np.ndarray, labels: np.ndarray) -> "LogisticRegressionClassifier":
        features = np.array(features, dtype=float, ndmin=2)
        labels = np.asarray(labels, dtype=int).reshape(-1)
        num_classes = self.config.num_classes
        if features.shape[0] != labels.shape[0]:
            raise ValueError(f"{features.shape[0]} feature rows but {labels.shape[0]} labels")
        if np.any(labels < 0) or np.any(labels >= num_classes):
            raise ValueError(f"labels must lie in 0..{num_classes - 1}")
        counts = np.bincount(labels, minlength=num_classes)
        absent = np.flatnonzero(counts == 0)
        if absent.size:
            raise ValueError(f"class {int(absent[0])} is absent from the training data")

        n, d = features.shape
        targets = np.eye(num_classes)[labels]
        coef = np.zeros((num_classes, d))
        intercept = np.zeros(num_classes)
        for _ in range(self.config.num_iterations):
            residual = (softmax(features @ coef.T + intercept, axis=1) - targets) / n
            coef -= self.config.learning_rate * (residual.T @ features + self.config.l2 * coef)
            intercept -= self.config.learning_rate * residual.sum(axis=0)

        self.coef_ = coef
        self.intercept_ = intercept
        accuracy = float(np.mean(self.predict(features) == labels))
        logger.info(f"Logistic regression fit on {n} rows, training accuracy {accuracy:.4f}")
        return self

    def _check_fitted(self):
        if self.coef_ is None:
            raise ValueError("the classifier has not been fit yet")

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        self._check_fitted()
        return softmax(np.atleast_2d(features) @ self.coef_.T + self.intercept_, axis=1)

    def predict(self, features: np.ndarray) -> np.ndarray:
        self._check_fitted()
        return np.argmax(np.atleast_2d(features) @ self.coef_.T + self.intercept_, axis=1)

    def as_policy(self) -> LinearArgmaxPolicy:
        self._check_fitted()
        return LinearArgmaxPolicy(self.coef_, self.intercept_)


def fit_evaluation_policy(
    data: Union[ClassificationDataset, Tuple[np.ndarray, np.ndarray]],
    weight: float = 0.7,
    num_classes: Optional[int] = None,
    num_iterations: int = 500,
    learning_rate: float = 0.1,
    l2: float = 1e-4,
) -> MixturePolicyFunction:
    """
    Trains the classifier and returns `weight * pi_d + (1 - weight) * uniform`, where `pi_d` is one-hot on the
    predicted class.

    Args:
        data ([`ClassificationDataset`] or `(features, labels)`): training rows. Labels are action indices.
        weight (`float`, defaults to 0.7): mixture weight of the classifier policy.
        num_classes (`int`, *optional*): K; defaults to the dataset's class count (or the largest label + 1).

    Raises:
        `ValueError` naming the first class with no training example.
    """
    if isinstance(data, ClassificationDataset):
        features, labels = data.dense(), data.labels
        num_classes = data.n_classes if num_classes is None else num_classes
    else:
        features, labels = data
        labels = np.asarray(labels, dtype=int)
        num_classes = int(labels.max()) + 1 if num_classes is None else num_classes

    classifier = LogisticRegressionClassifier(
        num_classes=num_classes, num_iterations=num_iterations, learning_rate=learning_rate, l2=l2
    )
    classifier.fit(features, labels)
    return MixturePolicyFunction(classifier.as_policy(), weight)


def policy_accuracy(policy: PolicyFunction, features: np.ndarray, labels: np.ndarray) -> float:
    """Mean probability the policy assigns to the true label."""
    probs = policy.probs(features)
    return float(np.mean(probs[np.arange(probs.shape[0]), np.asarray(labels, dtype=int)]))
