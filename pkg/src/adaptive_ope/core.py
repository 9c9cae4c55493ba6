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
Domain types shared by every module: logged samples, historical logs, policy functions, assumption bounds and
estimate reports, plus the check of the boundedness/overlap assumptions on a realized log.

Actions are 0-based everywhere in the code.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .utils import BaseOutput, logging


logger = logging.get_logger(__name__)

PROPENSITY_TOLERANCE = 1e-9


class PolicyOutputError(ValueError):
    """A policy produced something that is not a probability vector."""

    def __init__(self, message: str, period: Optional[int] = None):
        if period is not None:
            message = f"period {period}: {message}"
        super().__init__(message)
        self.period = period


class OverlapError(ValueError):
    """The realized action was logged with zero probability."""


class StructuralError(ValueError):
    """A log and a policy disagree on the action count or the context dimension."""


def check_probability_vectors(probs: np.ndarray, strictly_positive: bool = False, what: str = "policy output"):
    """
    Validates that every row of `probs` lies on the probability simplex (within `PROPENSITY_TOLERANCE`).

    Raises:
        `PolicyOutputError` if a row has a negative entry, an entry above one, does not sum to one, or (with
        `strictly_positive=True`) has an entry that is not strictly positive.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    if not np.all(np.isfinite(probs)):
        raise PolicyOutputError(f"{what} contains non-finite values")
    if np.any(probs < 0.0) or np.any(probs > 1.0 + PROPENSITY_TOLERANCE):
        raise PolicyOutputError(f"{what} has entries outside [0, 1]")
    sums = probs.sum(axis=1)
    worst = np.max(np.abs(sums - 1.0))
    if worst > PROPENSITY_TOLERANCE:
        raise PolicyOutputError(f"{what} does not sum to 1 (max deviation {worst:.3e})")
    if strictly_positive and np.any(probs <= 0.0):
        raise PolicyOutputError(f"{what} has non-positive entries; overlap requires strictly positive propensities")
    return probs


@dataclass(frozen=True)
class LoggedSample:
    """
    One logged period.

    Args:
        t (`int`): period index, 1-based.
        x (`np.ndarray` of shape `(d,)`): context.
        a (`int`): action in `0..K-1`.
        y (`float`): observed reward.
        propensities (`np.ndarray` of shape `(K,)`): full behavior probability vector at logging time.
        reward_bound (`float`, *optional*): when given, `|y|` must not exceed it.
    """

    t: int
    x: np.ndarray
    a: int
    y: float
    propensities: np.ndarray
    reward_bound: Optional[float] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        propensities = np.asarray(self.propensities, dtype=float).reshape(-1)
        x.setflags(write=False)
        propensities.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "propensities", propensities)

        if int(self.t) != self.t or self.t < 1:
            raise ValueError(f"period index must be a positive integer, got {self.t}")
        check_probability_vectors(propensities, strictly_positive=True, what=f"propensities of period {self.t}")
        if not 0 <= self.a < propensities.shape[0]:
            raise ValueError(f"action {self.a} is outside 0..{propensities.shape[0] - 1}")
        if not np.isfinite(self.y):
            raise ValueError(f"reward of period {self.t} is not finite")
        if self.reward_bound is not None and abs(self.y) > self.reward_bound:
            raise ValueError(f"|reward| = {abs(self.y)} exceeds the bound {self.reward_bound} at period {self.t}")

    @property
    def K(self) -> int:
        return self.propensities.shape[0]


class PolicyFunction(ABC):
    """
    Full conditional action-probability function `x -> pi(. | x)`.

    Subclasses implement `_compute_probs` for a batch of contexts; `probs` validates the result. Context-free policies
    set `dim = None` and accept contexts of any dimension.

    Attributes:
        num_actions (`int`): number of actions K.
        dim (`int` or `None`): expected context dimension.
        kind (`str`): `"evaluation"` or `"behavior-snapshot"`.
    """

    kind = "evaluation"

    def __init__(self, num_actions: int, dim: Optional[int] = None):
        if num_actions < 1:
            raise ValueError(f"a policy needs at least one action, got {num_actions}")
        self.num_actions = int(num_actions)
        self.dim = None if dim is None else int(dim)

    @abstractmethod
    def _compute_probs(self, contexts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def context_free(self) -> bool:
        return self.dim is None

    def probs(self, contexts: np.ndarray) -> np.ndarray:
        """
        Args:
            contexts (`np.ndarray` of shape `(n, d)`)

        Returns:
            `np.ndarray` of shape `(n, K)`: one probability vector per context.
        """
        contexts = np.atleast_2d(np.asarray(contexts, dtype=float))
        if self.dim is not None and contexts.shape[1] != self.dim:
            raise StructuralError(
                f"{self.__class__.__name__} expects contexts of dimension {self.dim}, got {contexts.shape[1]}"
            )
        out = np.asarray(self._compute_probs(contexts), dtype=float)
        if out.shape != (contexts.shape[0], self.num_actions):
            raise PolicyOutputError(f"{self.__class__.__name__} returned shape {out.shape}")
        check_probability_vectors(out, what=f"{self.__class__.__name__} output")
        return out

    def prob(self, x: np.ndarray) -> np.ndarray:
        return self.probs(np.asarray(x, dtype=float).reshape(1, -1))[0]

    def is_deterministic(self, contexts: np.ndarray) -> bool:
        """Whether every probability vector on `contexts` puts all its mass on one action."""
        probs = self.probs(contexts)
        return bool(np.all(np.isclose(probs.max(axis=1), 1.0, atol=PROPENSITY_TOLERANCE, rtol=0.0)))

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError(f"{self.__class__.__name__} cannot be serialized")


class ConstantPolicy(PolicyFunction):
    """A context-free policy returning the same probability vector everywhere."""

    def __init__(self, probs: Sequence[float], kind: str = "evaluation"):
        vector = np.asarray(probs, dtype=float).reshape(-1)
        check_probability_vectors(vector, what="constant policy")
        super().__init__(num_actions=vector.shape[0], dim=None)
        vector.setflags(write=False)
        self.vector = vector
        self.kind = kind

    def _compute_probs(self, contexts):
        return np.broadcast_to(self.vector, (contexts.shape[0], self.num_actions))

    def to_dict(self):
        return {"kind": "constant", "probs": self.vector.tolist()}


class HistoricalLog:
    """
    Ordered dependent sample `S_T` stored column-wise, with optional per-period behavior snapshots.

    Args:
        contexts (`np.ndarray` of shape `(T, d)`)
        actions (`np.ndarray` of shape `(T,)`)
        rewards (`np.ndarray` of shape `(T,)`)
        propensities (`np.ndarray` of shape `(T, K)`): `pi_t(. | x_t)` recorded at logging time.
        snapshots (`List[PolicyFunction]`, *optional*): `snapshots[t - 1]` is the behavior policy of period `t`.
        source_rows (`np.ndarray`, *optional*): dataset rows the contexts were drawn from.
        reward_clips (`int`): number of reward draws clipped to the reward bound during generation.
    """

    def __init__(
        self,
        contexts: np.ndarray,
        actions: np.ndarray,
        rewards: np.ndarray,
        propensities: np.ndarray,
        snapshots: Optional[Sequence[PolicyFunction]] = None,
        source_rows: Optional[np.ndarray] = None,
        reward_clips: int = 0,
    ):
        contexts = np.array(contexts, dtype=float, ndmin=2)
        actions = np.asarray(actions).reshape(-1)
        rewards = np.array(rewards, dtype=float).reshape(-1)
        propensities = np.array(propensities, dtype=float, ndmin=2)

        num_periods = contexts.shape[0]
        if num_periods == 0:
            raise ValueError("a historical log needs at least one period")
        if not (actions.shape[0] == rewards.shape[0] == propensities.shape[0] == num_periods):
            raise ValueError(
                f"column lengths disagree: contexts {num_periods}, actions {actions.shape[0]}, "
                f"rewards {rewards.shape[0]}, propensities {propensities.shape[0]}"
            )
        if not np.all(np.equal(np.mod(actions, 1), 0)):
            raise ValueError("actions must be integers")
        actions = actions.astype(int)
        if np.any(actions < 0) or np.any(actions >= propensities.shape[1]):
            raise ValueError(f"actions must lie in 0..{propensities.shape[1] - 1}")
        if not np.all(np.isfinite(contexts)) or not np.all(np.isfinite(rewards)):
            raise ValueError("contexts and rewards must be finite")
        check_probability_vectors(propensities, strictly_positive=True, what="logged propensities")
        if snapshots is not None and len(snapshots) != num_periods:
            raise ValueError(f"expected {num_periods} behavior snapshots, got {len(snapshots)}")

        for array in (contexts, actions, rewards, propensities):
            array.setflags(write=False)
        self.contexts = contexts
        self.actions = actions
        self.rewards = rewards
        self.propensities = propensities
        self.snapshots = None if snapshots is None else tuple(snapshots)
        self.source_rows = None if source_rows is None else np.asarray(source_rows, dtype=int)
        self.reward_clips = int(reward_clips)

    @classmethod
    def from_samples(cls, samples: Sequence[LoggedSample], snapshots: Optional[Sequence[PolicyFunction]] = None):
        if len(samples) == 0:
            raise ValueError("a historical log needs at least one period")
        periods = [s.t for s in samples]
        if periods != list(range(1, len(samples) + 1)):
            raise ValueError("period indices must be 1..T in increasing order without gaps")
        dims = {s.x.shape[0] for s in samples}
        arms = {s.K for s in samples}
        if len(dims) != 1 or len(arms) != 1:
            raise ValueError(
                f"samples disagree on the context dimension {sorted(dims)} or action count {sorted(arms)}"
            )
        return cls(
            contexts=np.stack([s.x for s in samples]),
            actions=np.array([s.a for s in samples]),
            rewards=np.array([s.y for s in samples]),
            propensities=np.stack([s.propensities for s in samples]),
            snapshots=snapshots,
        )

    def __len__(self) -> int:
        return self.contexts.shape[0]

    @property
    def T(self) -> int:
        return self.contexts.shape[0]

    @property
    def K(self) -> int:
        return self.propensities.shape[1]

    @property
    def d(self) -> int:
        return self.contexts.shape[1]

    @property
    def has_snapshots(self) -> bool:
        return self.snapshots is not None

    def sample(self, t: int) -> LoggedSample:
        """The sample of period `t` (1-based)."""
        if not 1 <= t <= self.T:
            raise IndexError(f"period {t} is outside 1..{self.T}")
        i = t - 1
        return LoggedSample(
            t=t,
            x=self.contexts[i],
            a=int(self.actions[i]),
            y=float(self.rewards[i]),
            propensities=self.propensities[i],
        )

    @property
    def samples(self) -> List[LoggedSample]:
        return [self.sample(t) for t in range(1, self.T + 1)]

    def prefix(self, t: int) -> "HistoricalLog":
        """The first `t` periods `Omega_t` as a log of its own."""
        if not 1 <= t <= self.T:
            raise ValueError(f"prefix length must be in 1..{self.T}, got {t}")
        return HistoricalLog(
            contexts=self.contexts[:t],
            actions=self.actions[:t],
            rewards=self.rewards[:t],
            propensities=self.propensities[:t],
            snapshots=None if self.snapshots is None else self.snapshots[:t],
            source_rows=None if self.source_rows is None else self.source_rows[:t],
        )

    def behavior_probs(self, t: int, contexts: np.ndarray) -> np.ndarray:
        """`pi_t(. | X_i)` for arbitrary contexts, read from the snapshot of period `t`."""
        if not self.has_snapshots:
            raise ValueError("this log carries no behavior snapshots; the behavior policy of past periods is unknown")
        return self.snapshots[t - 1].probs(contexts)

    def equals(self, other: "HistoricalLog") -> bool:
        return (
            np.array_equal(self.contexts, other.contexts)
            and np.array_equal(self.actions, other.actions)
            and np.array_equal(self.rewards, other.rewards)
            and np.array_equal(self.propensities, other.propensities)
        )


@dataclass(frozen=True)
class ImportanceRatioBound:
    """
    Constants of the boundedness assumptions.

    Args:
        C1 (`float`): bound on `pi_e(a|x) / pi_t(a|x)`.
        C2 (`float`): bound on `|Y|` and on the outcome model.
        C3 (`float`): bound on `1 / sqrt(g_t)`.
        epsilon (`float`): floor of the variance weights, at most `C3 ** -2`.
    """

    C1: float = 20.0
    C2: float = 1.0
    C3: float = 1.0e3 ** 0.5
    epsilon: float = 1e-3

    def __post_init__(self):
        for name in ("C1", "C2", "C3", "epsilon"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value}")
        if self.epsilon > self.C3**-2 * (1.0 + 1e-12):
            raise ValueError(f"epsilon = {self.epsilon} must not exceed C3^-2 = {self.C3 ** -2}")


@dataclass(frozen=True)
class AssumptionViolation:
    """One realized violation of the boundedness or overlap assumptions."""

    kind: str
    t: int
    value: float
    bound: float
    action: Optional[int] = None


def validate_log(
    log: HistoricalLog,
    eval_policy: PolicyFunction,
    bounds: ImportanceRatioBound,
    check_deterministic: bool = False,
) -> List[AssumptionViolation]:
    """
    Checks the boundedness and overlap assumptions on a realized log.

    Args:
        log (`HistoricalLog`): the logged data, nonempty.
        eval_policy (`PolicyFunction`): the evaluation policy.
        bounds (`ImportanceRatioBound`): `C1` bounds the importance ratios and `C2` the rewards.
        check_deterministic (`bool`): also report periods where the evaluation policy is not one-hot.

    Returns:
        `List[AssumptionViolation]`, empty when the assumptions hold on the realized log. Violations are ordered by
        period, then kind.

    Raises:
        `StructuralError` if the policy and the log disagree on the context dimension or the number of actions.
    """
    if log is None or len(log) == 0:
        raise ValueError("validate_log needs a nonempty log")
    if eval_policy.num_actions != log.K:
        raise StructuralError(f"evaluation policy has {eval_policy.num_actions} actions, the log has {log.K}")
    if eval_policy.dim is not None and eval_policy.dim != log.d:
        raise StructuralError(f"evaluation policy expects dimension {eval_policy.dim}, the log has dimension {log.d}")

    pi_e = eval_policy.probs(log.contexts)
    violations = []
    for i in range(log.T):
        t = i + 1
        for a in range(log.K):
            propensity = log.propensities[i, a]
            if propensity <= 0.0:
                violations.append(AssumptionViolation("nonpositive_propensity", t, float(propensity), 0.0, a))
                continue
            ratio = pi_e[i, a] / propensity
            if ratio > bounds.C1:
                violations.append(AssumptionViolation("importance_ratio", t, float(ratio), bounds.C1, a))
        if abs(log.rewards[i]) > bounds.C2:
            violations.append(AssumptionViolation("reward_bound", t, float(abs(log.rewards[i])), bounds.C2))
        if check_deterministic and not np.isclose(pi_e[i].max(), 1.0, atol=PROPENSITY_TOLERANCE, rtol=0.0):
            violations.append(AssumptionViolation("nondeterministic_evaluation", t, float(pi_e[i].max()), 1.0))

    if violations:
        logger.info(f"validate_log found {len(violations)} assumption violations on a log of {log.T} periods")
    return violations


def max_importance_ratio(log: HistoricalLog, pi_e_probs: np.ndarray) -> float:
    """Largest `pi_e(a|x_t) / pi_t(a|x_t)` over periods and actions."""
    return float(np.max(pi_e_probs / log.propensities))


@dataclass
class EstimateReport(BaseOutput):
    """
    Output of every estimator.

    Args:
        theta_hat (`float`): point estimate of the policy value.
        method (`str`): estimator tag, e.g. `"tsfa3ipw"`.
        weights (`np.ndarray`, *optional*): per-period variance weights `g_t` over the estimation window; `None`
            for unweighted estimators.
        standardized_stat_denominator (`float`, *optional*): `(1 / sqrt(T)) * sum_t 1 / sqrt(g_t)` over the window.
        ci_low (`float`, *optional*), ci_high (`float`, *optional*): confidence interval bounds.
        alpha (`float`): level of the interval.
        burn_in (`int`): number of discarded leading periods.
        diagnostics (`dict`): `max_importance_ratio`, `floor_hits`, `window_length`, ...
    """

    theta_hat: float
    method: str
    weights: Optional[np.ndarray] = None
    standardized_stat_denominator: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    alpha: float = 0.05
    burn_in: int = 0
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        super().__post_init__()
        if (self.ci_low is None) != (self.ci_high is None):
            raise ValueError("ci_low and ci_high must be given together")
        if self.ci_low is not None and not self.ci_low <= self.theta_hat <= self.ci_high:
            raise ValueError(f"interval [{self.ci_low}, {self.ci_high}] does not contain {self.theta_hat}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def has_interval(self) -> bool:
        return self.ci_low is not None

    @property
    def ci_width(self) -> Optional[float]:
        return None if self.ci_low is None else self.ci_high - self.ci_low

    def covers(self, value: float) -> Optional[bool]:
        if self.ci_low is None:
            return None
        return bool(self.ci_low <= value <= self.ci_high)

    def standardized_statistic(self, theta0: float) -> float:
        """`(1 / sqrt(T) * sum_t 1 / sqrt(g_t)) * (theta_hat - theta0)`, asymptotically standard normal."""
        if self.standardized_stat_denominator is None:
            raise ValueError(f"{self.method} has no standardized statistic")
        return self.standardized_stat_denominator * (self.theta_hat - theta0)
