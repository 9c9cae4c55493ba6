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
Property suites with fixed seeds. Each suite returns a [`SuiteResult`] holding one verdict per check, so the results
can be consumed by scripts as well as read by humans.
"""
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from ..core import ConstantPolicy, LoggedSample
from ..envs.environment_synthetic import SyntheticEnvironment
from ..envs.environment_utils import generate_log, true_policy_value
from ..estimators.estimator_baselines import a2ipw_estimate, adaipw_estimate
from ..estimators.estimator_oracle import oracle_sigma_star, oracle_variance_weights
from ..estimators.estimator_utils import ScoreInputs, VarianceWeights, score, variance_estimate
from ..estimators.estimator_weighted import a3ipw_estimate, fa2daipw_estimate, fa3ipw_estimate
from ..ingest import LibsvmParseError, dataset_stats, parse_libsvm, serialize_libsvm
from ..nuisance.nuisance_utils import OracleNuisancePair, oracle_nuisance, sequential_nuisance, zero_nuisance
from ..policies.policy_logistic import LinearArgmaxPolicy
from ..policies.policy_random_walk import RandomWalkPolicy
from ..policies.policy_utils import CyclicPolicy, MixturePolicy, MixturePolicyFunction
from ..utils import BaseOutput, logging
from .experiment_config import DEFAULT_ENV_SPEC, ExperimentConfig
from .experiment_runner import aggregate, run_replications


logger = logging.get_logger(__name__)


@dataclass
class SuiteResult(BaseOutput):
    """
    Verdict of one acceptance suite.

    Args:
        suite (`str`): suite name.
        passed (`bool`): whether every check passed (`True` for a skipped suite).
        checks (`List[dict]`): `{"name", "value", "threshold", "passed"}` per check.
        runtime (`float`): seconds.
        skipped (`bool`): the suite could not run, see `message`.
        message (`str`): reason for skipping.
    """

    suite: str
    passed: bool
    checks: List[Dict[str, Any]] = field(default_factory=list)
    runtime: float = 0.0
    skipped: bool = False
    message: str = ""


def _check(name: str, value, threshold: str, passed: bool) -> Dict[str, Any]:
    return {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}


def discrete_environment() -> SyntheticEnvironment:
    """Two contexts, two actions, Bernoulli rewards and rational probabilities."""
    return SyntheticEnvironment(
        num_actions=2,
        dim=1,
        arm_weights=[[0.25], [-0.25]],
        arm_intercepts=[0.5, 0.5],
        context_law="finite",
        contexts=[[-1.0], [1.0]],
        context_probs=[0.25, 0.75],
        noise="bernoulli",
        reward_bound=1.0,
    )


def noisy_finite_environment() -> SyntheticEnvironment:
    """Three actions over four contexts with truncated Gaussian noise, so every conditional variance is positive."""
    return SyntheticEnvironment(
        num_actions=3,
        dim=2,
        arm_weights=[[0.3, -0.1], [0.0, 0.4], [-0.2, 0.1]],
        arm_intercepts=[0.5, 0.3, 0.6],
        context_law="finite",
        contexts=[[-1.0, 0.5], [0.0, 0.0], [1.0, -0.5], [0.5, 1.0]],
        context_probs=[0.125, 0.25, 0.375, 0.25],
        noise="truncated_gaussian",
        noise_scale=0.2,
        reward_bound=2.0,
    )


def _best_arm_policy(env: SyntheticEnvironment, weight: float) -> MixturePolicyFunction:
    return MixturePolicyFunction(LinearArgmaxPolicy(*env.linear_parameters()), weight)


def _rw_behavior(env, seed, step_sd=0.1, weight=0.8):
    return MixturePolicy(RandomWalkPolicy(num_actions=env.num_actions, step_sd=step_sd, seed=seed), weight)


def unbiasedness_suite(num_replications: Optional[int] = None, seed: int = 0, **kwargs) -> List[Dict[str, Any]]:
    """
    Exact conditional mean of the augmented term minus `theta_0`, given the realized past, by enumeration of every
    (context, action, reward) outcome of every period.
    """
    env = discrete_environment()
    support = env.support
    pi_e = _best_arm_policy(env, 0.5)
    theta0 = true_policy_value(env, pi_e)
    num_periods = 30
    worst = 0.0
    for rep in range(num_replications or 10):
        log = generate_log(env, _rw_behavior(env, [seed, rep, 1]), num_periods, seed=[seed, rep])
        nuisances = sequential_nuisance(log, "knn", refit_every=1, reward_bound=1.0, num_neighbors=3)
        for t in range(1, num_periods + 1):
            pair, snapshot = nuisances[t], log.snapshots[t - 1]
            expectation = 0.0
            for x, p_x, means in zip(support.contexts, support.weights, support.means):
                probs = snapshot.prob(x)
                for a in range(env.num_actions):
                    for y, p_y in ((1.0, means[a]), (0.0, 1.0 - means[a])):
                        if p_y == 0.0:
                            continue
                        sample = LoggedSample(t=t, x=x, a=a, y=y, propensities=probs)
                        value = score(ScoreInputs(sample, pi_e, pair, theta0))
                        expectation += p_x * probs[a] * p_y * value
            worst = max(worst, abs(expectation))
    return [_check("max |E[q_t - theta_0 | past]|", worst, "<= 1e-12", worst <= 1e-12)]


def variance_oracle_suite(num_replications: Optional[int] = None, seed: int = 0, **kwargs) -> List[Dict[str, Any]]:
    """Variance estimate over the full support with the true outcome models against the exact conditional variance."""
    env = noisy_finite_environment()
    support = env.support
    covariates = support.as_covariates()
    pair = OracleNuisancePair(env)
    pi_e = _best_arm_policy(env, 0.6)
    theta0 = true_policy_value(env, pi_e)
    rng = np.random.default_rng(seed)
    checks = []
    for variance_form in ("per_arm", "pooled"):
        worst = 0.0
        for _ in range(num_replications or 100):
            inner = LinearArgmaxPolicy(rng.normal(size=(env.num_actions, env.dim)), rng.normal(size=env.num_actions))
            snapshot = MixturePolicyFunction(inner, rng.uniform(0.1, 0.9), kind="behavior-snapshot")
            estimate = variance_estimate(1, covariates, pi_e, snapshot, pair, theta0, variance_form=variance_form)
            exact = oracle_sigma_star(env, snapshot, pi_e, theta0, variance_form=variance_form)
            worst = max(worst, abs(estimate - exact) / max(1.0, abs(exact)))
        checks.append(_check(f"max relative gap ({variance_form})", worst, "<= 1e-12", worst <= 1e-12))
    return checks


def normality_config(num_periods: int = 1000, num_replications: int = 1000, seed: int = 0, **overrides):
    """Synthetic environment with a mixed random-walk behavior policy, which does not converge."""
    return ExperimentConfig(
        env=dict(DEFAULT_ENV_SPEC),
        behavior={"type": "rw", "weight": 0.7, "step_sd": 0.05},
        evaluation={"type": "best_arm", "weight": 0.7},
        nuisance={"method": "nw", "refit_every": 10},
        num_periods=num_periods,
        num_covariates=1000,
        num_replications=num_replications,
        base_seed=seed,
        **overrides,
    )


def normality_suite(
    num_replications: Optional[int] = None, seed: int = 0, num_workers: int = 1, **kwargs
) -> List[Dict[str, Any]]:
    cfg = normality_config(
        num_replications=num_replications or 1000, seed=seed, estimators=["tsfa3ipw"], num_workers=num_workers
    )
    _, records = run_replications(cfg)
    estimates = [r["estimates"][0] for r in records]
    statistics = np.array([e["statistic"] for e in estimates])
    coverage = float(np.mean([e["ci_low"] <= r["theta0"] <= e["ci_high"] for r, e in zip(records, estimates)]))
    result = stats.anderson(statistics, dist="norm")
    critical = float(result.critical_values[list(result.significance_level).index(1.0)])
    normal = bool(result.statistic < critical)
    return [
        _check("Anderson-Darling statistic", float(result.statistic), f"< {critical} (1% level)", normal),
        _check("95% interval coverage", coverage, "in [0.92, 0.975]", 0.92 <= coverage <= 0.975),
    ]


def consistency_suite(
    num_replications: Optional[int] = None, seed: int = 0, num_workers: int = 1, **kwargs
) -> List[Dict[str, Any]]:
    """Absolute errors at T=500 and T=4000 on the same seeds; the longer logs must win a one-sided sign test."""
    errors = {}
    for num_periods in (500, 4000):
        cfg = normality_config(
            num_periods=num_periods,
            num_replications=num_replications or 200,
            seed=seed,
            estimators=["fa3ipw"],
            num_workers=num_workers,
        )
        _, records = run_replications(cfg)
        errors[num_periods] = np.array([abs(r["estimates"][0]["theta_hat"] - r["theta0"]) for r in records])
    short, long = errors[500], errors[4000]
    wins = int(np.sum(long < short))
    trials = int(np.sum(long != short))
    p_value = float(stats.binomtest(wins, trials, 0.5, alternative="greater").pvalue) if trials else 1.0
    improved = bool(np.median(long) < np.median(short))
    return [
        _check("median |error| T=500", float(np.median(short)), "> median at T=4000", improved),
        _check("median |error| T=4000", float(np.median(long)), "< median at T=500", improved),
        _check("sign test p-value", p_value, "< 0.01", p_value < 0.01),
    ]


def weight_optimality_suite(num_replications: Optional[int] = None, seed: int = 0, **kwargs) -> List[Dict[str, Any]]:
    """
    A fixed schedule alternates a behavior vector favouring the evaluated action with one starving it, so the known
    per-period variances differ by more than 4x. Inverse-root-variance weights must beat equal weights.
    """
    env = discrete_environment()
    pi_e = ConstantPolicy([1.0, 0.0])
    theta0 = true_policy_value(env, pi_e)
    schedule = CyclicPolicy([[0.8, 0.2], [0.05, 0.95]], block_length=25)
    num_periods = 200
    weighted, unweighted = [], []
    ratio = None
    for rep in logging.tqdm(range(num_replications or 2000), desc="weight optimality"):
        log = generate_log(env, schedule, num_periods, seed=[seed, rep])
        nuisances = oracle_nuisance(num_periods, env)
        weights = oracle_variance_weights(env, log, pi_e, theta0, variance_form="pooled")
        if ratio is None:
            ratio = float(weights.g.max() / weights.g.min())
        weighted.append(a3ipw_estimate(log, pi_e, nuisances, weights).theta_hat)
        unweighted.append(a2ipw_estimate(log, pi_e, nuisances).theta_hat)
    n = len(weighted)
    var_weighted = float(np.var(weighted, ddof=1))
    var_unweighted = float(np.var(unweighted, ddof=1))
    p_value = float(stats.f.sf(var_unweighted / var_weighted, n - 1, n - 1))
    return [
        _check("max / min known variance", ratio, ">= 4", ratio >= 4.0),
        _check("Var(a3ipw)", var_weighted, "< Var(a2ipw)", var_weighted < var_unweighted),
        _check("F-test p-value", p_value, "< 0.01", p_value < 0.01),
    ]


def reductions_suite(num_replications: Optional[int] = None, seed: int = 0, **kwargs) -> List[Dict[str, Any]]:
    """Bitwise identities between estimators on random logs."""
    env = noisy_finite_environment()
    pi_e = _best_arm_policy(env, 0.7)
    mismatches = {"adaipw = a2ipw(f=0)": 0, "a2ipw = a3ipw(constant g)": 0, "fa2daipw = fa3ipw(f=0)": 0}
    rng = np.random.default_rng(seed)
    num_logs = num_replications or 50
    for rep in range(num_logs):
        num_periods = int(rng.integers(5, 60))
        episode = env.start_episode(np.random.default_rng([seed, rep]))
        log = generate_log(env, _rw_behavior(env, [seed, rep, 1]), num_periods, episode=episode)
        covariates = episode.evaluation_covariates(50)
        nuisances = sequential_nuisance(log, "knn", refit_every=5, reward_bound=env.reward_bound, num_neighbors=5)
        zero = zero_nuisance(num_periods, env.num_actions, env.reward_bound)

        a2ipw = a2ipw_estimate(log, pi_e, nuisances).theta_hat
        if adaipw_estimate(log, pi_e).theta_hat != a2ipw_estimate(log, pi_e, zero).theta_hat:
            mismatches["adaipw = a2ipw(f=0)"] += 1
        constant = VarianceWeights(np.full(num_periods, rng.uniform(0.5, 3.0)), source="initializer")
        if a3ipw_estimate(log, pi_e, nuisances, constant).theta_hat != a2ipw:
            mismatches["a2ipw = a3ipw(constant g)"] += 1
        fa2daipw = fa2daipw_estimate(log, pi_e, nuisances, covariates).theta_hat
        if fa2daipw != fa3ipw_estimate(log, pi_e, nuisances.zero_mean(), covariates).theta_hat:
            mismatches["fa2daipw = fa3ipw(f=0)"] += 1
    return [
        _check(f"mismatches {name}", count, f"== 0 of {num_logs}", count == 0) for name, count in mismatches.items()
    ]


def table_pattern_suite(
    num_replications: Optional[int] = None,
    seed: int = 0,
    num_workers: int = 1,
    datasets: Optional[Sequence[str]] = None,
    **kwargs,
) -> List[Dict[str, Any]]:
    """On each classification dataset FA3IPW must not lose to AdaIPW in MSE under a random-walk behavior policy."""
    checks = []
    for path in datasets:
        num_rows = dataset_stats(parse_libsvm(path))["rows"]
        cfg = ExperimentConfig(
            env={"type": "dataset", "path": path, "with_replacement": num_rows * 0.7 < 2000},
            behavior={"type": "rw", "weight": 0.7},
            evaluation={"type": "logistic", "weight": 0.7},
            num_periods=1000,
            num_covariates=1000,
            num_replications=num_replications or 20,
            estimators=["adaipw", "fa3ipw"],
            base_seed=seed,
            num_workers=num_workers,
        )
        setup, records = run_replications(cfg)
        table = aggregate(setup, records)
        fa3ipw, adaipw = table.row("fa3ipw").mse, table.row("adaipw").mse
        checks.append(_check(f"MSE fa3ipw vs adaipw on {setup.env_name}", fa3ipw, f"<= {adaipw}", fa3ipw <= adaipw))
    return checks


def sample_splitting_suite(
    num_replications: Optional[int] = None, seed: int = 0, num_workers: int = 1, **kwargs
) -> List[Dict[str, Any]]:
    """Split-mode FA3IPW on exchangeable logs (static behavior policy), with no covariate file."""
    cfg = normality_config(
        num_replications=num_replications or 1000,
        seed=seed,
        estimators=["fa3ipw_ss"],
        split_ratio=0.5,
        num_workers=num_workers,
    )
    cfg = cfg.replace(behavior={"type": "uniform"})
    _, records = run_replications(cfg)
    covered = [
        r["estimates"][0]["ci_low"] <= r["theta0"] <= r["estimates"][0]["ci_high"] for r in records
    ]
    coverage = float(np.mean(covered))
    return [_check("95% interval coverage", coverage, "in [0.91, 0.98]", 0.91 <= coverage <= 0.98)]


MALFORMED_LIBSVM = (
    (["1 1:0.5", "abc 1:2"], 2),
    (["1 1:0.5 1:0.7"], 1),
    (["1 0:1"], 1),
    (["1 1:0.5", "", "2 2:nan"], 3),
    (["1 a:1"], 1),
    (["1 1:"], 1),
    (["1 1:1", "2 2:2", "1.5 1:1"], 3),
    (["1 3:1 2:1"], 1),
    (["1 1:1", "2 1 2"], 2),
)


def random_libsvm_lines(num_lines: int, seed: int = 0, max_features: int = 50) -> List[str]:
    rng = np.random.default_rng(seed)
    labels = np.array([-1, 1, 2, 3])
    lines = []
    for _ in range(num_lines):
        count = int(rng.integers(0, 8))
        indices = np.sort(rng.choice(max_features, size=count, replace=False)) + 1
        values = rng.normal(size=count) * 10.0 ** rng.integers(-4, 5, size=count)
        tokens = [str(labels[rng.integers(len(labels))])]
        tokens.extend(f"{i}:{v:.6g}" for i, v in zip(indices, values))
        lines.append(" ".join(tokens))
    return lines


def parser_suite(num_replications: Optional[int] = None, seed: int = 0, **kwargs) -> List[Dict[str, Any]]:
    """Parse, serialize, parse again: the second serialization must equal the first; malformed lines are located."""
    lines = random_libsvm_lines(num_replications or 100_000, seed)
    first = serialize_libsvm(parse_libsvm(lines))
    second = serialize_libsvm(parse_libsvm(first.splitlines()))
    located = 0
    for corpus, line_number in MALFORMED_LIBSVM:
        try:
            parse_libsvm(corpus)
        except LibsvmParseError as err:
            located += int(err.line_number == line_number)
    return [
        _check("second serialization equals the first", first == second, "True", first == second),
        _check(
            "malformed lines rejected at the right line",
            located,
            f"== {len(MALFORMED_LIBSVM)}",
            located == len(MALFORMED_LIBSVM),
        ),
    ]


SUITES: Dict[str, Callable[..., List[Dict[str, Any]]]] = {
    "unbiasedness": unbiasedness_suite,
    "variance_oracle": variance_oracle_suite,
    "normality": normality_suite,
    "consistency": consistency_suite,
    "weight_optimality": weight_optimality_suite,
    "reductions": reductions_suite,
    "table_pattern": table_pattern_suite,
    "sample_splitting": sample_splitting_suite,
    "parser": parser_suite,
}


def run_acceptance(
    suite: str,
    num_replications: Optional[int] = None,
    seed: int = 0,
    num_workers: int = 1,
    datasets: Optional[Sequence[str]] = None,
) -> SuiteResult:
    """
    Runs one property suite.

    Args:
        suite (`str`): one of `SUITES`.
        num_replications (`int`, *optional*): replaces the suite's default count (logs, snapshots, replications or
            parser lines).
        seed (`int`, defaults to 0): base seed.
        num_workers (`int`, defaults to 1): worker processes for the replication-based suites.
        datasets (`Sequence[str]`, *optional*): LIBSVM files for `table_pattern`, which is skipped with fewer than two.

    Raises:
        `ValueError` listing the available suites when `suite` is unknown.
    """
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; available suites: {', '.join(SUITES)}")
    if suite == "table_pattern" and (datasets is None or len(datasets) < 2):
        logger.warning("table_pattern needs two classification datasets; skipping")
        return SuiteResult(suite=suite, passed=True, skipped=True, message="needs two LIBSVM datasets (--dataset)")

    start = time.perf_counter()
    checks = SUITES[suite](num_replications=num_replications, seed=seed, num_workers=num_workers, datasets=datasets)
    runtime = time.perf_counter() - start
    passed = all(check["passed"] for check in checks)
    logger.info(f"suite {suite}: {'passed' if passed else 'FAILED'} in {runtime:.1f}s")
    return SuiteResult(suite=suite, passed=passed, checks=checks, runtime=runtime)
