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
Replication engine: builds the environment and the evaluation policy once, runs independent seeded replications
(optionally over a process pool) and aggregates the squared errors and interval coverage of every estimator.
"""
import csv
import inspect
import io
import json
import os
import time
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core import ConstantPolicy, HistoricalLog, PolicyFunction
from ..envs.environment_classification import ClassificationEnvironment, split_rows
from ..envs.environment_synthetic import SyntheticEnvironment
from ..envs.environment_utils import BanditEnvironment, generate_log, true_policy_value
from ..estimators.estimator_utils import ESTIMATORS, OffPolicyEstimator
from ..ingest import parse_libsvm, standardize_features
from ..nuisance.nuisance_utils import NuisanceSequence, oracle_nuisance, sequential_nuisance, zero_nuisance
from ..policies.policy_linucb import LinUCBPolicy
from ..policies.policy_logistic import LinearArgmaxPolicy, fit_evaluation_policy
from ..policies.policy_random_walk import RandomWalkPolicy
from ..policies.policy_utils import AdaptivePolicy, MixturePolicy, MixturePolicyFunction, uniform_policy
from ..utils import BaseOutput, logging, to_json_safe
from .experiment_config import ExperimentConfig


logger = logging.get_logger(__name__)

RESULT_COLUMNS = (
    "estimator",
    "env",
    "policy",
    "num_replications",
    "mse",
    "sd_squared_error",
    "mean_ci_width",
    "coverage",
    "mean_runtime",
    "max_importance_ratio",
)
TABLE_FORMATS = ("csv", "json")
CLASSIFIER_KEYS = ("num_iterations", "learning_rate", "l2")


class ReplicationError(RuntimeError):
    """A replication failed; carries its index and seed so it can be rerun alone."""

    def __init__(self, index: int, seed: int, message: str):
        super().__init__(f"replication {index} (seed {seed}) failed: {message}")
        self.index = index
        self.seed = seed


@dataclass
class ResultRow(BaseOutput):
    """
    Aggregate of one estimator over the replications of an experiment.

    Args:
        estimator (`str`), env (`str`), policy (`str`): identifiers of the row.
        num_replications (`int`): number of successful replications.
        mse (`float`): mean of `(theta_hat - theta_0) ** 2`.
        sd_squared_error (`float`): standard deviation of the squared errors.
        mean_ci_width (`float`, *optional*): mean interval width, `None` for estimators without intervals.
        coverage (`float`, *optional*): share of intervals containing `theta_0`.
        mean_runtime (`float`): mean seconds per estimate.
        max_importance_ratio (`float`, *optional*): largest realized `pi_e / pi_t` over all logs.
    """

    estimator: str
    env: str
    policy: str
    num_replications: int
    mse: float
    sd_squared_error: float
    mean_ci_width: Optional[float] = None
    coverage: Optional[float] = None
    mean_runtime: float = 0.0
    max_importance_ratio: Optional[float] = None


@dataclass
class ResultTable(BaseOutput):
    rows: List[ResultRow]
    failures: List[Dict[str, Any]] = field(default_factory=list)

    def row(self, estimator: str) -> ResultRow:
        for row in self.rows:
            if row.estimator == estimator:
                return row
        raise KeyError(f"no row for estimator {estimator!r}")


@dataclass
class ExperimentSetup:
    """Pieces shared by every replication; built once in the parent process and sent to the workers."""

    config: Dict[str, Any]
    env: BanditEnvironment
    env_name: str
    policy_name: str
    pi_e: Optional[PolicyFunction]
    theta0: Optional[float]
    estimators: Dict[str, OffPolicyEstimator]
    behavior_spec: Dict[str, Any]
    evaluation_spec: Dict[str, Any]
    nuisance_spec: Dict[str, Any]


def build_environment(
    spec: Dict[str, Any], seed: int, fit_on_log: bool = False, fit_fraction: float = 0.3
) -> Tuple[BanditEnvironment, str, Optional[Tuple[np.ndarray, np.ndarray]]]:
    """
    Returns the environment, its name and, for dataset environments outside fit-on-log mode, the
    `(features, labels)` rows reserved for the evaluation classifier.
    """
    spec = dict(spec)
    env_type = spec.pop("type", "synthetic")
    name = spec.pop("name", None)
    if env_type == "synthetic":
        return SyntheticEnvironment.from_config(spec), name or "synthetic", None

    path = spec["path"]
    dataset = parse_libsvm(path)
    if spec.get("standardize", True):
        dataset = standardize_features(dataset)
    rows = np.arange(len(dataset))
    max_rows = spec.get("max_rows")
    if max_rows is not None and max_rows < len(dataset):
        rows = np.sort(np.random.default_rng([seed, 3]).choice(len(dataset), size=max_rows, replace=False))
    name = name or os.path.splitext(os.path.basename(path))[0]
    with_replacement = bool(spec.get("with_replacement", False))
    if fit_on_log:
        return ClassificationEnvironment(dataset, with_replacement, rows=rows), name, None
    fit_local, bandit_local = split_rows(rows.shape[0], fit_fraction, seed)
    fit_rows = rows[fit_local]
    features = dataset.dense()[fit_rows]
    env = ClassificationEnvironment(dataset, with_replacement, rows=rows[bandit_local])
    return env, name, (features, dataset.labels[fit_rows])


def build_evaluation_policy(
    spec: Dict[str, Any], env: BanditEnvironment, seed: int, fit_data: Optional[Tuple[np.ndarray, np.ndarray]] = None
) -> PolicyFunction:
    policy_type = spec["type"]
    weight = spec.get("weight", 0.7)
    if policy_type == "uniform":
        return uniform_policy(env.num_actions)
    if policy_type == "constant":
        return MixturePolicyFunction(ConstantPolicy(spec["probs"]), weight)
    if policy_type == "best_arm":
        if not isinstance(env, SyntheticEnvironment):
            raise ValueError("the best_arm evaluation policy needs a synthetic environment")
        return MixturePolicyFunction(LinearArgmaxPolicy(*env.linear_parameters()), weight)

    classifier_kwargs = {k: spec[k] for k in CLASSIFIER_KEYS if k in spec}
    if fit_data is None:
        if not isinstance(env, SyntheticEnvironment):
            raise ValueError("a dataset environment needs training rows for the evaluation classifier")
        rng = np.random.default_rng([seed, 2])
        features = np.stack([env.sample_context(rng) for _ in range(spec.get("num_fit_contexts", 1000))])
        fit_data = (features, np.argmax(env.mean_rewards(features), axis=1))
    return fit_evaluation_policy(fit_data, weight, num_classes=env.num_actions, **classifier_kwargs)


def policy_label(spec: Dict[str, Any]) -> str:
    if "name" in spec:
        return spec["name"]
    if spec["type"] == "uniform":
        return "uniform"
    return f"{spec['type']}(w={spec.get('weight', 0.7)})"


def build_behavior(spec: Dict[str, Any], env: BanditEnvironment, seed: int) -> Union[AdaptivePolicy, PolicyFunction]:
    """Fresh behavior policy of one replication, mixed with the uniform policy by `spec["weight"]`."""
    behavior_type = spec.get("type", "rw")
    if behavior_type == "uniform":
        return uniform_policy(env.num_actions)
    if behavior_type == "rw":
        inner = RandomWalkPolicy(
            num_actions=env.num_actions,
            step_sd=spec.get("step_sd", 0.05),
            floor=spec.get("floor", 1e-3),
            seed=[seed, 1],
        )
    elif behavior_type == "linucb":
        inner = LinUCBPolicy(
            num_actions=env.num_actions,
            dim=env.dim,
            ridge=spec.get("ridge", 1.0),
            exploration=spec.get("exploration", 1.0),
        )
    else:
        raise ValueError(f"unknown behavior type {behavior_type!r}")
    weight = spec.get("weight", 0.7)
    return inner if weight == 1.0 else MixturePolicy(inner, weight)


def build_nuisance(spec: Dict[str, Any], log: HistoricalLog, env: BanditEnvironment) -> NuisanceSequence:
    spec = dict(spec)
    method = spec.pop("method", "nw")
    refit_every = spec.pop("refit_every", 10)
    if method == "oracle":
        return oracle_nuisance(log.T, env)
    if method == "zero":
        return zero_nuisance(log.T, log.K, env.reward_bound)
    return sequential_nuisance(log, method, refit_every=refit_every, reward_bound=env.reward_bound, **spec)


def build_estimators(cfg: ExperimentConfig, env: BanditEnvironment) -> Dict[str, OffPolicyEstimator]:
    """Instantiates the configured estimators, passing every experiment key their constructor accepts."""
    shared = {
        "epsilon": cfg.config.epsilon,
        "alpha": cfg.config.alpha,
        "variance_form": cfg.config.variance_form,
        "two_step": cfg.config.two_step,
        "g_init": cfg.config.g_init,
        "split_ratio": cfg.config.split_ratio,
    }
    estimators = {}
    for name in cfg.estimator_names():
        cls = ESTIMATORS[name]
        accepted = inspect.signature(cls.__init__).parameters
        kwargs = {k: v for k, v in shared.items() if k in accepted}
        if name == "sfa3ipw":
            kwargs["burn_in"] = cfg.resolved_burn_in()
        if name == "tsfa3ipw":
            kwargs["split_ratio"] = None
        estimators[name] = cls(**kwargs)
    if "a3ipw" in estimators and env.support is None:
        raise ValueError("the oracle a3ipw estimator needs an environment with finite support")
    return estimators


def prepare_experiment(cfg: ExperimentConfig) -> ExperimentSetup:
    seed = cfg.config.base_seed
    env, env_name, fit_data = build_environment(
        cfg.env_spec(), seed, fit_on_log=cfg.config.fit_on_log, fit_fraction=cfg.config.fit_fraction
    )
    if env.max_periods is not None:
        needed = cfg.config.num_periods + cfg.config.num_covariates
        if cfg.config.num_periods > env.max_periods:
            raise ValueError(f"T={cfg.config.num_periods} exceeds the {env.max_periods} rows of {env_name}")
        if needed > env.max_periods:
            raise ValueError(
                f"T + N = {needed} exceeds the {env.max_periods} rows of {env_name}; logged rows and evaluation "
                "covariates must be disjoint"
            )

    evaluation_spec = cfg.evaluation_spec()
    pi_e, theta0 = None, None
    per_replication_fit = cfg.config.fit_on_log and evaluation_spec["type"] == "logistic"
    per_replication_fit = per_replication_fit and isinstance(env, ClassificationEnvironment)
    if not per_replication_fit:
        pi_e = build_evaluation_policy(evaluation_spec, env, seed, fit_data)
        theta0 = true_policy_value(env, pi_e)
        logger.info(f"policy value of {policy_label(evaluation_spec)} on {env_name}: {theta0}")

    return ExperimentSetup(
        config=dict(cfg.config),
        env=env,
        env_name=env_name,
        policy_name=policy_label(evaluation_spec),
        pi_e=pi_e,
        theta0=theta0,
        estimators=build_estimators(cfg, env),
        behavior_spec=cfg.behavior_spec(),
        evaluation_spec=evaluation_spec,
        nuisance_spec=cfg.nuisance_spec(),
    )


def run_replication(setup: ExperimentSetup, index: int) -> Dict[str, Any]:
    """
    One replication with seed `base_seed ^ index`. Returns a plain dictionary (safe to send between processes); a
    failure is returned under `error` rather than raised.
    """
    seed = setup.config["base_seed"] ^ index
    record = {"index": index, "seed": seed, "theta0": None, "estimates": [], "error": None}
    try:
        env = setup.env
        episode = env.start_episode(np.random.default_rng([seed, 0]))
        behavior = build_behavior(setup.behavior_spec, env, seed)
        log = generate_log(env, behavior, setup.config["num_periods"], episode=episode)
        covariates = None
        if any(est.needs_eval_covariates for est in setup.estimators.values()):
            covariates = episode.evaluation_covariates(setup.config["num_covariates"])

        pi_e, theta0 = setup.pi_e, setup.theta0
        if pi_e is None:
            # the classifier sees the rows of this replication's log
            fit_data = (log.contexts, env.labels_for(log.source_rows))
            pi_e = build_evaluation_policy(setup.evaluation_spec, env, seed, fit_data)
            theta0 = true_policy_value(env, pi_e)
        record["theta0"] = theta0

        nuisances = build_nuisance(setup.nuisance_spec, log, env)
        nuisances.predict_logged(log.contexts)
        for name, estimator in setup.estimators.items():
            start = time.perf_counter()
            report = estimator.estimate(log, pi_e, nuisances, covariates, env=env, theta0=theta0)
            runtime = time.perf_counter() - start
            statistic = None
            if report.standardized_stat_denominator is not None:
                statistic = report.standardized_statistic(theta0)
            record["estimates"].append(
                {
                    "estimator": name,
                    "theta_hat": report.theta_hat,
                    "ci_low": report.ci_low,
                    "ci_high": report.ci_high,
                    "statistic": statistic,
                    "runtime": runtime,
                    "max_importance_ratio": report.diagnostics.get("max_importance_ratio"),
                    "floor_hits": report.diagnostics.get("floor_hits", 0),
                }
            )
    except Exception as err:
        record["error"] = f"{err.__class__.__name__}: {err}"
    return record


_WORKER_SETUP = None


def _init_worker(setup: ExperimentSetup):
    global _WORKER_SETUP
    _WORKER_SETUP = setup


def _replication_worker(index: int) -> Dict[str, Any]:
    return run_replication(_WORKER_SETUP, index)


def run_replications(
    cfg: ExperimentConfig, setup: Optional[ExperimentSetup] = None
) -> Tuple[ExperimentSetup, List[Dict[str, Any]]]:
    """
    Runs every replication of `cfg`, in order. Results do not depend on `num_workers`: each replication draws from
    its own seeded streams.

    Raises:
        [`ReplicationError`] for the first failed replication unless `allow_failures` is set.
    """
    setup = prepare_experiment(cfg) if setup is None else setup
    indices = range(cfg.config.num_replications)
    description = f"{setup.env_name} / {setup.policy_name}"
    if cfg.config.num_workers == 1:
        records = [run_replication(setup, i) for i in logging.tqdm(indices, desc=description)]
    else:
        with Pool(processes=cfg.config.num_workers, initializer=_init_worker, initargs=(setup,)) as pool:
            records = list(
                logging.tqdm(pool.imap(_replication_worker, indices), total=len(indices), desc=description)
            )

    for record in records:
        if record["error"] is None:
            continue
        if not cfg.config.allow_failures:
            raise ReplicationError(record["index"], record["seed"], record["error"])
        logger.error(f"replication {record['index']} (seed {record['seed']}) failed: {record['error']}")
    return setup, records


def summarize_estimates(
    estimator: str,
    theta_hats: Sequence[float],
    theta0s: Sequence[float],
    env: str = "",
    policy: str = "",
    ci_lows: Optional[Sequence[Optional[float]]] = None,
    ci_highs: Optional[Sequence[Optional[float]]] = None,
    runtimes: Optional[Sequence[float]] = None,
    importance_ratios: Optional[Sequence[Optional[float]]] = None,
) -> ResultRow:
    """
    MSE, standard deviation of the squared errors (`ddof=1`, 0 for a single replication), interval width and coverage
    over estimates whose intervals exist.
    """
    theta_hats = np.asarray(theta_hats, dtype=float)
    theta0s = np.asarray(theta0s, dtype=float)
    squared = (theta_hats - theta0s) ** 2
    n = squared.shape[0]
    mean_width, coverage = None, None
    if ci_lows is not None:
        intervals = [(lo, hi, t0) for lo, hi, t0 in zip(ci_lows, ci_highs, theta0s) if lo is not None]
        if intervals:
            mean_width = float(np.mean([hi - lo for lo, hi, _ in intervals]))
            coverage = float(np.mean([lo <= t0 <= hi for lo, hi, t0 in intervals]))
    ratios = [r for r in (importance_ratios or []) if r is not None]
    return ResultRow(
        estimator=estimator,
        env=env,
        policy=policy,
        num_replications=n,
        mse=float(np.mean(squared)) if n else float("nan"),
        sd_squared_error=float(np.std(squared, ddof=1)) if n > 1 else 0.0,
        mean_ci_width=mean_width,
        coverage=coverage,
        mean_runtime=float(np.mean(runtimes)) if runtimes else 0.0,
        max_importance_ratio=float(max(ratios)) if ratios else None,
    )


def aggregate(setup: ExperimentSetup, records: List[Dict[str, Any]]) -> ResultTable:
    succeeded = [r for r in records if r["error"] is None]
    rows = []
    for name in setup.estimators:
        entries = [(r["theta0"], e) for r in succeeded for e in r["estimates"] if e["estimator"] == name]
        if not entries:
            continue
        rows.append(
            summarize_estimates(
                name,
                [e["theta_hat"] for _, e in entries],
                [t0 for t0, _ in entries],
                env=setup.env_name,
                policy=setup.policy_name,
                ci_lows=[e["ci_low"] for _, e in entries],
                ci_highs=[e["ci_high"] for _, e in entries],
                runtimes=[e["runtime"] for _, e in entries],
                importance_ratios=[e["max_importance_ratio"] for _, e in entries],
            )
        )
    failures = [{"index": r["index"], "seed": r["seed"], "error": r["error"]} for r in records if r["error"]]
    return ResultTable(rows=rows, failures=failures)


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    """
    Runs `cfg.num_replications` seeded replications and aggregates one row per estimator.

    Examples:

    ```py
    >>> from adaptive_ope import ExperimentConfig, run_experiment

    >>> cfg = ExperimentConfig(num_periods=200, num_covariates=200, num_replications=4, estimators=["a2ipw", "fa3ipw"])
    >>> table = run_experiment(cfg)
    >>> table.row("fa3ipw").coverage
    ```
    """
    setup, records = run_replications(cfg)
    return aggregate(setup, records)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def table_to_csv(table: ResultTable) -> str:
    """One line per row in `RESULT_COLUMNS` order; floats use the shortest decimal that round-trips."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in table.rows:
        writer.writerow([_format_cell(getattr(row, column)) for column in RESULT_COLUMNS])
    return buffer.getvalue()


def table_to_json(table: ResultTable) -> str:
    payload = {
        "columns": list(RESULT_COLUMNS),
        "rows": [{column: to_json_safe(getattr(row, column)) for column in RESULT_COLUMNS} for row in table.rows],
        "failures": to_json_safe(table.failures),
    }
    return json.dumps(payload, indent=2) + "\n"


def emit_table(table: ResultTable, path: Optional[Union[str, os.PathLike]] = None, format: str = "csv") -> str:
    """
    Serializes a result table as CSV or JSON, writes it to `path` when given and returns the text.
    """
    if format not in TABLE_FORMATS:
        raise ValueError(f"format must be one of {TABLE_FORMATS}, got {format!r}")
    text = table_to_csv(table) if format == "csv" else table_to_json(table)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as writer:
            writer.write(text)
        logger.info(f"Result table saved in {path}")
    return text


def load_table_json(path: Union[str, os.PathLike]) -> ResultTable:
    with open(path, "r", encoding="utf-8") as reader:
        payload = json.load(reader)
    rows = [ResultRow(**{column: row[column] for column in RESULT_COLUMNS}) for row in payload["rows"]]
    return ResultTable(rows=rows, failures=payload.get("failures", []))
