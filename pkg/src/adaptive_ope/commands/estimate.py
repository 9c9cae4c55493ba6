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

import inspect
import json
from argparse import ArgumentParser, Namespace
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..envs.environment_utils import EvaluationCovariates, load_log_jsonl
from ..estimators.estimator_utils import DEFAULT_EPSILON, ESTIMATORS, VARIANCE_FORMS, OffPolicyEstimator
from ..nuisance.nuisance_utils import sequential_nuisance, zero_nuisance
from ..policies.policy_utils import load_policy
from ..utils import logging, to_json_safe
from . import BaseOpeCLICommand


logger = logging.get_logger(__name__)


def estimate_command_factory(args: Namespace):
    return EstimateCommand(args)


def load_covariates_jsonl(path: str) -> EvaluationCovariates:
    """Evaluation covariates from a JSON-lines file holding one `{"x": [...]}` object per line."""
    contexts = []
    with open(path, "r", encoding="utf-8") as reader:
        for line in reader:
            if line.strip():
                contexts.append(json.loads(line)["x"])
    if not contexts:
        raise ValueError(f"{path} contains no covariates")
    return EvaluationCovariates(np.asarray(contexts, dtype=float))


def select_estimators(
    names: List[str],
    has_snapshots: bool,
    has_covariates: bool,
    split_ratio: float = 0.5,
    **shared,
) -> Tuple[Dict[str, OffPolicyEstimator], Dict[str, str]]:
    """
    Builds the requested estimators that can run on an imported log. Returns `(estimators, disabled)` where
    `disabled` maps each skipped name to the reason.
    """
    estimators, disabled = {}, {}
    for name in names:
        if name not in ESTIMATORS:
            raise ValueError(f"unknown estimator {name!r}; available estimators: {sorted(ESTIMATORS)}")
        cls = ESTIMATORS[name]
        if name == "a3ipw":
            disabled[name] = "needs the true environment"
            continue
        if cls.needs_snapshots and not has_snapshots:
            disabled[name] = "the log carries no behavior snapshots"
            continue
        accepted = inspect.signature(cls.__init__).parameters
        kwargs = {k: v for k, v in shared.items() if k in accepted}
        if cls.needs_eval_covariates and not has_covariates:
            if "split_ratio" not in accepted:
                disabled[name] = "needs evaluation covariates (--covariates)"
                continue
            kwargs["split_ratio"] = split_ratio
        elif name == "fa3ipw_ss":
            kwargs["split_ratio"] = split_ratio
        estimators[name] = cls(**kwargs)
    for name, reason in disabled.items():
        logger.warning(f"estimator {name} disabled: {reason}")
    return estimators, disabled


class EstimateCommand(BaseOpeCLICommand):
    """`ope estimate`: runs estimators on an imported JSON-lines log with a saved evaluation policy."""

    @staticmethod
    def register_subcommand(parser: ArgumentParser):
        estimate_parser = parser.add_parser("estimate", help="Estimate a policy value from an imported log.")
        estimate_parser.add_argument("log", type=str, help="JSON-lines log.")
        estimate_parser.add_argument("--policy", type=str, required=True, help="Saved evaluation policy (JSON).")
        estimate_parser.add_argument(
            "--estimators",
            type=str,
            default="dm,adaipw,a2ipw,fa3ipw,sfa3ipw,tsfa3ipw,fa2daipw",
            help="Comma-separated estimator names.",
        )
        estimate_parser.add_argument("--covariates", type=str, default=None, help="JSON-lines evaluation covariates.")
        estimate_parser.add_argument("--nuisance", choices=("nw", "knn", "zero"), default="nw")
        estimate_parser.add_argument("--refit-every", type=int, default=10)
        estimate_parser.add_argument("--reward-bound", type=float, default=1.0, help="C2, bound on |y|.")
        estimate_parser.add_argument("--alpha", type=float, default=0.05)
        estimate_parser.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
        estimate_parser.add_argument("--variance-form", choices=VARIANCE_FORMS, default="per_arm")
        estimate_parser.add_argument("--split-ratio", type=float, default=0.5)
        estimate_parser.add_argument("--output", type=str, default=None, help="Write the reports (JSON) here.")
        estimate_parser.set_defaults(func=estimate_command_factory)

    def __init__(self, args: Namespace):
        self.args = args

    def run(self) -> int:
        args = self.args
        log = load_log_jsonl(args.log)
        pi_e = load_policy(args.policy)
        covariates: Optional[EvaluationCovariates] = None
        if args.covariates is not None:
            covariates = load_covariates_jsonl(args.covariates)

        names = [name.strip() for name in args.estimators.split(",") if name.strip()]
        estimators, disabled = select_estimators(
            names,
            has_snapshots=log.has_snapshots,
            has_covariates=covariates is not None,
            split_ratio=args.split_ratio,
            alpha=args.alpha,
            epsilon=args.epsilon,
            variance_form=args.variance_form,
        )
        if args.nuisance == "zero":
            nuisances = zero_nuisance(log.T, log.K, args.reward_bound)
        else:
            nuisances = sequential_nuisance(
                log, args.nuisance, refit_every=args.refit_every, reward_bound=args.reward_bound
            )

        reports = {name: est.estimate(log, pi_e, nuisances, covariates).to_dict() for name, est in estimators.items()}
        payload = json.dumps(to_json_safe({"reports": reports, "disabled": disabled}), indent=2) + "\n"
        if args.output is None:
            print(payload, end="")
        else:
            with open(args.output, "w", encoding="utf-8") as writer:
                writer.write(payload)
            logger.info(f"Reports saved in {args.output}")
        return 0
