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

import json
from argparse import ArgumentParser, Namespace

import numpy as np

from ..envs.environment_utils import generate_log, save_log_jsonl
from ..harness.experiment_config import load_experiment_config
from ..harness.experiment_runner import build_behavior, prepare_experiment
from ..policies.policy_utils import save_policy
from ..utils import logging
from . import BaseOpeCLICommand


logger = logging.get_logger(__name__)


def simulate_command_factory(args: Namespace):
    return SimulateCommand(args)


class SimulateCommand(BaseOpeCLICommand):
    """
    `ope simulate`: generates one log from the environment and behavior policy of an experiment config and exports
    it as JSON lines, the same seeds as replication 0 of `ope run`.
    """

    @staticmethod
    def register_subcommand(parser: ArgumentParser):
        simulate_parser = parser.add_parser("simulate", help="Export a simulated log as JSON lines.")
        simulate_parser.add_argument("-c", "--config", type=str, default=None, help="Experiment config (JSON).")
        simulate_parser.add_argument("--seed", type=int, default=None)
        simulate_parser.add_argument("--periods", type=int, default=None, help="T; defaults to the config's.")
        simulate_parser.add_argument("--output", type=str, required=True, help="Destination JSON-lines file.")
        simulate_parser.add_argument(
            "--policy-output", type=str, default=None, help="Also save the evaluation policy (JSON)."
        )
        simulate_parser.set_defaults(func=simulate_command_factory)

    def __init__(self, args: Namespace):
        self.args = args

    def run(self) -> int:
        args = self.args
        cfg = load_experiment_config(args.config, seed=args.seed, num_periods=args.periods)
        setup = prepare_experiment(cfg)
        seed = cfg.config.base_seed
        episode = setup.env.start_episode(np.random.default_rng([seed, 0]))
        behavior = build_behavior(setup.behavior_spec, setup.env, seed)
        log = generate_log(setup.env, behavior, cfg.config.num_periods, episode=episode)
        save_log_jsonl(log, args.output)

        summary = {"periods": log.T, "actions": log.K, "dim": log.d, "output": args.output}
        if setup.theta0 is not None:
            summary["theta0"] = setup.theta0
        if args.policy_output is not None:
            if setup.pi_e is None:
                logger.warning("the evaluation policy is fit per replication in this mode and was not saved")
            else:
                save_policy(setup.pi_e, args.policy_output)
                summary["policy"] = args.policy_output
        print(json.dumps(summary, indent=2))
        return 0
