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

from argparse import ArgumentParser, Namespace

from ..harness.experiment_config import load_experiment_config
from ..harness.experiment_runner import TABLE_FORMATS, emit_table, run_experiment
from ..utils import logging
from . import BaseOpeCLICommand


logger = logging.get_logger(__name__)


def run_command_factory(args: Namespace):
    return RunCommand(args)


class RunCommand(BaseOpeCLICommand):
    """`ope run -c cfg.json`: replication experiment, result table on stdout or in `--output`."""

    @staticmethod
    def register_subcommand(parser: ArgumentParser):
        run_parser = parser.add_parser("run", help="Run a replication experiment and emit its result table.")
        run_parser.add_argument("-c", "--config", type=str, default=None, help="Experiment config (JSON).")
        run_parser.add_argument("--seed", type=int, default=None, help="Base seed; overrides OPE_SEED and the file.")
        run_parser.add_argument("--output", type=str, default=None, help="Write the table here instead of stdout.")
        run_parser.add_argument("--format", choices=TABLE_FORMATS, default="csv")
        run_parser.add_argument("--workers", type=int, default=None, help="Worker processes.")
        run_parser.add_argument("--replications", type=int, default=None, help="Number of replications R.")
        run_parser.add_argument(
            "--allow-failures", action="store_true", help="Record failed replications and keep going."
        )
        run_parser.add_argument(
            "--fit-on-log",
            "--paper-faithful",
            dest="fit_on_log",
            action="store_true",
            help="Fit the evaluation classifier on each replication's logged rows (alias: --paper-faithful).",
        )
        run_parser.set_defaults(func=run_command_factory)

    def __init__(self, args: Namespace):
        self.args = args

    def run(self) -> int:
        args = self.args
        cfg = load_experiment_config(
            args.config,
            seed=args.seed,
            output=args.output,
            num_workers=args.workers,
            num_replications=args.replications,
            allow_failures=True if args.allow_failures else None,
            fit_on_log=True if args.fit_on_log else None,
        )
        table = run_experiment(cfg)
        text = emit_table(table, cfg.config.output, format=args.format)
        if cfg.config.output is None:
            print(text, end="")
        if table.failures:
            logger.warning(f"{len(table.failures)} of {cfg.config.num_replications} replications failed")
        return 0
