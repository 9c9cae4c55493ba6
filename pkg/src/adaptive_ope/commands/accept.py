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

from ..harness.acceptance import SUITES, run_acceptance
from . import BaseOpeCLICommand


def accept_command_factory(args: Namespace):
    return AcceptCommand(args)


class AcceptCommand(BaseOpeCLICommand):
    @staticmethod
    def register_subcommand(parser: ArgumentParser):
        accept_parser = parser.add_parser("accept", help=f"Run an acceptance suite: {', '.join(SUITES)}.")
        accept_parser.add_argument("suite", type=str, help="Suite name.")
        accept_parser.add_argument("--seed", type=int, default=0)
        accept_parser.add_argument("--replications", type=int, default=None, help="Override the suite's count.")
        accept_parser.add_argument("--workers", type=int, default=1)
        accept_parser.add_argument(
            "--dataset", action="append", default=None, help="LIBSVM file for table_pattern (pass twice)."
        )
        accept_parser.add_argument("--json", action="store_true", help="Print the verdict as JSON.")
        accept_parser.set_defaults(func=accept_command_factory)

    def __init__(self, args: Namespace):
        self.args = args

    def run(self) -> int:
        args = self.args
        result = run_acceptance(
            args.suite,
            num_replications=args.replications,
            seed=args.seed,
            num_workers=args.workers,
            datasets=args.dataset,
        )
        if args.json:
            print(json.dumps(result.to_dict(), indent=2))
        else:
            status = "SKIPPED" if result.skipped else ("PASSED" if result.passed else "FAILED")
            print(f"{result.suite}: {status} ({result.runtime:.1f}s) {result.message}".rstrip())
            for check in result.checks:
                mark = "ok  " if check["passed"] else "FAIL"
                print(f"  [{mark}] {check['name']}: {check['value']} ({check['threshold']})")
        return 0 if result.passed else 1
