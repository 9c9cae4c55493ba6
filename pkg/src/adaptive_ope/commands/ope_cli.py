#!/usr/bin/env python
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

import sys
from argparse import ArgumentParser
from typing import List, Optional

from ..utils import logging
from .accept import AcceptCommand
from .env import EnvironmentCommand
from .estimate import EstimateCommand
from .parse import ParseCommand
from .run import RunCommand
from .simulate import SimulateCommand


def build_parser() -> ArgumentParser:
    parser = ArgumentParser("Off-policy evaluation CLI tool", usage="ope <command> [<args>]")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at INFO level.")
    parser.add_argument("-q", "--quiet", action="store_true", help="Hide progress bars.")
    commands_parser = parser.add_subparsers(help="ope command helpers")

    # Register commands
    RunCommand.register_subcommand(commands_parser)
    AcceptCommand.register_subcommand(commands_parser)
    ParseCommand.register_subcommand(commands_parser)
    SimulateCommand.register_subcommand(commands_parser)
    EstimateCommand.register_subcommand(commands_parser)
    EnvironmentCommand.register_subcommand(commands_parser)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not hasattr(args, "func"):
        parser.print_help()
        return 1
    if args.verbose:
        logging.set_verbosity_info()
    if args.quiet:
        logging.disable_progress_bar()

    # Run
    service = args.func(args)
    try:
        return service.run()
    except (ValueError, FileNotFoundError, NotImplementedError) as err:
        print(f"ope: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
