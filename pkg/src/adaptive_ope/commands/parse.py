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

from ..ingest import dataset_stats, parse_libsvm, save_libsvm, standardize_features
from . import BaseOpeCLICommand


def parse_command_factory(args: Namespace):
    return ParseCommand(args)


class ParseCommand(BaseOpeCLICommand):
    @staticmethod
    def register_subcommand(parser: ArgumentParser):
        parse_parser = parser.add_parser("parse", help="Parse a LIBSVM classification file.")
        parse_parser.add_argument("path", type=str)
        parse_parser.add_argument("--stats", action="store_true", help="Print a JSON summary of the dataset.")
        parse_parser.add_argument("--standardize", action="store_true", help="Standardize the feature columns.")
        parse_parser.add_argument("--n-features", type=int, default=None, help="Dense dimension.")
        parse_parser.add_argument("--output", type=str, default=None, help="Write the dataset back in LIBSVM format.")
        parse_parser.set_defaults(func=parse_command_factory)

    def __init__(self, args: Namespace):
        self.args = args

    def run(self) -> int:
        dataset = parse_libsvm(self.args.path, n_features=self.args.n_features)
        if self.args.standardize:
            dataset = standardize_features(dataset)
        if self.args.stats or self.args.output is None:
            print(json.dumps(dataset_stats(dataset), indent=2))
        if self.args.output is not None:
            save_libsvm(dataset, self.args.output)
        return 0
