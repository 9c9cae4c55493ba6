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

import platform
from argparse import ArgumentParser

import numpy
import scipy
import tqdm

from .. import __version__ as version
from ..dependency_versions_table import deps
from . import BaseOpeCLICommand


def info_command_factory(_):
    return EnvironmentCommand()


class EnvironmentCommand(BaseOpeCLICommand):
    @staticmethod
    def register_subcommand(parser: ArgumentParser):
        env_parser = parser.add_parser("env", help="Print platform and dependency versions for bug reports.")
        env_parser.set_defaults(func=info_command_factory)

    def run(self) -> int:
        info = self.collect()
        print("\nCopy-and-paste the text below in your GitHub issue.\n")
        print(self.format_dict(info))
        return 0

    @staticmethod
    def collect():
        return {
            "`adaptive-ope` version": version,
            "Platform": platform.platform(),
            "Python version": platform.python_version(),
            "NumPy version": f"{numpy.__version__} (requires {deps['numpy']})",
            "SciPy version": f"{scipy.__version__} (requires {deps['scipy']})",
            "tqdm version": f"{tqdm.__version__} (requires {deps['tqdm']})",
        }

    @staticmethod
    def format_dict(d):
        return "\n".join([f"- {prop}: {val}" for prop, val in d.items()]) + "\n"
