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


import os

from . import logging
from .logging import get_logger
from .outputs import BaseOutput, to_json_safe


logger = get_logger(__name__)


ENV_VARS_TRUE_VALUES = {"1", "ON", "YES", "TRUE"}

CONFIG_NAME = "config.json"
EXPERIMENT_CONFIG_NAME = "experiment_config.json"
OPE_SEED_ENV = "OPE_SEED"


def seed_from_env(default=None):
    """Base seed taken from `OPE_SEED` when set, `default` otherwise."""
    value = os.getenv(OPE_SEED_ENV)
    if value is None or value.strip() == "":
        return default
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"{OPE_SEED_ENV} must be an integer, got {value!r}")
