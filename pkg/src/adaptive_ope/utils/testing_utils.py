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
"""Helpers for the test suite: the `slow` marker, a ready-made adaptive log and the `--make-reports` hooks."""
import os
import unittest
from pathlib import Path
from typing import Optional

import numpy as np

from . import ENV_VARS_TRUE_VALUES


ENV_VARS_FALSE_VALUES = {"0", "OFF", "NO", "FALSE"}
MAKE_REPORTS_OPTION = "--make-reports"


def parse_flag_from_env(key: str, default: bool = False) -> bool:
    value = os.environ.get(key)
    if value is None:
        return default
    if value.upper() in ENV_VARS_TRUE_VALUES | ENV_VARS_FALSE_VALUES:
        return value.upper() in ENV_VARS_TRUE_VALUES
    raise ValueError(f"{key}={value} is neither a true nor a false flag")


_run_slow_tests = parse_flag_from_env("RUN_SLOW", default=False)


def slow(test_case):
    """Skips the Monte Carlo tests unless `RUN_SLOW` is set."""
    return unittest.skipUnless(_run_slow_tests, "Monte Carlo test, set RUN_SLOW=1")(test_case)


def random_log(num_periods: int = 50, seed: int = 0, env=None, weight: float = 0.8, step_sd: float = 0.1):
    """
    A small adaptive log from a random-walk behavior policy mixed with the uniform policy, with snapshots. Returns
    `(env, log, episode)`; the episode can still hand out evaluation covariates.
    """
    from ..envs import SyntheticEnvironment, generate_log
    from ..policies import MixturePolicy, RandomWalkPolicy

    if env is None:
        env = SyntheticEnvironment(
            num_actions=3,
            dim=2,
            arm_weights=[[0.2, 0.0], [0.0, 0.2], [-0.1, 0.1]],
            arm_intercepts=[0.2, 0.5, 0.3],
            num_contexts=8,
            noise="truncated_gaussian",
            noise_scale=0.1,
        )
    episode = env.start_episode(np.random.default_rng([seed, 0]))
    behavior = MixturePolicy(RandomWalkPolicy(num_actions=env.num_actions, step_sd=step_sd, seed=[seed, 1]), weight)
    log = generate_log(env, behavior, num_periods, episode=episode)
    return env, log, episode


def pytest_addoption_shared(parser):
    """Registers `--make-reports PREFIX`; safe to call from several `conftest.py` files."""
    try:
        parser.addoption(
            MAKE_REPORTS_OPTION,
            action="store",
            default=False,
            help="write duration, failure and stats reports to reports/PREFIX_*.txt",
        )
    except ValueError:
        pass


def pytest_terminal_summary_main(tr, id: Optional[str] = None):
    """
    Writes `reports/{id}_durations.txt`, `{id}_failures.txt` and `{id}_stats.txt` for a finished session.

    Args:
        tr: the `terminalreporter` handed to `pytest_terminal_summary`.
        id (`str`, *optional*): report prefix, `tests` by default.
    """
    from _pytest.config import create_terminal_writer

    prefix = Path("reports") / (id or "tests")
    prefix.parent.mkdir(parents=True, exist_ok=True)

    timed = [rep for reports in tr.stats.values() for rep in reports if hasattr(rep, "duration")]
    with open(f"{prefix}_durations.txt", "w") as f:
        for rep in sorted(timed, key=lambda r: r.duration, reverse=True):
            if rep.duration >= 0.05:
                f.write(f"{rep.duration:.2f}s {rep.when:<8} {rep.nodeid}\n")

    writer, tbstyle = tr._tw, tr.config.option.tbstyle
    tr.config.option.tbstyle = "short"
    try:
        for name, summary in (("failures", tr.summary_failures), ("stats", tr.summary_stats)):
            with open(f"{prefix}_{name}.txt", "w") as f:
                tr._tw = create_terminal_writer(tr.config, f)
                summary()
    finally:
        tr._tw, tr.config.option.tbstyle = writer, tbstyle
