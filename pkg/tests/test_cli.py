# coding=utf-8
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

import contextlib
import io
import json
import os
import tempfile
import unittest
from unittest import mock

from adaptive_ope.commands.estimate import select_estimators
from adaptive_ope.commands.ope_cli import main
from adaptive_ope.harness import RESULT_COLUMNS, load_table_json
from adaptive_ope.utils import logging


CONFIG = {
    "num_periods": 30,
    "num_covariates": 30,
    "num_replications": 2,
    "estimators": ["adaipw", "a2ipw", "fa3ipw"],
    "nuisance": {"method": "knn", "num_neighbors": 3, "refit_every": 5},
}


def run_cli(*argv):
    stdout, stderr = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
        code = main(list(argv))
    return code, stdout.getvalue(), stderr.getvalue()


class CLITests(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()
        self.config_path = os.path.join(self.tmpdir.name, "experiment.json")
        with open(self.config_path, "w") as f:
            json.dump(CONFIG, f)

    def tearDown(self):
        self.tmpdir.cleanup()
        logging.enable_progress_bar()

    def path(self, name):
        return os.path.join(self.tmpdir.name, name)

    def test_no_command(self):
        code, _, _ = run_cli()
        assert code == 1

    def test_run(self):
        code, out, _ = run_cli("run", "-c", self.config_path, "--seed", "4")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == ",".join(RESULT_COLUMNS)
        assert [line.split(",")[0] for line in lines[1:]] == CONFIG["estimators"]

        # the seed flag beats the environment variable
        with mock.patch.dict(os.environ, {"OPE_SEED": "9"}):
            _, again, _ = run_cli("run", "-c", self.config_path, "--seed", "4")
        strip_runtime = [line.split(",")[:8] for line in again.splitlines()]
        assert strip_runtime == [line.split(",")[:8] for line in lines]

    def test_fit_on_log_alias(self):
        for flag in ("--fit-on-log", "--paper-faithful"):
            with mock.patch(
                "adaptive_ope.commands.run.load_experiment_config", side_effect=ValueError("stop")
            ) as load:
                code, _, _ = run_cli("run", "-c", self.config_path, flag)
            assert code == 2
            assert load.call_args.kwargs["fit_on_log"] is True

        with mock.patch("adaptive_ope.commands.run.load_experiment_config", side_effect=ValueError("stop")) as load:
            run_cli("run", "-c", self.config_path)
        assert load.call_args.kwargs["fit_on_log"] is None

    def test_quiet_hides_progress_bars(self):
        code, _, err = run_cli("-q", "run", "-c", self.config_path)
        assert code == 0
        assert not logging.is_progress_bar_enabled()
        assert "%|" not in err

    def test_run_json_output(self):
        output = self.path("table.json")
        code, out, _ = run_cli("run", "-c", self.config_path, "--format", "json", "--output", output)
        assert code == 0
        assert out == ""
        assert [row.estimator for row in load_table_json(output).rows] == CONFIG["estimators"]

    def test_invalid_config_is_reported(self):
        with open(self.config_path, "w") as f:
            json.dump({**CONFIG, "estimators": ["snipw"]}, f)
        code, _, err = run_cli("run", "-c", self.config_path)
        assert code == 2
        assert "snipw" in err

    def test_accept(self):
        code, out, _ = run_cli("accept", "parser", "--replications", "200")
        assert code == 0
        assert out.startswith("parser: PASSED")

        code, out, _ = run_cli("accept", "table_pattern", "--json")
        assert code == 0
        assert json.loads(out)["skipped"]

        code, _, err = run_cli("accept", "speed")
        assert code == 2
        assert "unbiasedness" in err

    def test_parse(self):
        data = self.path("data.libsvm")
        with open(data, "w") as f:
            f.write("3 1:0.5 4:-1.25\n-1 2:1e-3\n")
        code, out, _ = run_cli("parse", data)
        assert code == 0
        assert json.loads(out)["rows"] == 2

        output = self.path("copy.libsvm")
        code, _, _ = run_cli("parse", data, "--output", output)
        with open(output) as f:
            assert f.read() == "3 1:0.5 4:-1.25\n-1 2:0.001\n"

        with open(data, "w") as f:
            f.write("1 1:1\n2 1:x\n")
        code, _, err = run_cli("parse", data)
        assert code == 2
        assert "line 2" in err

    def test_simulate_then_estimate(self):
        log_path, policy_path = self.path("log.jsonl"), self.path("policy.json")
        code, out, _ = run_cli(
            "simulate", "-c", self.config_path, "--output", log_path, "--policy-output", policy_path
        )
        assert code == 0
        summary = json.loads(out)
        assert summary["periods"] == 30
        assert "theta0" in summary

        covariates_path = self.path("covariates.jsonl")
        with open(covariates_path, "w") as f:
            for x in ([0.1, -0.3], [0.5, 0.2], [-1.0, 0.4]):
                f.write(json.dumps({"x": x}) + "\n")

        reports_path = self.path("reports.json")
        code, _, _ = run_cli(
            "estimate",
            log_path,
            "--policy",
            policy_path,
            "--estimators",
            "adaipw,fa3ipw,fa3ipw_ss,a3ipw",
            "--covariates",
            covariates_path,
            "--reward-bound",
            "1.5",
            "--output",
            reports_path,
        )
        assert code == 0
        with open(reports_path) as f:
            payload = json.load(f)
        assert sorted(payload["reports"]) == ["adaipw", "fa3ipw", "fa3ipw_ss"]
        assert payload["reports"]["adaipw"]["ci_low"] is None
        assert payload["reports"]["fa3ipw"]["ci_low"] < payload["reports"]["fa3ipw"]["ci_high"]
        assert "a3ipw" in payload["disabled"]

    def test_env(self):
        code, out, _ = run_cli("env")
        assert code == 0
        assert "NumPy version" in out


class SelectEstimatorsTests(unittest.TestCase):
    def test_without_snapshots_or_covariates(self):
        estimators, disabled = select_estimators(["adaipw", "fa3ipw", "dm"], has_snapshots=False, has_covariates=False)
        assert sorted(estimators) == ["adaipw", "dm"]
        assert "snapshots" in disabled["fa3ipw"]

    def test_split_fallback(self):
        estimators, disabled = select_estimators(
            ["tsfa3ipw", "fa3ipw"], has_snapshots=True, has_covariates=False, split_ratio=0.4
        )
        assert estimators["tsfa3ipw"].config.split_ratio == 0.4
        assert "covariates" in disabled["fa3ipw"]

    def test_unknown_name(self):
        with self.assertRaises(ValueError):
            select_estimators(["snipw"], has_snapshots=True, has_covariates=True)
