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

import os
import tempfile
import unittest
from unittest import mock

import numpy as np

from adaptive_ope import ExperimentConfig, run_acceptance, run_experiment
from adaptive_ope.harness import (
    RESULT_COLUMNS,
    ReplicationError,
    ResultRow,
    ResultTable,
    emit_table,
    load_table_json,
    prepare_experiment,
    run_replication,
    run_replications,
    summarize_estimates,
)


ESTIMATORS = ["dm", "adaipw", "a2ipw", "fa3ipw", "sfa3ipw", "tsfa3ipw", "fa2daipw", "fa3ipw_ss"]


def tiny_config(**overrides):
    kwargs = {
        "num_periods": 30,
        "num_covariates": 30,
        "num_replications": 2,
        "estimators": ESTIMATORS,
        "nuisance": {"method": "knn", "num_neighbors": 3, "refit_every": 5},
        "base_seed": 3,
    }
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


def write_dataset(path, num_rows=200, seed=0):
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(num_rows, 2))
    labels = np.argmax(features @ np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]]), axis=1)
    with open(path, "w") as f:
        for x, label in zip(features, labels):
            f.write(f"{label + 1} 1:{x[0]:.6f} 2:{x[1]:.6f}\n")


def estimates_of(records):
    return [[(e["estimator"], e["theta_hat"], e["ci_low"]) for e in r["estimates"]] for r in records]


class ReplicationTests(unittest.TestCase):
    def test_same_seed_same_table(self):
        first = run_experiment(tiny_config())
        second = run_experiment(tiny_config())
        assert [row.estimator for row in first.rows] == ESTIMATORS
        for a, b in zip(first.rows, second.rows):
            assert a.mse == b.mse
            assert a.coverage == b.coverage
            assert a.mean_ci_width == b.mean_ci_width
        assert first.row("dm").coverage is None
        assert first.row("fa3ipw").coverage is not None

    def test_replication_seed(self):
        setup = prepare_experiment(tiny_config(base_seed=5))
        record = run_replication(setup, 3)
        assert record["seed"] == 6
        assert record["error"] is None
        assert [e["estimator"] for e in record["estimates"]] == ESTIMATORS
        self.assertAlmostEqual(record["theta0"], setup.theta0)

    def test_workers_do_not_change_results(self):
        _, serial = run_replications(tiny_config(num_replications=3))
        _, parallel = run_replications(tiny_config(num_replications=3, num_workers=2))
        assert estimates_of(serial) == estimates_of(parallel)

    def test_estimator_settings(self):
        setup = prepare_experiment(tiny_config(burn_in=4, split_ratio=0.4))
        assert setup.estimators["sfa3ipw"].config.burn_in == 4
        assert setup.estimators["tsfa3ipw"].config.split_ratio is None
        assert setup.estimators["fa3ipw_ss"].config.split_ratio == 0.4
        assert setup.estimators["fa3ipw"].config.two_step

    def test_failures(self):
        cfg = tiny_config()
        with mock.patch("adaptive_ope.harness.experiment_runner.generate_log", side_effect=RuntimeError("boom")):
            with self.assertRaises(ReplicationError) as context:
                run_replications(cfg)
            assert context.exception.index == 0
            assert context.exception.seed == 3

            table = run_experiment(cfg.replace(allow_failures=True))
        assert table.rows == []
        assert [f["index"] for f in table.failures] == [0, 1]
        assert table.failures[0]["error"] == "RuntimeError: boom"

    def test_dataset_environment(self):
        with tempfile.TemporaryDirectory() as tmpdirname:
            path = os.path.join(tmpdirname, "toy.libsvm")
            write_dataset(path)
            cfg = tiny_config(
                env={"type": "dataset", "path": path},
                behavior={"type": "rw", "weight": 0.7},
                estimators=["adaipw", "fa3ipw"],
                num_periods=50,
                num_covariates=50,
            )
            setup = prepare_experiment(cfg)
            assert setup.env_name == "toy"
            assert setup.env.max_periods == 140
            assert 0.0 < setup.theta0 < 1.0
            table = run_experiment(cfg)
        assert [row.estimator for row in table.rows] == ["adaipw", "fa3ipw"]
        assert table.row("adaipw").num_replications == 2

    def test_too_many_periods(self):
        with tempfile.TemporaryDirectory() as tmpdirname:
            path = os.path.join(tmpdirname, "toy.libsvm")
            write_dataset(path, num_rows=50)
            with self.assertRaises(ValueError):
                prepare_experiment(tiny_config(env={"type": "dataset", "path": path}, num_periods=40))

    def test_periods_and_covariates_must_fit_the_rows(self):
        with tempfile.TemporaryDirectory() as tmpdirname:
            path = os.path.join(tmpdirname, "toy.libsvm")
            write_dataset(path)
            cfg = tiny_config(env={"type": "dataset", "path": path}, num_periods=100, num_covariates=100)
            with self.assertRaises(ValueError) as context:
                prepare_experiment(cfg)
            assert "T + N = 200" in str(context.exception)

            cfg = tiny_config(
                env={"type": "dataset", "path": path, "with_replacement": True}, num_periods=100, num_covariates=100
            )
            assert prepare_experiment(cfg).env.max_periods is None


class SummaryTests(unittest.TestCase):
    def test_constant_offset(self):
        row = summarize_estimates("const", [1.5] * 4, [0.5] * 4)
        assert row.mse == 1.0
        assert row.sd_squared_error == 0.0
        assert row.num_replications == 4
        assert row.coverage is None

    def test_coverage_and_width(self):
        row = summarize_estimates(
            "ci",
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 2.0],
            ci_lows=[-1.0, None, -1.0],
            ci_highs=[1.0, None, 1.0],
            importance_ratios=[2.0, None, 5.0],
        )
        assert row.coverage == 0.5
        assert row.mean_ci_width == 2.0
        assert row.max_importance_ratio == 5.0
        self.assertAlmostEqual(row.mse, 4.0 / 3.0)

    def test_single_replication(self):
        row = summarize_estimates("one", [0.2], [0.1])
        assert row.sd_squared_error == 0.0


class TableTests(unittest.TestCase):
    def table(self):
        return ResultTable(
            rows=[
                ResultRow("adaipw", "synthetic", "best_arm(w=0.7)", 3, 0.01, 0.002, None, None, 0.1, 12.5),
                ResultRow("fa3ipw", "synthetic", "best_arm(w=0.7)", 3, 0.1 + 0.2, 0.0, 0.4, 1.0, 0.2, 12.5),
            ]
        )

    def test_empty_table_is_header_only(self):
        assert emit_table(ResultTable(rows=[])) == ",".join(RESULT_COLUMNS) + "\n"

    def test_csv(self):
        lines = emit_table(self.table()).splitlines()
        assert lines[1] == "adaipw,synthetic,best_arm(w=0.7),3,0.01,0.002,,,0.1,12.5"
        assert lines[2].split(",")[4] == "0.30000000000000004"

    def test_json_round_trip(self):
        table = self.table()
        with tempfile.TemporaryDirectory() as tmpdirname:
            path = os.path.join(tmpdirname, "table.json")
            emit_table(table, path, format="json")
            loaded = load_table_json(path)
        for row, other in zip(table.rows, loaded.rows):
            assert [getattr(row, c) for c in RESULT_COLUMNS] == [getattr(other, c) for c in RESULT_COLUMNS]

    def test_unknown_format(self):
        with self.assertRaises(ValueError):
            emit_table(self.table(), format="xlsx")


class AcceptanceTests(unittest.TestCase):
    def test_unknown_suite(self):
        with self.assertRaises(ValueError) as context:
            run_acceptance("speed")
        assert "reductions" in str(context.exception)

    def test_table_pattern_needs_two_datasets(self):
        result = run_acceptance("table_pattern", datasets=["a.libsvm"])
        assert result.skipped
        assert result.passed

    def test_parser(self):
        result = run_acceptance("parser", num_replications=500)
        assert result.passed, result.checks

    def test_reductions(self):
        result = run_acceptance("reductions", num_replications=5)
        assert result.passed, result.checks
        assert len(result.checks) == 3

    def test_unbiasedness(self):
        result = run_acceptance("unbiasedness", num_replications=1)
        assert result.passed, result.checks

    def test_variance_oracle(self):
        result = run_acceptance("variance_oracle", num_replications=10)
        assert result.passed, result.checks
