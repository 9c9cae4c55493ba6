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

import json
import os
import tempfile
import unittest
from unittest import mock

from adaptive_ope import ExperimentConfig, load_experiment_config
from adaptive_ope.configuration_utils import ConfigMixin, register_to_config
from adaptive_ope.envs import SyntheticEnvironment, make_synthetic_env
from adaptive_ope.estimators import FA3IPWEstimator, get_estimator


class SampleObject(ConfigMixin):
    config_name = "config.json"

    @register_to_config
    def __init__(
        self,
        num_periods=2,
        epsilon=1e-3,
        weights=(2, 5),
        method="tsfa3ipw",
        estimators=[1, 3],
    ):
        pass


class ConfigTester(unittest.TestCase):
    def test_load_not_from_mixin(self):
        with self.assertRaises(ValueError):
            ConfigMixin.from_config("dummy_path")

    def test_register_to_config(self):
        obj = SampleObject()
        config = obj.config
        assert config["num_periods"] == 2
        assert config["epsilon"] == 1e-3
        assert config["weights"] == (2, 5)
        assert config["method"] == "tsfa3ipw"
        assert config["estimators"] == [1, 3]

        # can override default
        obj = SampleObject(weights=6)
        assert obj.config["weights"] == 6
        assert obj.config["num_periods"] == 2

        # can use positional arguments.
        obj = SampleObject(1, weights=6)
        assert obj.config["num_periods"] == 1
        assert obj.config["weights"] == 6

    def test_config_is_frozen(self):
        obj = SampleObject()
        with self.assertRaises(Exception):
            obj.config.pop("num_periods")
        with self.assertRaises(Exception):
            obj.config.update(num_periods=3)

    def test_save_load(self):
        obj = SampleObject()
        config = obj.config

        with tempfile.TemporaryDirectory() as tmpdirname:
            obj.save_config(tmpdirname)
            new_obj = SampleObject.from_config(tmpdirname)
            new_config = new_obj.config

        # unfreeze configs
        config = dict(config)
        new_config = dict(new_config)

        assert config.pop("weights") == (2, 5)  # instantiated as tuple
        assert new_config.pop("weights") == [2, 5]  # saved & loaded as list because of json
        assert config == new_config

    def test_missing_config_file(self):
        with tempfile.TemporaryDirectory() as tmpdirname:
            with self.assertRaises(EnvironmentError):
                SampleObject.from_config(tmpdirname)

    def test_environment_round_trip(self):
        env = SyntheticEnvironment(num_actions=3, dim=2, num_contexts=5, noise="truncated_gaussian")
        with tempfile.TemporaryDirectory() as tmpdirname:
            env.save_config(tmpdirname)
            rebuilt = make_synthetic_env(tmpdirname)

        assert rebuilt.config.num_actions == 3
        self.assertTrue((rebuilt.support.contexts == env.support.contexts).all())
        self.assertTrue((rebuilt.support.second_moments == env.support.second_moments).all())

    def test_estimator_config(self):
        estimator = get_estimator("fa3ipw", burn_in=5, variance_form="pooled")
        assert isinstance(estimator, FA3IPWEstimator)
        assert estimator.config.burn_in == 5
        assert estimator.config.variance_form == "pooled"

        with tempfile.TemporaryDirectory() as tmpdirname:
            estimator.save_config(tmpdirname)
            rebuilt = FA3IPWEstimator.from_config(tmpdirname)
        assert dict(rebuilt.config) == dict(estimator.config)

        with self.assertRaises(ValueError):
            get_estimator("not_an_estimator")


class ExperimentConfigTester(unittest.TestCase):
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.config.num_periods == 1000
        assert cfg.config.epsilon == 1e-3
        assert cfg.resolved_burn_in() == 500
        assert cfg.evaluation_spec()["type"] == "best_arm"
        assert "tsfa3ipw" in cfg.estimator_names()

    def test_invalid_values(self):
        with self.assertRaises(ValueError):
            ExperimentConfig(split_ratio=1.0)
        with self.assertRaises(ValueError):
            ExperimentConfig(num_periods=10, burn_in=10)
        with self.assertRaises(ValueError):
            ExperimentConfig(epsilon=0.0)
        with self.assertRaises(ValueError):
            ExperimentConfig(estimators=["fa3ipw", "nope"])
        with self.assertRaises(ValueError):
            ExperimentConfig(env={"type": "dataset", "path": "/does/not/exist.libsvm"})

    def test_replace_keeps_untouched_keys(self):
        cfg = ExperimentConfig(num_periods=300, alpha=0.1)
        new_cfg = cfg.replace(num_periods=200, alpha=None)
        assert new_cfg.config.num_periods == 200
        assert new_cfg.config.alpha == 0.1

    def test_seed_precedence(self):
        with tempfile.TemporaryDirectory() as tmpdirname:
            path = os.path.join(tmpdirname, "experiment.json")
            with open(path, "w") as f:
                json.dump({"num_periods": 50, "base_seed": 3}, f)

            with mock.patch.dict(os.environ, {"OPE_SEED": ""}):
                assert load_experiment_config(path).config.base_seed == 3
            with mock.patch.dict(os.environ, {"OPE_SEED": "11"}):
                cfg = load_experiment_config(path)
                assert cfg.config.base_seed == 11
                assert cfg.config.num_periods == 50
                assert load_experiment_config(path, seed=7).config.base_seed == 7
            with mock.patch.dict(os.environ, {"OPE_SEED": "eleven"}):
                with self.assertRaises(ValueError):
                    load_experiment_config(path)

    def test_overrides(self):
        with mock.patch.dict(os.environ, {"OPE_SEED": ""}):
            cfg = load_experiment_config(num_replications=3, num_workers=None)
        assert cfg.config.num_replications == 3
        assert cfg.config.num_workers == 1
