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

import unittest

import numpy as np

from adaptive_ope import HistoricalLog
from adaptive_ope.nuisance import (
    ConstantNuisancePair,
    KNNRegressor,
    NadarayaWatsonRegressor,
    NuisanceSequence,
    OracleNuisancePair,
    knn_fit,
    make_regressor,
    median_heuristic_bandwidth,
    nuisance_error,
    nw_fit,
    oracle_nuisance,
    scott_bandwidth,
    sequential_nuisance,
    zero_nuisance,
)
from adaptive_ope.utils.testing_utils import random_log


def tiny_log():
    return HistoricalLog(
        contexts=[[0.0], [1.0], [2.0], [10.0]],
        actions=[0, 0, 1, 0],
        rewards=[0.2, 0.4, -0.5, 1.0],
        propensities=[[0.5, 0.5]] * 4,
    )


class NuisancePairTests(unittest.TestCase):
    def test_clamping(self):
        pair = ConstantNuisancePair([3.0, -0.5], e_values=[9.0, -1.0], reward_bound=2.0)
        f_hat, e_hat = pair.predict(np.zeros((2, 1)))
        np.testing.assert_array_equal(f_hat, [[2.0, -0.5]] * 2)
        np.testing.assert_array_equal(e_hat, [[4.0, 0.0]] * 2)

    def test_variance_floor(self):
        pair = ConstantNuisancePair([0.5, 0.5], e_values=[0.25, 0.5])
        np.testing.assert_allclose(pair.variance(np.zeros((1, 1))), [[1e-6, 0.25]])

    def test_zero_mean_keeps_second_moment(self):
        pair = ConstantNuisancePair([0.3, 0.6], e_values=[0.2, 0.5]).zero_mean()
        f_hat, e_hat = pair.predict(np.zeros((1, 1)))
        np.testing.assert_array_equal(f_hat, [[0.0, 0.0]])
        np.testing.assert_array_equal(e_hat, [[0.2, 0.5]])

    def test_oracle_pair(self):
        env, _, _ = random_log(num_periods=2)
        pair = OracleNuisancePair(env)
        contexts = env.support.contexts
        f_hat, e_hat = pair.predict(contexts)
        np.testing.assert_allclose(f_hat, env.support.means)
        np.testing.assert_allclose(e_hat, env.support.second_moments)
        assert nuisance_error(pair, env, contexts) < 1e-12


class RegressorTests(unittest.TestCase):
    def test_cold_start(self):
        pair = knn_fit(tiny_log(), 0, k=2, reward_bound=1.5)
        f_hat, e_hat = pair.predict(np.zeros((3, 1)))
        np.testing.assert_array_equal(f_hat, np.zeros((3, 2)))
        np.testing.assert_array_equal(e_hat, np.full((3, 2), 2.25))
        assert pair.fitted_through == 0

    def test_unplayed_arm_falls_back(self):
        pair = knn_fit(tiny_log(), 2, k=5)
        assert pair.arm_count(0) == 2
        assert pair.arm_count(1) == 0
        f_hat, e_hat = pair.predict(np.array([[0.5]]))
        self.assertAlmostEqual(f_hat[0, 0], 0.3)
        self.assertAlmostEqual(e_hat[0, 0], (0.04 + 0.16) / 2)
        assert f_hat[0, 1] == 0.0
        assert e_hat[0, 1] == 1.0

    def test_knn_neighbors_and_ties(self):
        regressor = KNNRegressor(num_neighbors=1)
        train = np.array([[0.0], [2.0]])
        targets = np.array([[1.0, 1.0], [3.0, 9.0]])
        # equidistant query: the earlier sample wins
        np.testing.assert_array_equal(regressor.average(train, targets, np.array([[1.0]])), [[1.0, 1.0]])
        np.testing.assert_array_equal(regressor.average(train, targets, np.array([[1.9]])), [[3.0, 9.0]])

    def test_nw_weights(self):
        regressor = NadarayaWatsonRegressor(bandwidth=1.0)
        train = np.array([[0.0], [1.0]])
        targets = np.array([[0.0, 0.0], [1.0, 1.0]])
        value = regressor.average(train, targets, np.array([[0.0]]), bandwidth=1.0)[0, 0]
        expected = np.exp(-0.5) / (1.0 + np.exp(-0.5))
        self.assertAlmostEqual(value, expected)
        # far queries still get a proper average
        far = regressor.average(train, targets, np.array([[1000.0]]), bandwidth=1.0)
        np.testing.assert_allclose(far, [[1.0, 1.0]])

    def test_nw_is_bounded(self):
        pair = nw_fit(tiny_log(), 4, reward_bound=1.0)
        f_hat, e_hat = pair.predict(np.linspace(-5, 15, 21).reshape(-1, 1))
        assert np.all(np.abs(f_hat) <= 1.0)
        assert np.all((e_hat >= 0.0) & (e_hat <= 1.0))

    def test_bandwidth_rules(self):
        contexts = np.array([[0.0], [1.0], [3.0]])
        self.assertAlmostEqual(median_heuristic_bandwidth(contexts), 2.0)
        assert median_heuristic_bandwidth(np.zeros((3, 1))) == 1.0
        assert scott_bandwidth(np.zeros((3, 2))) == 1.0
        self.assertAlmostEqual(scott_bandwidth(contexts), np.std([0.0, 1.0, 3.0]) * 3 ** (-1 / 5))
        assert NadarayaWatsonRegressor(bandwidth="scott").fit_params(contexts)["bandwidth"] > 0
        with self.assertRaises(NotImplementedError):
            NadarayaWatsonRegressor(bandwidth="silverman")
        with self.assertRaises(ValueError):
            NadarayaWatsonRegressor(bandwidth=0.0)

    def test_make_regressor(self):
        assert isinstance(make_regressor("knn", num_neighbors=3), KNNRegressor)
        assert isinstance(make_regressor("nw"), NadarayaWatsonRegressor)
        with self.assertRaises(ValueError):
            make_regressor("forest")


class NuisanceSequenceTests(unittest.TestCase):
    def test_prefix_length(self):
        sequence = NuisanceSequence(10, lambda s: None, refit_every=3)
        assert [sequence.prefix_length(t) for t in range(1, 12)] == [0, 0, 0, 3, 3, 3, 6, 6, 6, 9, 9]
        with self.assertRaises(IndexError):
            sequence.prefix_length(0)
        with self.assertRaises(IndexError):
            sequence.prefix_length(12)
        with self.assertRaises(ValueError):
            NuisanceSequence(10, lambda s: None, refit_every=0)

    def test_no_lookahead(self):
        _, log, _ = random_log(num_periods=30, seed=1)
        sequence = sequential_nuisance(log, "nw", refit_every=4, reward_bound=1.0)
        for t in range(1, 31):
            assert sequence[t].fitted_through <= t - 1

        # changing the future never changes the models of the past
        rewards = np.array(log.rewards)
        rewards[20:] = -rewards[20:]
        perturbed = HistoricalLog(log.contexts, log.actions, rewards, log.propensities, snapshots=log.snapshots)
        other = sequential_nuisance(perturbed, "nw", refit_every=4, reward_bound=1.0)
        f_hat, e_hat = sequence.predict_logged(log.contexts)
        other_f, other_e = other.predict_logged(perturbed.contexts)
        np.testing.assert_array_equal(f_hat[:21], other_f[:21])
        np.testing.assert_array_equal(e_hat[:21], other_e[:21])
        assert not np.array_equal(f_hat[21:], other_f[21:])

    def test_predict_logged_matches_per_period_predictions(self):
        _, log, _ = random_log(num_periods=17, seed=2)
        sequence = sequential_nuisance(log, "nw", refit_every=5)
        f_hat, e_hat = sequence.predict_logged(log.contexts)
        for t in (1, 5, 6, 11, 17):
            f_t, e_t = sequence[t].predict(log.contexts[t - 1 : t])
            np.testing.assert_allclose(f_hat[t - 1], f_t[0])
            np.testing.assert_allclose(e_hat[t - 1], e_t[0])

    def test_pairs_are_reused_between_refits(self):
        calls = []

        def pair_for_prefix(s):
            calls.append(s)
            return ConstantNuisancePair([float(s), 0.0], reward_bound=100.0, fitted_through=s)

        sequence = NuisanceSequence(7, pair_for_prefix, refit_every=3)
        sequence.predict_logged(np.zeros((7, 1)))
        assert calls == [0, 3, 6]
        assert sequence[5] is sequence[4]

    def test_zero_and_oracle_sequences(self):
        env, log, _ = random_log(num_periods=5)
        f_hat, e_hat = zero_nuisance(5, 3, reward_bound=2.0).predict_logged(log.contexts)
        np.testing.assert_array_equal(f_hat, np.zeros((5, 3)))
        np.testing.assert_array_equal(e_hat, np.zeros((5, 3)))

        f_hat, _ = oracle_nuisance(5, env).predict_logged(log.contexts)
        np.testing.assert_allclose(f_hat, env.mean_rewards(log.contexts))

        zero_mean = oracle_nuisance(5, env).zero_mean()
        f_hat, e_hat = zero_mean.predict_logged(log.contexts)
        np.testing.assert_array_equal(f_hat, np.zeros((5, 3)))
        np.testing.assert_allclose(e_hat, env.second_moments(log.contexts))
