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

import tempfile
import unittest

import numpy as np

from adaptive_ope import ConstantPolicy, HistoricalLog, LoggedSample
from adaptive_ope.envs import EvaluationCovariates
from adaptive_ope.estimators import (
    ESTIMATORS,
    FA3IPWEstimator,
    OracleA3IPWEstimator,
    ScoreInputs,
    SplitFA3IPWEstimator,
    TSFA3IPWEstimator,
    VarianceWeights,
    a2ipw_estimate,
    a3ipw_estimate,
    adaipw_estimate,
    augmented_terms,
    ci_half_width,
    conditional_variance_terms,
    dm_estimate,
    efficiency_bound,
    fa2daipw_estimate,
    fa3ipw_estimate,
    fa3ipw_split_estimate,
    floor_variance,
    floor_variances,
    get_estimator,
    oracle_sigma_star,
    oracle_variance_weights,
    running_means,
    running_weighted_means,
    sample_split_variance,
    score,
    sfa3ipw_estimate,
    split_length,
    tsfa3ipw_estimate,
    two_step_theta_sequence,
    variance_estimate,
)
from adaptive_ope.estimators.estimator_utils import default_theta_sequence, lagged
from adaptive_ope.harness.acceptance import discrete_environment
from adaptive_ope.nuisance import (
    ConstantNuisancePair,
    NuisanceSequence,
    OracleNuisancePair,
    oracle_nuisance,
    sequential_nuisance,
    zero_nuisance,
)
from adaptive_ope.utils.testing_utils import random_log


UNIFORM = ConstantPolicy([0.5, 0.5], kind="behavior-snapshot")


def static_log(actions, rewards, behavior=UNIFORM, contexts=None):
    """A log from a fixed two-action behavior vector, snapshots included."""
    num_periods = len(actions)
    contexts = np.zeros((num_periods, 1)) if contexts is None else contexts
    return HistoricalLog(
        contexts=contexts,
        actions=actions,
        rewards=rewards,
        propensities=np.tile(behavior.vector, (num_periods, 1)),
        snapshots=[behavior] * num_periods,
    )


def constant_models(num_periods, f_values, e_values=None, reward_bound=1.0):
    return NuisanceSequence.constant(num_periods, ConstantNuisancePair(f_values, e_values, reward_bound=reward_bound))


class ScoreTests(unittest.TestCase):
    def test_importance_weighted_residual(self):
        sample = LoggedSample(t=1, x=[0.0], a=0, y=1.0, propensities=[0.5, 0.5])
        inputs = ScoreInputs(sample, ConstantPolicy([1.0, 0.0]), ConstantNuisancePair([0.0, 0.0]), theta=0.0)
        assert score(inputs) == 2.0

    def test_exact_outcome_model(self):
        sample = LoggedSample(t=1, x=[0.0], a=1, y=0.3, propensities=[0.2, 0.8])
        pair = ConstantNuisancePair([0.3, 0.3])
        self.assertAlmostEqual(score(ScoreInputs(sample, ConstantPolicy([0.4, 0.6]), pair, theta=0.1)), 0.2)

    def test_outcome_models_must_precede_the_period(self):
        sample = LoggedSample(t=2, x=[0.0], a=0, y=1.0, propensities=[0.5, 0.5])
        ScoreInputs(sample, UNIFORM, ConstantNuisancePair([0.0, 0.0], fitted_through=1))
        with self.assertRaises(ValueError):
            ScoreInputs(sample, UNIFORM, ConstantNuisancePair([0.0, 0.0], fitted_through=2))

    def test_augmented_terms_match_scores(self):
        _, log, _ = random_log(num_periods=25, seed=3)
        pi_e = ConstantPolicy([0.2, 0.5, 0.3])
        nuisances = sequential_nuisance(log, "knn", refit_every=4, num_neighbors=3)
        f_hat, _ = nuisances.predict_logged(log.contexts)
        terms = augmented_terms(log, pi_e.probs(log.contexts), f_hat)
        for t in (1, 9, 25):
            expected = score(ScoreInputs(log.sample(t), pi_e, nuisances[t]))
            self.assertAlmostEqual(terms[t - 1], expected, places=12)


class BaselineEstimatorTests(unittest.TestCase):
    def test_adaipw(self):
        log = static_log(actions=[0, 1], rewards=[1.0, 1.0])
        report = adaipw_estimate(log, ConstantPolicy([1.0, 0.0]))
        assert report.theta_hat == 1.0
        assert report.method == "adaipw"
        assert not report.has_interval
        assert adaipw_estimate(static_log([0, 1], [0.0, 0.0]), ConstantPolicy([1.0, 0.0])).theta_hat == 0.0

    def test_dm_with_constant_models(self):
        log = static_log(actions=[0, 1, 1], rewards=[1.0, 0.0, 0.5])
        report = dm_estimate(log, ConstantPolicy([0.3, 0.7]), constant_models(3, [0.4, 0.4]))
        self.assertAlmostEqual(report.theta_hat, 0.4)
        assert report.diagnostics["window_length"] == 3

    def test_a2ipw_with_zero_model_is_adaipw(self):
        _, log, _ = random_log(num_periods=40, seed=5)
        pi_e = ConstantPolicy([0.6, 0.3, 0.1])
        zero = zero_nuisance(40, 3)
        assert a2ipw_estimate(log, pi_e, zero).theta_hat == adaipw_estimate(log, pi_e).theta_hat

    def test_a2ipw_with_exact_rewards_is_dm(self):
        f_values = [0.2, 0.7]
        actions = [0, 1, 1, 0, 1]
        log = static_log(actions, [f_values[a] for a in actions], behavior=ConstantPolicy([0.3, 0.7]))
        pi_e = ConstantPolicy([0.5, 0.5])
        nuisances = constant_models(5, f_values)
        theta_hat = a2ipw_estimate(log, pi_e, nuisances).theta_hat
        self.assertAlmostEqual(theta_hat, dm_estimate(log, pi_e, nuisances).theta_hat)
        self.assertAlmostEqual(theta_hat, 0.45)

    def test_estimator_classes(self):
        log = static_log(actions=[0, 1], rewards=[1.0, 1.0])
        pi_e = ConstantPolicy([1.0, 0.0])
        assert get_estimator("adaipw").estimate(log, pi_e).theta_hat == 1.0
        with self.assertRaises(ValueError):
            get_estimator("dm").estimate(log, pi_e)
        with self.assertRaises(ValueError):
            get_estimator("a2ipw").estimate(log, pi_e)

    def test_action_count_mismatch(self):
        log = static_log(actions=[0, 1], rewards=[1.0, 1.0])
        with self.assertRaises(ValueError):
            adaipw_estimate(log, ConstantPolicy([0.2, 0.3, 0.5]))


class WeightedMeanTests(unittest.TestCase):
    def test_known_weights(self):
        log = static_log(actions=[0, 0], rewards=[0.5, 1.0])
        pi_e = ConstantPolicy([1.0, 0.0])
        zero = zero_nuisance(2, 2)
        q = augmented_terms(log, pi_e.probs(log.contexts), np.zeros((2, 2)))
        report = a3ipw_estimate(log, pi_e, zero, VarianceWeights([1.0, 4.0], source="known"))
        self.assertAlmostEqual(report.theta_hat, (q[0] + q[1] / 2) / 1.5)
        self.assertAlmostEqual(report.theta_hat, 4.0 / 3.0)

    def test_equal_weights_reduce_to_a2ipw(self):
        _, log, _ = random_log(num_periods=30, seed=6)
        pi_e = ConstantPolicy([0.1, 0.1, 0.8])
        nuisances = sequential_nuisance(log, "nw", refit_every=5)
        weights = VarianceWeights(np.full(30, 2.5), source="initializer")
        expected = a2ipw_estimate(log, pi_e, nuisances).theta_hat
        assert a3ipw_estimate(log, pi_e, nuisances, weights).theta_hat == expected

    def test_invalid_weights(self):
        with self.assertRaises(ValueError):
            VarianceWeights([1.0, 5e-4], source="known")
        with self.assertRaises(ValueError):
            VarianceWeights([1.0, np.inf], source="known")
        log = static_log(actions=[0, 0], rewards=[0.5, 1.0])
        with self.assertRaises(ValueError):
            a3ipw_estimate(log, UNIFORM, zero_nuisance(2, 2), VarianceWeights([1.0], source="known"))

    def test_running_means(self):
        q = np.array([1.0, 3.0, 2.0])
        np.testing.assert_allclose(running_means(q), [1.0, 2.0, 2.0])
        np.testing.assert_array_equal(running_weighted_means(q, 4.0), running_means(q))
        np.testing.assert_allclose(running_weighted_means(q, np.array([1.0, 4.0, 1.0]))[1], (1.0 + 1.5) / 1.5)
        np.testing.assert_array_equal(lagged(q), [0.0, 1.0, 3.0])
        with self.assertRaises(ValueError):
            running_weighted_means(q, 0.0)


class ConfidenceIntervalTests(unittest.TestCase):
    def test_half_width(self):
        self.assertAlmostEqual(ci_half_width(np.ones(4)), 0.979982, places=6)
        self.assertAlmostEqual(ci_half_width(np.full(4, 2.0)), 0.979982 * np.sqrt(2.0), places=6)
        assert ci_half_width(np.ones(4), alpha=0.999) < 0.001
        with self.assertRaises(ValueError):
            ci_half_width(np.ones(4), alpha=1.0)

    def test_report_interval(self):
        log = static_log(actions=[0, 1, 0, 1], rewards=[1.0, 0.0, 0.5, 0.5])
        report = a3ipw_estimate(log, UNIFORM, zero_nuisance(4, 2), VarianceWeights(np.ones(4), source="known"))
        self.assertAlmostEqual(report.ci_high - report.theta_hat, 0.979982, places=6)
        self.assertAlmostEqual(report.theta_hat - report.ci_low, 0.979982, places=6)
        assert report.standardized_stat_denominator == 2.0
        self.assertAlmostEqual(report.standardized_statistic(report.theta_hat - 1.0), 2.0)
        assert report.covers(report.theta_hat)

    def test_single_period_window_has_no_interval(self):
        log = static_log(actions=[1], rewards=[0.5])
        report = a3ipw_estimate(log, UNIFORM, zero_nuisance(1, 2), VarianceWeights([1.0], source="known"))
        assert report.theta_hat == 0.5
        assert not report.has_interval
        assert report.covers(0.0) is None


class VarianceEstimateTests(unittest.TestCase):
    pool = EvaluationCovariates([[0.0], [1.0], [2.0]])

    def test_one_hot_evaluation_policy(self):
        m = 0.4
        pair = ConstantNuisancePair([m, m], e_values=[m**2 + 1.0] * 2, reward_bound=2.0)
        pi_e = ConstantPolicy([0.0, 1.0])
        g_prime = variance_estimate(1, self.pool, pi_e, UNIFORM, pair, m, variance_form="pooled")
        self.assertAlmostEqual(g_prime, 2.0)
        # the per-arm form also counts the unplayed arm
        g_prime = variance_estimate(1, self.pool, pi_e, UNIFORM, pair, m, variance_form="per_arm")
        self.assertAlmostEqual(g_prime, 2.0 + m**2)

        pair = ConstantNuisancePair([0.0, 0.0], e_values=[1.0, 1.0], reward_bound=2.0)
        self.assertAlmostEqual(variance_estimate(1, self.pool, pi_e, UNIFORM, pair, 0.0), 2.0)

    def test_deterministic_rewards_hit_the_floor(self):
        pair = ConstantNuisancePair([0.3, 0.3])
        pi_e = ConstantPolicy([1.0, 0.0])
        g_prime = variance_estimate(1, self.pool, pi_e, UNIFORM, pair, 0.3, variance_form="pooled")
        self.assertAlmostEqual(g_prime, 2e-6)
        weights = floor_variances([g_prime, 0.5], epsilon=1e-3)
        np.testing.assert_allclose(weights.g, [1e-3, 0.5])
        assert weights.floor_hits == 1

    def test_floor_variance(self):
        assert floor_variance(-0.3, 0.01) == 0.01
        assert floor_variance(2.0, 0.01) == 2.0

    def test_argument_checks(self):
        pair = ConstantNuisancePair([0.0, 0.0], fitted_through=3)
        with self.assertRaises(ValueError):
            variance_estimate(3, self.pool, UNIFORM, UNIFORM, pair, 0.0)
        with self.assertRaises(ValueError):
            variance_estimate(1, None, UNIFORM, UNIFORM, ConstantNuisancePair([0.0, 0.0]), 0.0)
        with self.assertRaises(ValueError):
            conditional_variance_terms(np.ones((1, 2)), np.ones((1, 2)), np.ones((1, 2)), np.ones((1, 2)), 0.0, "sum")


class OracleVarianceTests(unittest.TestCase):
    def test_hand_computed_variance(self):
        env = discrete_environment()
        pi_e = ConstantPolicy([1.0, 0.0])
        self.assertAlmostEqual(oracle_sigma_star(env, UNIFORM, pi_e, 0.625, variance_form="pooled"), 0.421875)
        self.assertAlmostEqual(oracle_sigma_star(env, UNIFORM, pi_e, 0.625, variance_form="per_arm"), 0.8125)
        self.assertAlmostEqual(efficiency_bound(env, UNIFORM, pi_e), 0.421875)

    def test_concentrated_behavior_lowers_the_variance(self):
        env = discrete_environment()
        pi_e = ConstantPolicy([1.0, 0.0])
        concentrated = oracle_sigma_star(env, ConstantPolicy([0.9, 0.1]), pi_e, 0.625)
        assert concentrated < oracle_sigma_star(env, UNIFORM, pi_e, 0.625)

    def test_full_support_estimate_is_exact(self):
        env = discrete_environment()
        pool = env.support.as_covariates()
        pi_e = ConstantPolicy([0.3, 0.7])
        behavior = ConstantPolicy([0.8, 0.2])
        pair = OracleNuisancePair(env)
        for variance_form in ("per_arm", "pooled"):
            estimate = variance_estimate(1, pool, pi_e, behavior, pair, 0.4, variance_form=variance_form)
            exact = oracle_sigma_star(env, behavior, pi_e, 0.4, variance_form=variance_form)
            self.assertAlmostEqual(estimate, exact, places=12)

    def test_oracle_weights_follow_the_schedule(self):
        env = discrete_environment()
        pi_e = ConstantPolicy([1.0, 0.0])
        favour, starve = ConstantPolicy([0.8, 0.2]), ConstantPolicy([0.05, 0.95])
        log = HistoricalLog(
            contexts=[[-1.0], [1.0], [1.0]],
            actions=[0, 0, 1],
            rewards=[0.0, 1.0, 1.0],
            propensities=[favour.vector, starve.vector, starve.vector],
            snapshots=[favour, starve, starve],
        )
        weights = oracle_variance_weights(env, log, pi_e, variance_form="pooled")
        assert weights.source == "known"
        self.assertAlmostEqual(weights.g[0], oracle_sigma_star(env, favour, pi_e, 0.625, "pooled"))
        assert weights.g[1] == weights.g[2] > weights.g[0]

        report = OracleA3IPWEstimator(variance_form="pooled").estimate(log, pi_e, oracle_nuisance(3, env), env=env)
        assert report.method == "a3ipw"
        with self.assertRaises(ValueError):
            OracleA3IPWEstimator().estimate(log, pi_e, oracle_nuisance(3, env))


class FeasibleEstimatorTests(unittest.TestCase):
    def setUp(self):
        self.env, self.log, episode = random_log(num_periods=40, seed=7)
        self.pool = episode.evaluation_covariates(30)
        self.pi_e = ConstantPolicy([0.2, 0.2, 0.6])
        self.nuisances = sequential_nuisance(self.log, "nw", refit_every=5)

    def test_full_report(self):
        report = fa3ipw_estimate(self.log, self.pi_e, self.nuisances, self.pool)
        assert report.method == "fa3ipw"
        assert report.weights.shape == (40,)
        assert np.all(report.weights >= 1e-3)
        assert report.has_interval
        assert report.diagnostics["variance_source"] == "eval-data"

    def test_last_period_only(self):
        report = fa3ipw_estimate(self.log, self.pi_e, self.nuisances, self.pool, burn_in=39)
        f_hat, _ = self.nuisances.predict_logged(self.log.contexts)
        terms = augmented_terms(self.log, self.pi_e.probs(self.log.contexts), f_hat)
        assert report.theta_hat == terms[-1]
        assert report.method == "sfa3ipw"
        assert not report.has_interval

    def test_equal_weights_reduce_to_a2ipw(self):
        log = static_log(actions=[0, 1, 1, 0, 1, 0], rewards=[0.1, 0.9, 0.4, 0.3, 0.8, 0.0])
        nuisances = constant_models(6, [0.2, 0.6], e_values=[0.5, 0.5])
        pool = EvaluationCovariates([[0.0], [3.0]])
        pi_e = ConstantPolicy([0.3, 0.7])
        report = fa3ipw_estimate(log, pi_e, nuisances, pool, theta_sequence=np.zeros(6))
        assert np.all(report.weights == report.weights[0])
        assert report.theta_hat == a2ipw_estimate(log, pi_e, nuisances).theta_hat

        # with a zero outcome model the feasible weighted IPW becomes AdaIPW
        report = fa2daipw_estimate(log, pi_e, nuisances, pool, theta_sequence=np.zeros(6))
        assert report.theta_hat == adaipw_estimate(log, pi_e).theta_hat

    def test_fa2daipw_is_fa3ipw_with_zero_model(self):
        expected = fa3ipw_estimate(self.log, self.pi_e, self.nuisances.zero_mean(), self.pool).theta_hat
        report = fa2daipw_estimate(self.log, self.pi_e, self.nuisances, self.pool)
        assert report.theta_hat == expected
        assert report.method == "fa2daipw"

    def test_stabilized_default_burn_in(self):
        report = sfa3ipw_estimate(self.log, self.pi_e, self.nuisances, self.pool)
        assert report.burn_in == 20
        assert report.diagnostics["window_length"] == 20
        explicit = fa3ipw_estimate(self.log, self.pi_e, self.nuisances, self.pool, burn_in=20)
        assert report.theta_hat == explicit.theta_hat

    def test_argument_checks(self):
        with self.assertRaises(ValueError):
            fa3ipw_estimate(self.log, self.pi_e, self.nuisances, self.pool, burn_in=40)
        with self.assertRaises(ValueError):
            fa3ipw_estimate(self.log, self.pi_e, self.nuisances, self.pool, theta_sequence=np.zeros(3))
        with self.assertRaises(ValueError):
            fa3ipw_estimate(self.log, self.pi_e, self.nuisances, EvaluationCovariates([[0.0]]))
        bare = HistoricalLog(self.log.contexts, self.log.actions, self.log.rewards, self.log.propensities)
        with self.assertRaises(ValueError):
            fa3ipw_estimate(bare, self.pi_e, self.nuisances, self.pool)


class SampleSplittingTests(unittest.TestCase):
    def test_split_length(self):
        assert split_length(4, 0.5) == 2
        assert split_length(5, 0.5) == 2
        assert split_length(4, 0.99) == 3
        with self.assertRaises(ValueError):
            split_length(4, 0.1)
        with self.assertRaises(ValueError):
            split_length(4, 1.0)
        with self.assertRaises(ValueError):
            split_length(4, 0.0)

    def test_window_and_pool(self):
        log = static_log(actions=[0, 1, 0, 1], rewards=[1.0, 0.0, 0.5, 0.5], contexts=[[0.0], [1.0], [2.0], [3.0]])
        nuisances = constant_models(4, [0.0, 0.0], e_values=[1.0, 1.0], reward_bound=2.0)
        pi_e = ConstantPolicy([1.0, 0.0])
        weights, window = sample_split_variance(log, pi_e, nuisances, 0.5, theta_sequence=np.zeros(4))
        assert window == 2
        assert weights.source == "sample-split"
        np.testing.assert_allclose(weights.g, [2.0, 2.0])

        report = fa3ipw_split_estimate(log, pi_e, nuisances, 0.5, theta_sequence=np.zeros(4))
        assert report.method == "fa3ipw_ss"
        assert report.theta_hat == 1.0
        assert report.diagnostics["split_ratio"] == 0.5

    def test_split_estimator_needs_no_pool(self):
        _, log, _ = random_log(num_periods=30, seed=8)
        estimator = SplitFA3IPWEstimator(split_ratio=0.5)
        assert not estimator.needs_eval_covariates
        report = estimator.estimate(log, ConstantPolicy([0.5, 0.25, 0.25]), sequential_nuisance(log, "nw"))
        assert report.diagnostics["window_length"] == 15
        with self.assertRaises(ValueError):
            SplitFA3IPWEstimator(split_ratio=1.0)


class TwoStepTests(unittest.TestCase):
    def setUp(self):
        _, self.log, episode = random_log(num_periods=30, seed=9)
        self.pool = episode.evaluation_covariates(20)
        self.pi_e = ConstantPolicy([0.4, 0.4, 0.2])
        self.nuisances = sequential_nuisance(self.log, "knn", refit_every=3, num_neighbors=4)

    def test_unit_initial_weights_give_running_a2ipw_means(self):
        pi_e_probs = self.pi_e.probs(self.log.contexts)
        expected = default_theta_sequence(self.log, pi_e_probs, self.nuisances)
        np.testing.assert_array_equal(two_step_theta_sequence(self.log, self.pi_e, self.nuisances, 1.0), expected)
        assert expected[0] == 0.0

    def test_deterministic(self):
        first = tsfa3ipw_estimate(self.log, self.pi_e, self.nuisances, self.pool)
        second = tsfa3ipw_estimate(self.log, self.pi_e, self.nuisances, self.pool)
        assert first.theta_hat == second.theta_hat
        np.testing.assert_array_equal(first.weights, second.weights)
        assert first.method == "tsfa3ipw"

    def test_matches_two_step_fa3ipw(self):
        two_step = FA3IPWEstimator(two_step=True).estimate(self.log, self.pi_e, self.nuisances, self.pool)
        report = TSFA3IPWEstimator().estimate(self.log, self.pi_e, self.nuisances, self.pool)
        assert report.theta_hat == two_step.theta_hat

    def test_split_mode(self):
        report = tsfa3ipw_estimate(self.log, self.pi_e, self.nuisances, split_ratio=0.4)
        assert report.diagnostics["window_length"] == 12
        assert report.method == "tsfa3ipw"
        with self.assertRaises(ValueError):
            tsfa3ipw_estimate(self.log, self.pi_e, self.nuisances)
        with self.assertRaises(ValueError):
            tsfa3ipw_estimate(self.log, self.pi_e, self.nuisances, self.pool, g_init=0.0)


class EstimatorRegistryTests(unittest.TestCase):
    def test_registry(self):
        names = {"dm", "adaipw", "a2ipw", "a3ipw", "fa3ipw", "sfa3ipw", "fa2daipw", "tsfa3ipw", "fa3ipw_ss"}
        assert names <= set(ESTIMATORS)
        for name in names:
            assert get_estimator(name).estimator_name == name
        with self.assertRaises(ValueError):
            get_estimator("snipw")

    def test_config_round_trip(self):
        estimator = get_estimator("sfa3ipw", burn_in=5, variance_form="pooled")
        assert estimator.config.burn_in == 5
        with tempfile.TemporaryDirectory() as tmpdirname:
            estimator.save_config(tmpdirname)
            loaded = type(estimator).from_config(tmpdirname)
        assert loaded.config.burn_in == 5
        assert loaded.config.variance_form == "pooled"

    def test_weighted_estimators_need_a_pool(self):
        _, log, _ = random_log(num_periods=10, seed=1)
        nuisances = sequential_nuisance(log, "nw")
        for name in ("fa3ipw", "sfa3ipw", "fa2daipw", "tsfa3ipw"):
            with self.assertRaises(ValueError):
                get_estimator(name).estimate(log, ConstantPolicy([0.5, 0.25, 0.25]), nuisances)
        with self.assertRaises(ValueError):
            FA3IPWEstimator(epsilon=0.0)
