import json
import unittest
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from adaptive_ope import EstimateReport
from adaptive_ope.utils.outputs import BaseOutput


@dataclass
class CustomOutput(BaseOutput):
    weights: Union[List[float], np.ndarray]
    method: Optional[str] = None


class OutputsTester(unittest.TestCase):
    def test_outputs_single_attribute(self):
        outputs = CustomOutput(weights=np.random.rand(4))

        # check every way of getting the attribute
        assert isinstance(outputs.weights, np.ndarray)
        assert outputs.weights.shape == (4,)
        assert isinstance(outputs["weights"], np.ndarray)
        assert outputs["weights"].shape == (4,)
        assert isinstance(outputs[0], np.ndarray)
        assert outputs[0].shape == (4,)

        outputs = CustomOutput(weights=[1.0, 2.0])
        assert isinstance(outputs.weights, list)
        assert isinstance(outputs["weights"], list)
        assert isinstance(outputs[0], list)

    def test_attribute_and_key_stay_in_sync(self):
        outputs = CustomOutput(weights=[1.0])
        assert "method" not in outputs
        outputs.method = "a2ipw"
        assert outputs["method"] == "a2ipw"
        assert outputs[1] == "a2ipw"

    def test_none_attributes_skipped_by_tuple(self):
        outputs = CustomOutput(weights=[1.0])
        assert len(outputs.to_tuple()) == 1
        assert outputs.to_dict() == {"weights": [1.0], "method": None}

    def test_immutable_mapping(self):
        outputs = CustomOutput(weights=[1.0], method="dm")
        with self.assertRaises(Exception):
            outputs.pop("method")
        with self.assertRaises(Exception):
            del outputs["method"]


class EstimateReportTester(unittest.TestCase):
    def test_unweighted_report(self):
        report = EstimateReport(theta_hat=0.3, method="adaipw")
        assert not report.has_interval
        assert report.ci_width is None
        assert report.covers(0.3) is None
        with self.assertRaises(ValueError):
            report.standardized_statistic(0.0)

    def test_interval_report(self):
        report = EstimateReport(
            theta_hat=0.5,
            method="fa3ipw",
            weights=np.array([1.0, 4.0]),
            standardized_stat_denominator=2.0,
            ci_low=0.25,
            ci_high=0.75,
        )
        assert report.has_interval
        self.assertAlmostEqual(report.ci_width, 0.5)
        assert report.covers(0.6)
        assert not report.covers(0.8)
        self.assertAlmostEqual(report.standardized_statistic(0.25), 0.5)

        payload = json.loads(json.dumps(report.to_dict()))
        assert payload["weights"] == [1.0, 4.0]
        assert payload["method"] == "fa3ipw"

    def test_invalid_reports(self):
        with self.assertRaises(ValueError):
            EstimateReport(theta_hat=1.0, method="fa3ipw", ci_low=0.0, ci_high=0.5)
        with self.assertRaises(ValueError):
            EstimateReport(theta_hat=0.1, method="fa3ipw", ci_low=0.0)
        with self.assertRaises(ValueError):
            EstimateReport(theta_hat=0.1, method="dm", alpha=1.0)
