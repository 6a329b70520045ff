import json
import math

import numpy as np
import pytest

from jcdmse.priors import GaussianPrior, KnownPrior, QpskPrior
from jcdmse.scenarios import (
    conventional_jcd_two_cell,
    example1_perfect_csi,
    example2_jcd,
    example2_pilot_only,
    example3_two_cell,
    load_scenario,
    make_prior,
    scenario_to_dict,
)
from jcdmse.solver import SolverConfig, select_result, solve

GOLDEN_ROOT = (math.sqrt(5.0) - 1.0) / 2.0


def selected_mse_X(scenario, pins):
    sel = select_result(solve(scenario, SolverConfig(), pins), scenario)
    assert sel is not None and sel.converged
    return float(sel.params.mse_X[0, 1])


class TestConstructors:
    def test_example1_canonical(self):
        scn, pins = example1_perfect_csi(alpha=1.0, sigma2=1.0, G=1.0)
        assert scn.beta1 == 0.0
        assert pins == {("H", 0): 0.0}
        assert selected_mse_X(scn, pins) == pytest.approx(GOLDEN_ROOT, abs=1e-9)

    def test_example1_large_alpha_series(self):
        alpha = 1e6
        scn, pins = example1_perfect_csi(alpha=alpha, sigma2=1.0, G=1.0)
        # mse ~ sigma2/(alpha G) once the effective SNR dominates
        assert selected_mse_X(scn, pins) == pytest.approx(1.0 / alpha, rel=1e-2)

    def test_example1_large_noise(self):
        scn, pins = example1_perfect_csi(alpha=1.0, sigma2=1e9, G=1.0)
        assert selected_mse_X(scn, pins) == pytest.approx(1.0, rel=1e-6)

    def test_example3_valid_and_pinless(self):
        scn, pins = example3_two_cell(alpha=2.0)
        assert scn.n_cells == 2
        assert pins == {}
        assert scn.priors[0][0].known
        assert not scn.priors[1][0].known  # interference pilots unusable

    def test_example3_load_fractions_checked(self):
        with pytest.raises(ValueError, match="sum to 1"):
            example3_two_cell(alpha=1.0, k1=0.6, k2=0.6)

    def test_conventional_pins_freeze_interferer_at_ignorance(self):
        scn, pins = conventional_jcd_two_cell(alpha=2.0, G2=0.1)
        assert pins[("H", 1)] == 0.1
        assert pins[("X", 1, 0)] == 1.0
        assert pins[("X", 1, 1)] == 1.0

    def test_negligible_pilot_floor_warning(self):
        with pytest.warns(UserWarning, match="ambiguity"):
            example2_jcd(alpha=1.0, beta1=1e-8)
        with pytest.warns(UserWarning, match="ambiguity"):
            example3_two_cell(alpha=1.0, beta1=1e-8)


class TestPilotOnlyScheme:
    def test_canonical_root(self):
        staged = example2_pilot_only(alpha=1.0, beta1=1.0, beta2=1.0, sigma2=1.0)
        assert staged.mse_H == pytest.approx(GOLDEN_ROOT, abs=1e-9)

    def test_many_pilots_estimate_channel_perfectly(self):
        staged = example2_pilot_only(alpha=1.0, beta1=1e6, beta2=1.0, sigma2=1.0)
        assert staged.mse_H <= 1e-5

    def test_beta1_zero_rejected(self):
        with pytest.raises(ValueError, match="beta1 > 0"):
            example2_pilot_only(alpha=1.0, beta1=0.0)

    def test_stage2_worse_than_perfect_csi(self):
        for alpha in (0.5, 1.0, 4.0):
            staged = example2_pilot_only(alpha=alpha, beta1=1.0, beta2=1.0, sigma2=1.0)
            scn1, pins1 = example1_perfect_csi(alpha=alpha, sigma2=1.0, G=1.0)
            assert staged.mse_X2 > selected_mse_X(scn1, pins1)

    def test_jcd_improves_on_pilot_only(self):
        for alpha in (0.5, 1.0, 4.0):
            staged = example2_pilot_only(alpha=alpha, beta1=1.0, beta2=1.0, sigma2=1.0)
            scn, pins = example2_jcd(alpha=alpha, beta1=1.0, beta2=1.0, sigma2=1.0)
            assert selected_mse_X(scn, pins) <= staged.mse_X2 + 1e-12

    def test_no_data_phase_reduces_to_stage1(self):
        # with beta2 = 0 the data-aided term vanishes exactly
        staged = example2_pilot_only(alpha=1.0, beta1=1.0, beta2=0.0, sigma2=1.0)
        scn, _ = example2_jcd(alpha=1.0, beta1=1.0, beta2=0.0, sigma2=1.0)
        sel = select_result(solve(scn, SolverConfig()), scn)
        assert sel.params.mse_H[0] == pytest.approx(staged.mse_H, abs=1e-9)
        assert sel.params.mse_H[0] == pytest.approx(GOLDEN_ROOT, abs=1e-9)


class TestCrossReductionLattice:
    def test_two_cell_with_empty_interferer_equals_single_cell(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            alpha = rng.uniform(0.3, 4.0)
            s2 = rng.uniform(0.1, 1.5)
            scn2, pins2 = example3_two_cell(alpha=alpha, beta1=1.0, beta2=2.0,
                                            sigma2=s2, G1=1.0, G2=0.5, k1=1.0, k2=0.0)
            scn1, pins1 = example2_jcd(alpha=alpha, beta1=1.0, beta2=2.0, sigma2=s2, G=1.0)
            assert selected_mse_X(scn2, pins2) == pytest.approx(
                selected_mse_X(scn1, pins1), abs=1e-9)

    def test_single_cell_with_known_channel_equals_example1(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            alpha = rng.uniform(0.3, 4.0)
            s2 = rng.uniform(0.1, 1.5)
            scn, _ = example2_jcd(alpha=alpha, beta1=0.0, beta2=1.0, sigma2=s2)
            scn1, pins1 = example1_perfect_csi(alpha=alpha, sigma2=s2, G=1.0)
            assert selected_mse_X(scn, {("H", 0): 0.0}) == pytest.approx(
                selected_mse_X(scn1, pins1), abs=1e-9)

    def test_conventional_with_no_interference_matches_jcd(self):
        scnc, pinsc = conventional_jcd_two_cell(alpha=2.0, beta1=1.0, beta2=2.0,
                                                sigma2=0.5, G2=1e-9)
        scn, pins = example2_jcd(alpha=2.0, beta1=1.0, beta2=2.0, sigma2=0.5)
        # interferer load halves the target load, so compare at matched load
        scn_half, _ = example3_two_cell(alpha=2.0, beta1=1.0, beta2=2.0, sigma2=0.5,
                                        G1=1.0, G2=1e-9, k1=0.5, k2=0.5)
        got = selected_mse_X(scnc, pinsc)
        want = selected_mse_X(scn_half, {})
        assert got == pytest.approx(want, rel=1e-6)


class TestScenarioFiles:
    def base_doc(self):
        return {
            "cells": 2,
            "k": [0.5, 0.5],
            "alpha": 2.0,
            "beta": 10.0,
            "beta1": 1.0,
            "sigma2": 0.1,
            "G": [1.0, 0.1],
            "Gamma": [1.0, 1.0],
            "priors": [["known", "gaussian"], ["gaussian", "gaussian"]],
            "pins": [{"param": "mse_H", "cell": 0, "value": 0.0}],
        }

    def test_roundtrip(self):
        doc = self.base_doc()
        scn, pins = load_scenario(doc)
        assert scn.n_cells == 2
        assert scn.beta2 == pytest.approx(9.0)
        assert pins == {("H", 0): 0.0}
        again, pins2 = load_scenario(scenario_to_dict(scn, pins))
        assert again == scn
        assert pins2 == pins

    def test_json_text_stream(self, tmp_path):
        path = tmp_path / "scn.json"
        doc = self.base_doc()
        doc.pop("pins")
        path.write_text(json.dumps(doc))
        scn, pins = load_scenario(str(path))
        assert pins == {}
        assert scn.alpha == 2.0

    def test_unknown_key_reported(self):
        doc = self.base_doc()
        doc["bogus_key"] = 1
        with pytest.raises(ValueError, match="bogus_key"):
            load_scenario(doc)

    def test_missing_key_reported(self):
        doc = self.base_doc()
        del doc["alpha"]
        with pytest.raises(ValueError, match="alpha"):
            load_scenario(doc)

    def test_bad_load_sum_includes_value(self):
        doc = self.base_doc()
        doc["k"] = [0.5, 0.6]
        with pytest.raises(ValueError, match="1.1"):
            load_scenario(doc)

    def test_beta1_exceeding_beta(self):
        doc = self.base_doc()
        doc["beta1"] = 11.0
        with pytest.raises(ValueError, match="beta1"):
            load_scenario(doc)

    def test_bad_prior_kind(self):
        doc = self.base_doc()
        doc["priors"][0][1] = "qam4096"
        with pytest.raises(ValueError, match="qam4096"):
            load_scenario(doc)

    def test_discrete_prior_power_mismatch(self):
        doc = self.base_doc()
        doc["priors"][0][1] = {"kind": "discrete", "points": [[3.0, 0.0], [-3.0, 0.0]],
                               "probs": [0.5, 0.5]}
        with pytest.raises(ValueError, match="does not match"):
            load_scenario(doc)

    def test_discrete_prior_accepted_when_power_matches(self):
        doc = self.base_doc()
        doc["priors"][0][1] = {"kind": "discrete", "points": [[1.0, 0.0], [-1.0, 0.0]],
                               "probs": [0.5, 0.5]}
        scn, _ = load_scenario(doc)
        assert scn.priors[0][1].second_moment() == pytest.approx(1.0)

    def test_pin_schema_checked(self):
        doc = self.base_doc()
        doc["pins"] = [{"param": "mse_Q", "cell": 0, "value": 0.0}]
        with pytest.raises(ValueError, match="mse_Q"):
            load_scenario(doc)
        doc["pins"] = [{"param": "mse_X", "cell": 0, "phase": 5, "value": 0.0}]
        with pytest.raises(ValueError, match="phase"):
            load_scenario(doc)
        doc["pins"] = [{"param": "mse_H", "cell": 0, "value": 99.0}]
        with pytest.raises(ValueError, match="outside"):
            load_scenario(doc)

    def test_make_prior_kinds(self):
        assert isinstance(make_prior("gaussian", 1.0), GaussianPrior)
        assert isinstance(make_prior("qpsk", 1.0), QpskPrior)
        assert isinstance(make_prior("known", 1.0), KnownPrior)
        with pytest.raises(ValueError, match="unknown prior kind"):
            make_prior("hexagon", 1.0)
