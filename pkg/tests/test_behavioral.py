import math

import numpy as np
import pytest

from conftest import (
    COORDINATION,
    MATCHING_PENNIES,
    PD,
    all_model_specs,
    games_to_arrays,
    random_games,
)
from matrixgames.behavioral import (
    Belief,
    ModelParams,
    ModelSpec,
    RiskParam,
    Structure,
    cara_utility,
    expected_utilities,
    level_k_belief,
    logit_choice,
    model_string,
    parse_model_string,
    predict,
    predict_batch,
    predict_nash,
    predict_qre,
)
from matrixgames.errors import InvalidSpec
from matrixgames.games import GameMatrix


class TestModelGrammar:
    @pytest.mark.parametrize(
        "text,structure,k,belief,risk,slots",
        [
            ("Nash", Structure.NASH, None, False, False, ()),
            ("QRE", Structure.QRE, None, False, False, ()),
            ("nQRE", Structure.QRE, None, False, False, ("eta_self",)),
            ("QRE+Belief+Risk", Structure.QRE, None, True, True, ()),
            ("L0+QR", Structure.LEVEL_K, 0, False, False, ()),
            ("L1+QR", Structure.LEVEL_K, 1, False, False, ()),
            ("L2+QR+Belief+Risk", Structure.LEVEL_K, 2, True, True, ()),
            ("L2+nQR+Belief", Structure.LEVEL_K, 2, True, False, ("eta_self",)),
            ("L2+nQR+nBelief+Risk", Structure.LEVEL_K, 2, True, True, ("eta_self", "eta_other")),
            ("L3+QR", Structure.LEVEL_K, 3, False, False, ()),
            ("L+QR", Structure.LEVEL_MIXTURE, None, False, False, ()),
            ("nL+QR+Risk", Structure.LEVEL_MIXTURE, None, False, True, ("level_mixture",)),
            ("nL+nQR+nBelief+Risk", Structure.LEVEL_MIXTURE, None, True, True,
             ("level_mixture", "eta_self", "eta_other")),
        ],
    )
    def test_parse_table(self, text, structure, k, belief, risk, slots):
        spec, got_slots = parse_model_string(text)
        assert spec.structure is structure
        assert spec.k == k
        assert spec.use_belief_noise is belief
        assert spec.use_risk is risk
        assert set(got_slots) == set(slots)

    @pytest.mark.parametrize(
        "bad",
        [
            "",
            "L9+QR",
            "L1",
            "L",
            "nL",
            "Nash+QR",
            "Nash+Risk",
            "QRE+QR",
            "L1+QR+QR",
            "L1+XYZ",
            "Belief",
            "L1+nQR+nQR",
        ],
    )
    def test_parse_rejects(self, bad):
        with pytest.raises(InvalidSpec):
            parse_model_string(bad)

    @pytest.mark.parametrize(
        "text",
        ["Nash", "QRE", "nQRE+Belief", "L0+QR", "L2+QR+Belief+Risk",
         "L2+nQR+nBelief+Risk", "L+QR", "nL+nQR+Risk"],
    )
    def test_string_round_trip(self, text):
        spec, slots = parse_model_string(text)
        assert model_string(spec, slots) == text

    def test_spec_validation(self):
        with pytest.raises(InvalidSpec):
            ModelSpec(Structure.LEVEL_K, k=4)
        with pytest.raises(InvalidSpec):
            ModelSpec(Structure.QRE, k=1)
        with pytest.raises(InvalidSpec):
            ModelSpec(Structure.NASH, use_risk=True)


class TestPrimitives:
    def test_cara_examples(self):
        assert cara_utility(7.25, 0.0) == 7.25
        assert cara_utility(0.0, RiskParam(0.5)) == 0.0
        assert cara_utility(10.0, RiskParam(0.1)) == pytest.approx(6.321206, abs=5e-7)

    def test_logit_choice_examples(self):
        assert logit_choice(0.0, 3.7) == 0.5
        assert logit_choice(math.log(3), 1.0) == pytest.approx(0.75, abs=1e-15)
        assert logit_choice(-10.0, 1.0) == pytest.approx(4.5397868702434395e-05, rel=1e-12)

    def test_logit_complement(self):
        for d in (-8.0, -1.0, 0.3, 12.0):
            assert logit_choice(-d, 2.0) == pytest.approx(1.0 - logit_choice(d, 2.0), abs=3e-16)

    def test_expected_utilities_pd(self):
        eu_a, eu_b = expected_utilities(PD, "row", Belief(0.5), 0.0)
        assert (eu_a, eu_b) == (20.0, 30.0)

    def test_degenerate_belief(self):
        eu_a, eu_b = expected_utilities(PD, "row", Belief(1.0), 0.0)
        assert (eu_a, eu_b) == (30.0, 40.0)

    def test_constant_game(self):
        g = GameMatrix((5, 5, 5, 5), (5, 5, 5, 5))
        eu_a, eu_b = expected_utilities(g, "row", Belief(0.3), 0.2)
        assert eu_a == eu_b

    def test_col_role_uses_transposed_view(self):
        eu_c, eu_d = expected_utilities(PD, "col", Belief(0.5), 0.0)
        # symmetric game: the column player faces the same decision
        assert (eu_c, eu_d) == (20.0, 30.0)


class TestLevelKBelief:
    def test_level1_uniform(self):
        assert level_k_belief(PD, "row", 1, 5.0).p_first == 0.5

    def test_pd_level2_oracle(self):
        b = level_k_belief(PD, "row", 2, 1.0, 0.0)
        assert b.p_first == pytest.approx(4.5397868702434395e-05, rel=1e-12)

    def test_zero_precision(self):
        b = level_k_belief(PD, "row", 2, 0.0)
        assert b.p_first == 0.5

    def test_bad_level(self):
        with pytest.raises(InvalidSpec):
            level_k_belief(PD, "row", 5, 1.0)


class TestPredict:
    def test_pd_l1_oracle(self):
        spec, _ = parse_model_string("L1+QR")
        p = predict(spec, ModelParams(eta_self=1.0), PD, "row")
        assert p == pytest.approx(4.5397868702434395e-05, rel=1e-12)

    def test_zero_eta_pure_noise(self):
        for label, spec, params in all_model_specs():
            if spec.structure is Structure.NASH:
                continue
            zeroed = ModelParams(
                eta_self=0.0,
                eta_other=0.0 if params.eta_other is not None else None,
                alpha=params.alpha,
                level_weights=params.level_weights,
            )
            assert predict(spec, zeroed, PD, "row") == pytest.approx(0.5, abs=1e-15), label

    def test_all_level0_mixture(self):
        spec, _ = parse_model_string("L+QR")
        params = ModelParams(eta_self=2.0, level_weights=(1.0, 0.0, 0.0, 0.0))
        for g in (PD, MATCHING_PENNIES, COORDINATION):
            assert predict(spec, params, g, "row") == 0.5

    def test_weights_on_wrong_structure(self):
        spec, _ = parse_model_string("L1+QR")
        with pytest.raises(InvalidSpec):
            predict(spec, ModelParams(eta_self=1.0, level_weights=(1, 0, 0, 0)), PD)

    def test_missing_eta(self):
        spec, _ = parse_model_string("L1+QR")
        with pytest.raises(InvalidSpec):
            predict(spec, ModelParams(), PD)

    def test_eta_limit_matches_best_response(self):
        spec, _ = parse_model_string("L1+QR")
        # PD: B strictly dominant, so level-1 play converges to p(A) = 0
        p = predict(spec, ModelParams(eta_self=1e4), PD, "row")
        assert p < 1e-15

    def test_risk_changes_prediction(self):
        g = GameMatrix((45, 2, 20, 20), (9, 9, 9, 9))
        spec, _ = parse_model_string("L1+QR+Risk")
        base = predict(spec, ModelParams(eta_self=0.4, alpha=0.0), g)
        averse = predict(spec, ModelParams(eta_self=0.4, alpha=0.2), g)
        # A is a 45-or-2 gamble against the safe 20: risk aversion must cut p(A)
        assert averse < base


class TestPredictNash:
    def test_pd(self):
        assert predict_nash(PD, "row") == 0.0

    def test_coordination_uniform_over_psne(self):
        assert predict_nash(COORDINATION, "row") == 0.5
        assert predict_nash(COORDINATION, "col") == 0.5

    def test_matching_pennies_mixed_fallback(self):
        assert predict_nash(MATCHING_PENNIES, "row") == 0.5

    def test_tied_rows_average_over_weak_equilibria(self):
        # row ties everywhere, so (A,D) and (B,C) are weak equilibria
        g = GameMatrix((5, 5, 5, 5), (1, 10, 10, 1))
        assert predict_nash(g, "row") == 0.5


class TestPredictQre:
    def test_matching_pennies_center(self):
        for eta in (0.01, 0.1, 1.0, 10.0):
            p, q = predict_qre(MATCHING_PENNIES, ModelParams(eta_self=eta))
            assert abs(p - 0.5) <= 1e-12 and abs(q - 0.5) <= 1e-12

    def test_zero_precision_center(self):
        p, q = predict_qre(PD, ModelParams(eta_self=0.0))
        assert (p, q) == (0.5, 0.5)

    def test_large_eta_approaches_strict_equilibrium(self):
        p, q = predict_qre(PD, ModelParams(eta_self=50.0))
        assert p < 1e-9 and q < 1e-9

    def test_residual_definition(self):
        from matrixgames import kernels

        p, q = predict_qre(COORDINATION, ModelParams(eta_self=0.8), tol=1e-10)
        a, b, c, d = (float(v) for v in COORDINATION.row_payoffs)
        x, y, z, w = (float(v) for v in COORDINATION.col_payoffs)
        dr = q * (a - c) + (1 - q) * (b - d)
        dc = p * (x - y) + (1 - p) * (z - w)
        assert abs(p - kernels.logistic(np.asarray(0.8 * dr))) <= 1e-10
        assert abs(q - kernels.logistic(np.asarray(0.8 * dc))) <= 1e-10


def _batch(spec, params, R, C):
    return predict_batch(spec, params, R, C)


class TestSymmetryInvariants:
    """Row-swap equivariance, column-swap invariance, translation invariance
    and scale-precision equivalence for every expressible spec."""

    def setup_method(self):
        rng = np.random.default_rng(99)
        self.R, self.C = games_to_arrays(random_games(rng, 120))

    @pytest.mark.parametrize("label,spec,params", all_model_specs(),
                             ids=[t[0] for t in all_model_specs()])
    def test_row_swap_equivariance(self, label, spec, params):
        base = _batch(spec, params, self.R, self.C)
        swapped = _batch(spec, params, self.R[:, [2, 3, 0, 1]], self.C[:, [2, 3, 0, 1]])
        assert np.max(np.abs(swapped - (1.0 - base))) < 1e-12

    @pytest.mark.parametrize("label,spec,params", all_model_specs(),
                             ids=[t[0] for t in all_model_specs()])
    def test_col_swap_invariance(self, label, spec, params):
        base = _batch(spec, params, self.R, self.C)
        swapped = _batch(spec, params, self.R[:, [1, 0, 3, 2]], self.C[:, [1, 0, 3, 2]])
        assert np.max(np.abs(swapped - base)) < 1e-12

    @pytest.mark.parametrize("label,spec,params", all_model_specs(),
                             ids=[t[0] for t in all_model_specs()])
    def test_translation_invariance_without_risk(self, label, spec, params):
        params = ModelParams(params.eta_self, params.eta_other, 0.0, params.level_weights)
        base = _batch(spec, params, self.R, self.C)
        shifted = _batch(spec, params, self.R + 13.0, self.C - 6.0)
        assert np.max(np.abs(shifted - base)) < 1e-12

    @pytest.mark.parametrize("label,spec,params", all_model_specs(),
                             ids=[t[0] for t in all_model_specs()])
    def test_scale_precision_equivalence(self, label, spec, params):
        if spec.structure is Structure.NASH:
            pytest.skip("Nash has no precision parameter")
        lam = 4.0
        params0 = ModelParams(params.eta_self, params.eta_other, 0.0, params.level_weights)
        scaled = ModelParams(
            params.eta_self / lam,
            None if params.eta_other is None else params.eta_other / lam,
            0.0,
            params.level_weights,
        )
        base = _batch(spec, params0, self.R, self.C)
        equiv = _batch(spec, scaled, self.R * lam, self.C * lam)
        assert np.max(np.abs(equiv - base)) < 1e-12
