"""Semantic scoring, shaped reward, and calibrator tests."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from turdpo.reward import (
    CalibratorGradient,
    CalibratorPair,
    CalibratorParams,
    RewardParams,
    SemanticSignals,
    SemanticWeights,
    SignalBundle,
    TrainingError,
    ValidationError,
    calibrator_gradient,
    calibrator_loss,
    calibrator_step,
    reward_delta,
    semantic_score,
    shaped_reward,
)


class TestSemanticScore:
    def test_linear_formula(self):
        s = semantic_score(
            SemanticSignals(q_fact=0.8, q_task=0.6, q_hall=0.3),
            SemanticWeights(beta1=1.0, beta2=2.0, beta3=0.5),
        )
        assert s == pytest.approx(0.8 + 1.2 - 0.15)

    def test_signal_range_validated(self):
        with pytest.raises(ValidationError):
            SemanticSignals(q_fact=1.2, q_task=0.5, q_hall=0.0)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError):
            SemanticWeights(beta3=-0.5)


class TestShapedReward:
    def test_default_parameters_formula(self):
        bundle = SignalBundle(s_sem=1.0, s_topo=0.5, u=0.2)
        r = shaped_reward(bundle, CalibratorParams(), RewardParams())
        assert r == pytest.approx(0.6 * 1.0 + 0.4 * 0.5 - 0.5 * 0.2)

    def test_calibrator_biases_shift_reward(self):
        bundle = SignalBundle(s_sem=0.0, s_topo=0.0, u=0.0)
        phi = CalibratorParams(b_sem=1.0, b_topo=-1.0)
        r = shaped_reward(bundle, phi, RewardParams(a=0.6))
        assert r == pytest.approx(0.6 * 1.0 + 0.4 * -1.0)

    @settings(max_examples=300, deadline=None)
    @given(
        s_sem=st.floats(-3, 3),
        s_topo=st.floats(-3, 3),
        u=st.floats(0, 5),
        bump=st.floats(0.0, 2.0),
        a=st.floats(0, 1),
        lam=st.floats(0, 2),
        g_sem=st.floats(0, 3),
        g_topo=st.floats(0, 3),
    )
    def test_monotonicity(self, s_sem, s_topo, u, bump, a, lam, g_sem, g_topo):
        phi = CalibratorParams(gamma_sem=g_sem, gamma_topo=g_topo)
        params = RewardParams(a=a, lambda_u=lam)
        base = shaped_reward(SignalBundle(s_sem, s_topo, u), phi, params)
        assert shaped_reward(SignalBundle(s_sem + bump, s_topo, u), phi, params) >= base - 1e-12
        assert shaped_reward(SignalBundle(s_sem, s_topo + bump, u), phi, params) >= base - 1e-12
        assert shaped_reward(SignalBundle(s_sem, s_topo, u + bump), phi, params) <= base + 1e-12

    def test_negative_uncertainty_rejected(self):
        with pytest.raises(ValidationError):
            SignalBundle(0.0, 0.0, -0.1)

    def test_invalid_mixing_weight(self):
        with pytest.raises(ValidationError):
            RewardParams(a=1.5)


class TestRewardDelta:
    def test_biases_cancel(self):
        pair = CalibratorPair(
            d_s_sem=0.4, d_s_topo=-0.2, d_u=0.1, d_logp_policy=0.0, d_logp_ref=0.0, weight=1.0
        )
        params = RewardParams()
        d1 = reward_delta(pair, CalibratorParams(b_sem=0.0, b_topo=0.0), params)
        d2 = reward_delta(pair, CalibratorParams(b_sem=5.0, b_topo=-3.0), params)
        assert d1 == pytest.approx(d2, abs=1e-12)

    def test_matches_shaped_reward_difference(self):
        phi = CalibratorParams(gamma_sem=1.3, b_sem=0.2, gamma_topo=0.7, b_topo=-0.1)
        params = RewardParams(a=0.55, lambda_u=0.4)
        w = SignalBundle(0.8, 0.3, 0.2)
        l = SignalBundle(0.1, -0.2, 0.6)
        pair = CalibratorPair(
            d_s_sem=w.s_sem - l.s_sem,
            d_s_topo=w.s_topo - l.s_topo,
            d_u=w.u - l.u,
            d_logp_policy=0.0,
            d_logp_ref=0.0,
            weight=1.0,
        )
        expected = shaped_reward(w, phi, params) - shaped_reward(l, phi, params)
        assert reward_delta(pair, phi, params) == pytest.approx(expected, abs=1e-12)


class TestCalibratorTraining:
    def _pair(self, **kw):
        defaults = dict(
            d_s_sem=0.5, d_s_topo=0.3, d_u=0.1, d_logp_policy=0.2, d_logp_ref=0.0, weight=0.8
        )
        defaults.update(kw)
        return CalibratorPair(**defaults)

    def test_bias_gradients_are_exactly_zero(self):
        grad = calibrator_gradient(
            [self._pair()], CalibratorParams(), RewardParams(), 2.0, 1.0
        )
        assert grad.b_sem == 0.0
        assert grad.b_topo == 0.0

    def test_gradient_descends_the_loss(self):
        phi = CalibratorParams()
        params = RewardParams()
        pairs = [self._pair(), self._pair(d_s_sem=-0.2, d_s_topo=0.6)]
        before = calibrator_loss(pairs, phi, params, 2.0, 1.0)
        grad = calibrator_gradient(pairs, phi, params, 2.0, 1.0)
        after = calibrator_loss(
            pairs, calibrator_step(phi, grad, 0.01), params, 2.0, 1.0
        )
        assert after <= before

    def test_projection_keeps_gains_nonnegative(self):
        phi = CalibratorParams(gamma_sem=0.1, gamma_topo=0.1)
        grad = CalibratorGradient(gamma_sem=100.0, b_sem=0.0, gamma_topo=100.0, b_topo=0.0)
        stepped = calibrator_step(phi, grad, 1.0)
        assert stepped.gamma_sem == 0.0
        assert stepped.gamma_topo == 0.0

    def test_adversarial_steps_never_break_the_projection(self):
        import random

        rng = random.Random(0)
        phi = CalibratorParams(gamma_sem=1.0, gamma_topo=1.0)
        for _ in range(10_000):
            grad = CalibratorGradient(
                gamma_sem=rng.uniform(-50, 50),
                b_sem=rng.uniform(-5, 5),
                gamma_topo=rng.uniform(-50, 50),
                b_topo=rng.uniform(-5, 5),
            )
            phi = calibrator_step(phi, grad, rng.uniform(0.0, 1.0))
            assert phi.gamma_sem >= 0.0
            assert phi.gamma_topo >= 0.0

    def test_empty_batch_raises(self):
        with pytest.raises(TrainingError):
            calibrator_gradient([], CalibratorParams(), RewardParams(), 2.0, 1.0)

    def test_non_finite_gradient_raises(self):
        grad = CalibratorGradient(math.nan, 0.0, 0.0, 0.0)
        with pytest.raises(TrainingError):
            calibrator_step(CalibratorParams(), grad, 0.1)

    def test_negative_learning_rate_rejected(self):
        grad = CalibratorGradient(0.0, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            calibrator_step(CalibratorParams(), grad, -0.1)

    def test_negative_gain_rejected_on_construction(self):
        with pytest.raises(ValidationError):
            CalibratorParams(gamma_sem=-0.1)
