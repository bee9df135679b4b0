"""Semantic scoring, linear calibrators, and the shaped reward.

The shaped reward mixes a calibrated semantic score with a calibrated
topology score and subtracts an uncertainty penalty. Calibrators are
deliberately low-capacity (one gain and one bias per branch) and are
updated by a weighted Bradley-Terry gradient step with the gains
projected to stay nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence


class ValidationError(ValueError):
    """Signal outside its allowed range."""


class TrainingError(RuntimeError):
    """Non-finite quantity encountered during calibrator training."""


@dataclass(frozen=True)
class SemanticWeights:
    beta1: float = 1.0
    beta2: float = 1.0
    beta3: float = 1.0

    def __post_init__(self):
        if min(self.beta1, self.beta2, self.beta3) < 0:
            raise ValidationError("semantic weights must be nonnegative")


@dataclass(frozen=True)
class SemanticSignals:
    q_fact: float
    q_task: float
    q_hall: float

    def __post_init__(self):
        for name in ("q_fact", "q_task", "q_hall"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class CalibratorParams:
    gamma_sem: float = 1.0
    b_sem: float = 0.0
    gamma_topo: float = 1.0
    b_topo: float = 0.0

    def __post_init__(self):
        if self.gamma_sem < 0 or self.gamma_topo < 0:
            raise ValidationError("calibrator gains must be nonnegative")


@dataclass(frozen=True)
class RewardParams:
    a: float = 0.6
    lambda_u: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise ValidationError("mixing weight a must lie in [0, 1]")
        if self.lambda_u < 0:
            raise ValidationError("lambda_u must be nonnegative")


@dataclass(frozen=True)
class SignalBundle:
    s_sem: float
    s_topo: float
    u: float

    def __post_init__(self):
        if self.u < 0:
            raise ValidationError("uncertainty must be nonnegative")


def semantic_score(signals: SemanticSignals, weights: SemanticWeights) -> float:
    """Factuality plus task success minus hallucination, linearly weighted."""
    return (
        weights.beta1 * signals.q_fact
        + weights.beta2 * signals.q_task
        - weights.beta3 * signals.q_hall
    )


def shaped_reward(
    bundle: SignalBundle, phi: CalibratorParams, params: RewardParams
) -> float:
    """Calibrated mix of semantic and topology scores minus uncertainty penalty."""
    sem = phi.gamma_sem * bundle.s_sem + phi.b_sem
    topo = phi.gamma_topo * bundle.s_topo + phi.b_topo
    return params.a * sem + (1.0 - params.a) * topo - params.lambda_u * bundle.u


@dataclass(frozen=True)
class CalibratorPair:
    """Pairwise deltas (winner minus loser) feeding the calibrator update."""

    d_s_sem: float
    d_s_topo: float
    d_u: float
    d_logp_policy: float
    d_logp_ref: float
    weight: float


@dataclass(frozen=True)
class CalibratorGradient:
    gamma_sem: float
    b_sem: float
    gamma_topo: float
    b_topo: float


def reward_delta(pair: CalibratorPair, phi: CalibratorParams, params: RewardParams) -> float:
    """Shaped-reward difference for a pair; calibrator biases cancel."""
    return (
        params.a * phi.gamma_sem * pair.d_s_sem
        + (1.0 - params.a) * phi.gamma_topo * pair.d_s_topo
        - params.lambda_u * pair.d_u
    )


def calibrator_gradient(
    pairs: Sequence[CalibratorPair],
    phi: CalibratorParams,
    params: RewardParams,
    beta_temp: float,
    gamma_mix: float,
) -> CalibratorGradient:
    """Gradient of the weighted Bradley-Terry loss with respect to phi.

    The loss per pair is -w * log sigmoid(m) with the margin m combining
    the policy/reference log-odds delta and the shaped-reward delta. The
    bias terms cancel in pairwise deltas, so their gradients are exactly
    zero by construction.
    """
    if not pairs:
        raise TrainingError("empty calibrator batch")
    g_sem = 0.0
    g_topo = 0.0
    for pair in pairs:
        margin = beta_temp * (pair.d_logp_policy - pair.d_logp_ref) + gamma_mix * reward_delta(
            pair, phi, params
        )
        # d/dm of -w log sigma(m) is -w sigma(-m)
        dm = -pair.weight * _sigmoid(-margin)
        g_sem += dm * gamma_mix * params.a * pair.d_s_sem
        g_topo += dm * gamma_mix * (1.0 - params.a) * pair.d_s_topo
    return CalibratorGradient(gamma_sem=g_sem, b_sem=0.0, gamma_topo=g_topo, b_topo=0.0)


def calibrator_loss(
    pairs: Sequence[CalibratorPair],
    phi: CalibratorParams,
    params: RewardParams,
    beta_temp: float,
    gamma_mix: float,
) -> float:
    """Weighted Bradley-Terry loss over a batch (for diagnostics and checks)."""
    if not pairs:
        raise TrainingError("empty calibrator batch")
    total = 0.0
    for pair in pairs:
        margin = beta_temp * (pair.d_logp_policy - pair.d_logp_ref) + gamma_mix * reward_delta(
            pair, phi, params
        )
        total += pair.weight * _softplus(-margin)
    return total


def calibrator_step(
    phi: CalibratorParams, grad: CalibratorGradient, lr: float
) -> CalibratorParams:
    """Gradient-descent step with projection of the gains onto [0, inf)."""
    if lr < 0:
        raise ValueError("learning rate must be nonnegative")
    values = (grad.gamma_sem, grad.b_sem, grad.gamma_topo, grad.b_topo)
    if not all(math.isfinite(v) for v in values):
        raise TrainingError(f"non-finite calibrator gradient: {values}")
    return replace(
        phi,
        gamma_sem=max(0.0, phi.gamma_sem - lr * grad.gamma_sem),
        b_sem=phi.b_sem - lr * grad.b_sem,
        gamma_topo=max(0.0, phi.gamma_topo - lr * grad.gamma_topo),
        b_topo=phi.b_topo - lr * grad.b_topo,
    )


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _softplus(x: float) -> float:
    # log(1 + exp(x)) without overflow
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))
