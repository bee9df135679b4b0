"""Preference objectives: shaped margin, weighted pairwise and listwise losses.

The pairwise loss is a weighted logistic loss on the shaped margin; the
listwise loss is a weighted Plackett-Luce objective over per-candidate
utilities. Both are computed in numerically stable form (softplus and
log-sum-exp) together with their analytic gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class ObjectiveError(ValueError):
    """Invalid objective input."""


@dataclass(frozen=True)
class ObjectiveParams:
    beta_temp: float = 2.0
    gamma_mix: float = 1.0

    def __post_init__(self):
        if self.beta_temp <= 0:
            raise ObjectiveError("beta_temp must be positive")
        if self.gamma_mix < 0:
            raise ObjectiveError("gamma_mix must be nonnegative")


@dataclass(frozen=True)
class WeightedPair:
    d_logp_policy: float
    d_logp_ref: float
    d_reward: float
    weight: float

    def __post_init__(self):
        fields = (self.d_logp_policy, self.d_logp_ref, self.d_reward, self.weight)
        if not all(math.isfinite(v) for v in fields):
            raise ObjectiveError(f"non-finite pair fields: {fields}")


@dataclass(frozen=True)
class ListwiseInstance:
    logp_policy: tuple[float, ...]
    logp_ref: tuple[float, ...]
    rewards: tuple[float, ...]
    preferred: frozenset[int]
    weight: float

    def __post_init__(self):
        k = len(self.logp_policy)
        if k < 2 or len(self.logp_ref) != k or len(self.rewards) != k:
            raise ObjectiveError("need >= 2 candidates with aligned fields")
        if not self.preferred:
            raise ObjectiveError("preferred set must be non-empty")
        if any(i < 0 or i >= k for i in self.preferred):
            raise ObjectiveError("preferred index out of range")


def margin(pair: WeightedPair, params: ObjectiveParams) -> float:
    """Shaped margin: scaled log-odds delta plus scaled reward delta."""
    return (
        params.beta_temp * (pair.d_logp_policy - pair.d_logp_ref)
        + params.gamma_mix * pair.d_reward
    )


def pairwise_loss(pair: WeightedPair, params: ObjectiveParams) -> float:
    """Weighted logistic loss -w log sigma(m), via softplus(-m)."""
    return pair.weight * _softplus(-margin(pair, params))


def pairwise_grad(pair: WeightedPair, params: ObjectiveParams) -> tuple[float, float]:
    """(dL/d d_logp_policy, dL/d d_reward) for the pairwise loss."""
    s = _sigmoid(-margin(pair, params))
    return (-pair.weight * params.beta_temp * s, -pair.weight * params.gamma_mix * s)


def utilities(inst: ListwiseInstance, params: ObjectiveParams) -> list[float]:
    """Per-candidate Plackett-Luce utilities."""
    return [
        params.beta_temp * (lp - lr) + params.gamma_mix * r
        for lp, lr, r in zip(inst.logp_policy, inst.logp_ref, inst.rewards)
    ]


def listwise_loss(inst: ListwiseInstance, params: ObjectiveParams) -> float:
    """Weighted negative log-softmax mass on the preferred candidates."""
    z = utilities(inst, params)
    lse = _logsumexp(z)
    return -inst.weight * sum(z[i] - lse for i in inst.preferred)


def listwise_grad(inst: ListwiseInstance, params: ObjectiveParams) -> list[float]:
    """Gradient of the listwise loss with respect to each utility."""
    z = utilities(inst, params)
    probs = _softmax(z)
    n_pref = len(inst.preferred)
    return [
        inst.weight * (n_pref * probs[i] - (1.0 if i in inst.preferred else 0.0))
        for i in range(len(z))
    ]


def batch_pairwise_loss(pairs: Sequence[WeightedPair], params: ObjectiveParams) -> float:
    """Mean pairwise loss, reduced as a left-fold in input order."""
    if not pairs:
        raise ObjectiveError("empty batch")
    total = 0.0
    for pair in pairs:
        total += pairwise_loss(pair, params)
    return total / len(pairs)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _softplus(x: float) -> float:
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def _logsumexp(values: Sequence[float]) -> float:
    top = max(values)
    return top + math.log(sum(math.exp(v - top) for v in values))


def _softmax(values: Sequence[float]) -> list[float]:
    top = max(values)
    exps = [math.exp(v - top) for v in values]
    total = sum(exps)
    return [e / total for e in exps]
