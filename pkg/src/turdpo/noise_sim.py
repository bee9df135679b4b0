"""Synthetic judge-noise robustness study.

Builds a toy preference world with known latent utilities, corrupts a
fraction of the labels (optionally concentrated on high-uncertainty
pairs), trains plain and uncertainty-weighted preference policies, and
reports how much of the clean-data win-rate each method retains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .objective import ObjectiveParams
from .uncertainty import PairWeightParams


@dataclass(frozen=True)
class WorldConfig:
    n_prompts: int = 50
    n_candidates: int = 4
    semantic_noise: float = 0.5
    train_steps: int = 150
    learning_rate: float = 0.5

    def __post_init__(self):
        if self.n_prompts < 1 or self.n_candidates < 2:
            raise ValueError("need at least one prompt and two candidates")


@dataclass(frozen=True)
class SyntheticWorld:
    """Latent utilities plus the derived pair table for one seed."""

    utilities: np.ndarray  # (prompts, candidates)
    pair_prompt: np.ndarray  # pair -> prompt index
    pair_hi: np.ndarray  # pair -> truly better candidate
    pair_lo: np.ndarray  # pair -> truly worse candidate
    pair_uncertainty: np.ndarray
    semantic: np.ndarray  # (prompts, candidates) noisy utility observations


def build_world(rng: np.random.Generator, cfg: WorldConfig) -> SyntheticWorld:
    utilities = rng.normal(0.0, 1.0, size=(cfg.n_prompts, cfg.n_candidates))
    semantic = utilities + rng.normal(0.0, cfg.semantic_noise, size=utilities.shape)
    prompts, his, los, uncs = [], [], [], []
    for p in range(cfg.n_prompts):
        for i in range(cfg.n_candidates):
            for j in range(i + 1, cfg.n_candidates):
                hi, lo = (i, j) if utilities[p, i] >= utilities[p, j] else (j, i)
                gap = abs(utilities[p, i] - utilities[p, j])
                prompts.append(p)
                his.append(hi)
                los.append(lo)
                # hard pairs (small utility gap) produce fragile graphs;
                # the scale makes the weight floor bind on the hardest pairs
                uncs.append(20.0 / (1.0 + math.exp(4.0 * gap)))
    return SyntheticWorld(
        utilities=utilities,
        pair_prompt=np.array(prompts),
        pair_hi=np.array(his),
        pair_lo=np.array(los),
        pair_uncertainty=np.array(uncs),
        semantic=semantic,
    )


def flip_labels(
    rng: np.random.Generator, world: SyntheticWorld, eps: float, dependence: str
) -> np.ndarray:
    """Boolean mask of pairs whose winner/loser assignment is flipped."""
    n = world.pair_prompt.size
    if eps <= 0:
        return np.zeros(n, dtype=bool)
    if dependence == "independent":
        prob = np.full(n, eps)
    else:
        u = world.pair_uncertainty
        prob = np.minimum(1.0, eps * u / u.mean())
    return rng.random(n) < prob


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def train_toy_policy(
    world: SyntheticWorld,
    flipped: np.ndarray,
    objective: ObjectiveParams,
    weights: np.ndarray,
    rewards: np.ndarray,
    steps: int,
    learning_rate: float,
    grad_clip: float = 10.0,
) -> np.ndarray:
    """Full-batch weighted pairwise training on the flipped pair table.

    Vectorized equivalent of the general trainer for the fixed-reference,
    frozen-calibrator case: margins are beta * (policy minus reference
    log-odds delta) plus gamma * reward delta, and every step applies the
    mean clipped gradient. Returns the trained logits (prompts x candidates).
    """
    n_prompts, n_cands = world.utilities.shape
    logits = np.zeros((n_prompts, n_cands))
    ref_logits = np.zeros_like(logits)

    win = np.where(flipped, world.pair_lo, world.pair_hi)
    lose = np.where(flipped, world.pair_hi, world.pair_lo)
    pidx = world.pair_prompt
    d_reward = rewards[pidx, win] - rewards[pidx, lose]
    n = pidx.size

    ref_lp = _log_softmax(ref_logits)
    d_ref = ref_lp[pidx, win] - ref_lp[pidx, lose]
    for _ in range(steps):
        lp = _log_softmax(logits)
        d_pol = lp[pidx, win] - lp[pidx, lose]
        m = objective.beta_temp * (d_pol - d_ref) + objective.gamma_mix * d_reward
        coeff = -weights * objective.beta_temp / (1.0 + np.exp(m)) / n
        grad = np.zeros_like(logits)
        np.add.at(grad, (pidx, win), coeff)
        np.add.at(grad, (pidx, lose), -coeff)
        norm = float(np.sqrt((grad**2).sum()))
        if grad_clip > 0 and norm > grad_clip:
            grad *= grad_clip / norm
        logits -= learning_rate * grad
    return logits


def ordering_win_rate(world: SyntheticWorld, logits: np.ndarray) -> float:
    """Fraction of candidate pairs the policy orders like the true utilities."""
    correct = 0
    total = world.pair_prompt.size
    for p, hi, lo in zip(world.pair_prompt, world.pair_hi, world.pair_lo):
        if logits[p, hi] > logits[p, lo]:
            correct += 1
    return correct / total


@dataclass(frozen=True)
class RetentionPoint:
    eps: float
    win_rate_dpo: float
    win_rate_turdpo: float
    retention_dpo: float
    retention_turdpo: float


def run_noise_experiment(
    eps_grid: Sequence[float] = (0.0, 0.1, 0.2, 0.3),
    seeds: int = 20,
    dependence: str = "uncertainty-correlated",
    world_cfg: WorldConfig = WorldConfig(),
    objective: ObjectiveParams = ObjectiveParams(),
    weight_params: PairWeightParams = PairWeightParams(),
    base_seed: int = 0,
) -> list[RetentionPoint]:
    """Mean win-rates and retention ratios for plain vs weighted training.

    The plain baseline trains with unit weights and zero reward mixing.
    The weighted variant maps pair uncertainty to weights and shapes the
    margin with the noisy semantic observations minus an uncertainty
    penalty. Retention is each method's win-rate divided by its own
    clean-label win-rate, averaged over seeds.
    """
    eps_list = list(eps_grid)
    if 0.0 not in eps_list:
        eps_list = [0.0] + eps_list
    acc = {eps: {"dpo": [], "tur": []} for eps in eps_list}
    plain_objective = ObjectiveParams(beta_temp=objective.beta_temp, gamma_mix=0.0)

    for s in range(seeds):
        world_rng = np.random.default_rng(base_seed + s)
        world = build_world(world_rng, world_cfg)
        n = world.pair_prompt.size
        unit_weights = np.ones(n)
        pair_weights = np.clip(
            weight_params.tau_w / (1.0 + world.pair_uncertainty),
            weight_params.w_min,
            1.0,
        )
        # shaped reward per candidate: noisy semantic signal with a flat
        # topology branch; the uncertainty penalty acts through the weights
        rewards = world.semantic
        zero_rewards = np.zeros_like(rewards)
        for eps in eps_list:
            flip_rng = np.random.default_rng(base_seed + 7919 * s + int(eps * 1e6) + 13)
            flipped = flip_labels(flip_rng, world, eps, dependence)
            logits_dpo = train_toy_policy(
                world,
                flipped,
                plain_objective,
                unit_weights,
                zero_rewards,
                world_cfg.train_steps,
                world_cfg.learning_rate,
            )
            logits_tur = train_toy_policy(
                world,
                flipped,
                objective,
                pair_weights,
                rewards,
                world_cfg.train_steps,
                world_cfg.learning_rate,
            )
            acc[eps]["dpo"].append(ordering_win_rate(world, logits_dpo))
            acc[eps]["tur"].append(ordering_win_rate(world, logits_tur))

    base_dpo = float(np.mean(acc[0.0]["dpo"]))
    base_tur = float(np.mean(acc[0.0]["tur"]))
    points = []
    for eps in eps_list:
        wr_dpo = float(np.mean(acc[eps]["dpo"]))
        wr_tur = float(np.mean(acc[eps]["tur"]))
        points.append(
            RetentionPoint(
                eps=eps,
                win_rate_dpo=wr_dpo,
                win_rate_turdpo=wr_tur,
                retention_dpo=wr_dpo / base_dpo,
                retention_turdpo=wr_tur / base_tur,
            )
        )
    return points
