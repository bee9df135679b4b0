"""Tabular softmax policy, Gibbs oracle, and the preference training loop.

The policy is a table of per-prompt response logits, which keeps the
optimization exact and lets the KL-regularized objective be checked
against its closed-form Gibbs maximizer. Training follows the batch
pipeline: signals -> weights -> calibrator update -> policy update ->
optional EMA update of the reference.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .objective import ListwiseInstance, ObjectiveParams, WeightedPair, listwise_grad, listwise_loss, margin, pairwise_loss
from .reward import (
    CalibratorPair,
    CalibratorParams,
    RewardParams,
    SignalBundle,
    TrainingError,
    calibrator_gradient,
    calibrator_step,
    shaped_reward,
)


class PolicyError(ValueError):
    """Invalid policy structure or lookup."""


@dataclass(frozen=True)
class EmaParams:
    rho: float = 0.995
    mode: str = "fixed"

    def __post_init__(self):
        if self.mode not in ("fixed", "ema"):
            raise ValueError(f"unknown reference mode {self.mode!r}")
        if self.mode == "ema" and not 0.99 <= self.rho <= 0.997:
            raise ValueError("EMA decay rho must lie in [0.99, 0.997]")


@dataclass
class TabularPolicy:
    """Per-prompt categorical policy parameterized by logits."""

    responses: dict[str, tuple[str, ...]]
    logits: dict[str, np.ndarray]

    @classmethod
    def uniform(cls, responses: dict[str, Sequence[str]]) -> "TabularPolicy":
        resp = {p: tuple(r) for p, r in responses.items()}
        return cls(resp, {p: np.zeros(len(r)) for p, r in resp.items()})

    def copy(self) -> "TabularPolicy":
        return TabularPolicy(dict(self.responses), {p: l.copy() for p, l in self.logits.items()})

    def index(self, prompt: str, response: str) -> int:
        try:
            return self.responses[prompt].index(response)
        except (KeyError, ValueError) as exc:
            raise PolicyError(f"unknown prompt/response: {prompt!r}/{response!r}") from exc

    def log_probs(self, prompt: str) -> np.ndarray:
        if prompt not in self.logits:
            raise PolicyError(f"unknown prompt {prompt!r}")
        z = self.logits[prompt]
        z = z - z.max()
        return z - np.log(np.exp(z).sum())

    def probs(self, prompt: str) -> np.ndarray:
        return np.exp(self.log_probs(prompt))

    def log_prob(self, prompt: str, response: str) -> float:
        return float(self.log_probs(prompt)[self.index(prompt, response)])


def ema_update(ref: TabularPolicy, policy: TabularPolicy, params: EmaParams) -> TabularPolicy:
    """Blend reference logits toward the policy; identity in fixed mode."""
    if params.mode == "fixed":
        return ref
    if set(ref.logits) != set(policy.logits):
        raise PolicyError("reference and policy prompts differ")
    out = ref.copy()
    for prompt, z in policy.logits.items():
        if ref.logits[prompt].shape != z.shape:
            raise PolicyError(f"logit shape mismatch for prompt {prompt!r}")
        out.logits[prompt] = params.rho * ref.logits[prompt] + (1.0 - params.rho) * z
    return out


def gibbs_policy(
    ref: TabularPolicy,
    rewards: dict[str, dict[str, float]],
    params: ObjectiveParams,
) -> TabularPolicy:
    """Closed-form maximizer: reference tilted by exp(beta * gamma * reward)."""
    out = ref.copy()
    for prompt, per_response in rewards.items():
        r = np.array([per_response[resp] for resp in ref.responses[prompt]])
        if not np.all(np.isfinite(r)):
            raise PolicyError(f"non-finite rewards for prompt {prompt!r}")
        out.logits[prompt] = ref.logits[prompt] + params.beta_temp * params.gamma_mix * r
    return out


def kl_objective(
    policy: TabularPolicy,
    ref: TabularPolicy,
    rewards: dict[str, dict[str, float]],
    params: ObjectiveParams,
) -> float:
    """Expected scaled reward minus (1/beta) KL(policy || reference), prompt-averaged."""
    values = []
    for prompt, per_response in rewards.items():
        p = policy.probs(prompt)
        logp = policy.log_probs(prompt)
        logq = ref.log_probs(prompt)
        r = np.array([per_response[resp] for resp in policy.responses[prompt]])
        expected = float(p @ (params.gamma_mix * r))
        kl = float(p @ (logp - logq))
        values.append(expected - kl / params.beta_temp)
    if not values:
        raise PolicyError("no prompts")
    return sum(values) / len(values)


def tv_distance(a: TabularPolicy, b: TabularPolicy) -> float:
    """Maximum per-prompt total-variation distance."""
    return max(0.5 * float(np.abs(a.probs(p) - b.probs(p)).sum()) for p in a.responses)


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainPair:
    """A preference pair with precomputed per-side signals."""

    prompt: str
    winner: str
    loser: str
    s_sem_w: float
    s_topo_w: float
    u_w: float
    s_sem_l: float
    s_topo_l: float
    u_l: float
    weight: float


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    steps: int = 100
    seed: int = 0
    loss_mode: str = "pairwise"
    batch_size: int | None = None
    objective: ObjectiveParams = field(default_factory=ObjectiveParams)
    ema: EmaParams = field(default_factory=EmaParams)
    reward: RewardParams = field(default_factory=RewardParams)
    calibrator_lr: float = 0.0
    grad_clip: float = 10.0
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be nonnegative")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.loss_mode not in ("pairwise", "listwise"):
            raise ValueError(f"unknown loss mode {self.loss_mode!r}")


@dataclass
class TrainResult:
    policy: TabularPolicy
    reference: TabularPolicy
    phi: CalibratorParams
    metrics: list[dict]


def responses_from_pairs(pairs: Sequence[TrainPair]) -> dict[str, tuple[str, ...]]:
    resp: dict[str, list[str]] = {}
    for pair in pairs:
        bucket = resp.setdefault(pair.prompt, [])
        for r in (pair.winner, pair.loser):
            if r not in bucket:
                bucket.append(r)
    return {p: tuple(r) for p, r in resp.items()}


def _pair_rewards(
    pair: TrainPair, phi: CalibratorParams, params: RewardParams
) -> tuple[float, float]:
    r_w = shaped_reward(SignalBundle(pair.s_sem_w, pair.s_topo_w, pair.u_w), phi, params)
    r_l = shaped_reward(SignalBundle(pair.s_sem_l, pair.s_topo_l, pair.u_l), phi, params)
    return r_w, r_l


def _clip_gradient(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    if max_norm <= 0:
        return grads
    total = math.sqrt(sum(float((g**2).sum()) for g in grads.values()))
    if total <= max_norm:
        return grads
    scale = max_norm / total
    return {p: g * scale for p, g in grads.items()}


def train(
    pairs: Sequence[TrainPair],
    cfg: TrainConfig,
    phi: CalibratorParams | None = None,
    initial_policy: TabularPolicy | None = None,
) -> TrainResult:
    """Run the batch training pipeline and return policy, reference, and trace.

    Deterministic given the config seed: batch order is a seeded shuffle of
    the dataset per epoch, and all reductions fold in input order.
    """
    if not pairs:
        raise TrainingError("empty training set")
    phi = phi if phi is not None else CalibratorParams()
    policy = (
        initial_policy.copy()
        if initial_policy is not None
        else TabularPolicy.uniform(responses_from_pairs(pairs))
    )
    ref = policy.copy()
    rng = np.random.default_rng(cfg.seed)
    batch_size = cfg.batch_size or len(pairs)
    metrics: list[dict] = []

    order: list[int] = []
    for step in range(cfg.steps):
        if len(order) < batch_size:
            epoch = rng.permutation(len(pairs)) if cfg.shuffle else np.arange(len(pairs))
            order.extend(int(i) for i in epoch)
        batch = [pairs[i] for i in order[:batch_size]]
        del order[:batch_size]

        # calibrator update precedes the policy step; the policy gradient
        # then uses the updated phi
        if cfg.calibrator_lr > 0:
            cal_pairs = []
            for pair in batch:
                d_logp = policy.log_prob(pair.prompt, pair.winner) - policy.log_prob(
                    pair.prompt, pair.loser
                )
                d_ref = ref.log_prob(pair.prompt, pair.winner) - ref.log_prob(
                    pair.prompt, pair.loser
                )
                cal_pairs.append(
                    CalibratorPair(
                        d_s_sem=pair.s_sem_w - pair.s_sem_l,
                        d_s_topo=pair.s_topo_w - pair.s_topo_l,
                        d_u=pair.u_w - pair.u_l,
                        d_logp_policy=d_logp,
                        d_logp_ref=d_ref,
                        weight=pair.weight,
                    )
                )
            grad = calibrator_gradient(
                cal_pairs, phi, cfg.reward, cfg.objective.beta_temp, cfg.objective.gamma_mix
            )
            phi = calibrator_step(phi, grad, cfg.calibrator_lr)

        loss, mean_margin, grads = _batch_loss_and_grads(batch, policy, ref, phi, cfg)
        if not math.isfinite(loss):
            raise TrainingError(
                f"non-finite loss at step {step}: loss={loss}, phi={phi}, "
                f"batch_prompts={[p.prompt for p in batch]}"
            )
        grads = _clip_gradient(grads, cfg.grad_clip)
        for prompt, g in grads.items():
            policy.logits[prompt] = policy.logits[prompt] - cfg.learning_rate * g
        ref = ema_update(ref, policy, cfg.ema)

        metrics.append(
            {
                "step": step,
                "loss": loss,
                "mean_weight": sum(p.weight for p in batch) / len(batch),
                "mean_margin": mean_margin,
            }
        )
    return TrainResult(policy=policy, reference=ref, phi=phi, metrics=metrics)


def _batch_loss_and_grads(
    batch: Sequence[TrainPair],
    policy: TabularPolicy,
    ref: TabularPolicy,
    phi: CalibratorParams,
    cfg: TrainConfig,
) -> tuple[float, float, dict[str, np.ndarray]]:
    grads: dict[str, np.ndarray] = {}
    total_loss = 0.0
    total_margin = 0.0
    n = len(batch)
    for pair in batch:
        r_w, r_l = _pair_rewards(pair, phi, cfg.reward)
        iw = policy.index(pair.prompt, pair.winner)
        il = policy.index(pair.prompt, pair.loser)
        logp = policy.log_probs(pair.prompt)
        logr = ref.log_probs(pair.prompt)
        if cfg.loss_mode == "pairwise":
            wp = WeightedPair(
                d_logp_policy=float(logp[iw] - logp[il]),
                d_logp_ref=float(logr[iw] - logr[il]),
                d_reward=r_w - r_l,
                weight=pair.weight,
            )
            m = margin(wp, cfg.objective)
            total_loss += pairwise_loss(wp, cfg.objective)
            total_margin += m
            # d loss / d (logit_w - logit_l); softmax terms cancel in the delta
            coeff = -pair.weight * cfg.objective.beta_temp * _sigmoid(-m) / n
            g = grads.setdefault(pair.prompt, np.zeros_like(logp))
            g[iw] += coeff
            g[il] -= coeff
        else:
            inst = ListwiseInstance(
                logp_policy=(float(logp[iw]), float(logp[il])),
                logp_ref=(float(logr[iw]), float(logr[il])),
                rewards=(r_w, r_l),
                preferred=frozenset({0}),
                weight=pair.weight,
            )
            total_loss += listwise_loss(inst, cfg.objective)
            gz = listwise_grad(inst, cfg.objective)
            total_margin += (
                cfg.objective.beta_temp * float(logp[iw] - logp[il] - logr[iw] + logr[il])
                + cfg.objective.gamma_mix * (r_w - r_l)
            )
            # utility grads sum to zero, so per-candidate softmax terms cancel
            g = grads.setdefault(pair.prompt, np.zeros_like(logp))
            g[iw] += cfg.objective.beta_temp * gz[0] / n
            g[il] += cfg.objective.beta_temp * gz[1] / n
    return total_loss / n, total_margin / n, grads


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# checkpoints


def config_hash(cfg: TrainConfig) -> str:
    payload = json.dumps(
        {
            "learning_rate": cfg.learning_rate,
            "steps": cfg.steps,
            "seed": cfg.seed,
            "loss_mode": cfg.loss_mode,
            "batch_size": cfg.batch_size,
            "beta_temp": cfg.objective.beta_temp,
            "gamma_mix": cfg.objective.gamma_mix,
            "ema_mode": cfg.ema.mode,
            "rho": cfg.ema.rho,
            "a": cfg.reward.a,
            "lambda_u": cfg.reward.lambda_u,
            "calibrator_lr": cfg.calibrator_lr,
            "grad_clip": cfg.grad_clip,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def save_checkpoint(
    path: str, result: TrainResult, cfg: TrainConfig
) -> None:
    doc = {
        "logits": {p: list(map(float, z)) for p, z in result.policy.logits.items()},
        "responses": {p: list(r) for p, r in result.policy.responses.items()},
        "phi": {
            "gamma_sem": result.phi.gamma_sem,
            "b_sem": result.phi.b_sem,
            "gamma_topo": result.phi.gamma_topo,
            "b_topo": result.phi.b_topo,
        },
        "steps": cfg.steps,
        "config_hash": config_hash(cfg),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def load_checkpoint(path: str) -> tuple[TabularPolicy, CalibratorParams, int, str]:
    with open(path) as fh:
        doc = json.load(fh)
    policy = TabularPolicy(
        {p: tuple(r) for p, r in doc["responses"].items()},
        {p: np.array(z, dtype=float) for p, z in doc["logits"].items()},
    )
    phi = CalibratorParams(**doc["phi"])
    return policy, phi, int(doc["steps"]), str(doc["config_hash"])
