"""Finite-difference verification of every analytic gradient."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .objective import (
    ListwiseInstance,
    ObjectiveParams,
    WeightedPair,
    listwise_grad,
    listwise_loss,
    pairwise_grad,
    pairwise_loss,
)
from .reward import (
    CalibratorPair,
    CalibratorParams,
    RewardParams,
    calibrator_gradient,
    calibrator_loss,
)

FD_STEP = 1e-5
REL_TOL = 1e-6


def relative_error(analytic: float, numeric: float) -> float:
    # floor keeps central-difference roundoff (~1e-11 absolute at step 1e-5)
    # from dominating when the true gradient is itself near zero
    scale = max(abs(analytic), abs(numeric), 1e-3)
    return abs(analytic - numeric) / scale


def _central(fn, x: float, h: float = FD_STEP) -> float:
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def check_pairwise(n: int = 1000, seed: int = 0, corrupt: bool = False) -> float:
    """Max relative error of the pairwise-loss gradient over random pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        params = ObjectiveParams(
            beta_temp=rng.uniform(1.0, 4.0), gamma_mix=rng.uniform(0.5, 2.0)
        )
        pair = WeightedPair(
            d_logp_policy=rng.uniform(-3, 3),
            d_logp_ref=rng.uniform(-3, 3),
            d_reward=rng.uniform(-3, 3),
            weight=rng.uniform(0.05, 1.0),
        )
        g_logp, g_reward = pairwise_grad(pair, params)
        if corrupt:
            g_logp *= 1.0 + 1e-3
        fd_logp = _central(
            lambda v: pairwise_loss(replace(pair, d_logp_policy=v), params),
            pair.d_logp_policy,
        )
        fd_reward = _central(
            lambda v: pairwise_loss(replace(pair, d_reward=v), params), pair.d_reward
        )
        worst = max(worst, relative_error(g_logp, fd_logp), relative_error(g_reward, fd_reward))
    return worst


def check_listwise(n: int = 1000, seed: int = 1, corrupt: bool = False) -> float:
    """Max relative error of the listwise gradient, perturbing one utility input."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        k = int(rng.integers(2, 6))
        params = ObjectiveParams(
            beta_temp=rng.uniform(1.0, 4.0), gamma_mix=rng.uniform(0.5, 2.0)
        )
        inst = ListwiseInstance(
            logp_policy=tuple(rng.uniform(-3, 0, size=k)),
            logp_ref=tuple(rng.uniform(-3, 0, size=k)),
            rewards=tuple(rng.uniform(-2, 2, size=k)),
            preferred=frozenset({int(rng.integers(0, k))}),
            weight=rng.uniform(0.05, 1.0),
        )
        gz = listwise_grad(inst, params)
        if corrupt:
            gz = [g * (1.0 + 1e-3) for g in gz]
        for i in range(k):
            # utilities are linear in logp_policy with slope beta
            def loss_at(v, i=i):
                lp = list(inst.logp_policy)
                lp[i] = v
                return listwise_loss(replace(inst, logp_policy=tuple(lp)), params)

            fd = _central(loss_at, inst.logp_policy[i]) / params.beta_temp
            worst = max(worst, relative_error(gz[i], fd))
    return worst


def check_calibrator(n: int = 200, seed: int = 2, corrupt: bool = False) -> float:
    """Max relative error of the calibrator-likelihood gradient on random batches."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        beta_temp = rng.uniform(1.0, 4.0)
        gamma_mix = rng.uniform(0.5, 2.0)
        reward = RewardParams(a=rng.uniform(0.4, 0.7), lambda_u=rng.uniform(0.1, 1.0))
        phi = CalibratorParams(
            gamma_sem=rng.uniform(0.2, 2.0),
            b_sem=rng.uniform(-1, 1),
            gamma_topo=rng.uniform(0.2, 2.0),
            b_topo=rng.uniform(-1, 1),
        )
        batch = [
            CalibratorPair(
                d_s_sem=rng.uniform(-2, 2),
                d_s_topo=rng.uniform(-2, 2),
                d_u=rng.uniform(-1, 1),
                d_logp_policy=rng.uniform(-2, 2),
                d_logp_ref=rng.uniform(-2, 2),
                weight=rng.uniform(0.05, 1.0),
            )
            for _ in range(int(rng.integers(1, 8)))
        ]
        grad = calibrator_gradient(batch, phi, reward, beta_temp, gamma_mix)
        values = {
            "gamma_sem": grad.gamma_sem,
            "b_sem": grad.b_sem,
            "gamma_topo": grad.gamma_topo,
            "b_topo": grad.b_topo,
        }
        if corrupt:
            values["gamma_sem"] *= 1.0 + 1e-3
        for name, analytic in values.items():
            fd = _central(
                lambda v, name=name: calibrator_loss(
                    batch, replace(phi, **{name: v}), reward, beta_temp, gamma_mix
                ),
                getattr(phi, name),
            )
            worst = max(worst, relative_error(analytic, fd))
    return worst


@dataclass(frozen=True)
class GradCheckReport:
    pairwise: float
    listwise: float
    calibrator: float
    tolerance: float = REL_TOL

    @property
    def passed(self) -> bool:
        return bool(max(self.pairwise, self.listwise, self.calibrator) <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "checks": {
                "pairwise_loss_gradient": self.pairwise,
                "listwise_loss_gradient": self.listwise,
                "calibrator_likelihood_gradient": self.calibrator,
            },
            "max_relative_error": max(self.pairwise, self.listwise, self.calibrator),
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def run_all(n: int = 1000, seed: int = 0, corrupt: bool = False) -> GradCheckReport:
    return GradCheckReport(
        pairwise=check_pairwise(n, seed, corrupt),
        listwise=check_listwise(n, seed + 1, corrupt),
        calibrator=check_calibrator(n, seed + 2, corrupt),
    )
