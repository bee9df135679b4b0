"""Significance statistics and the label-noise bias experiment.

Contains the paired bootstrap test, Cohen's d, Benjamini-Hochberg FDR
control, and a synthetic study of how the gap between weighted and
unweighted pairwise logit estimators behaves under label flips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class StatsError(ValueError):
    """Invalid statistics input."""


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 10000
    seed: int = 0
    two_sided: bool = True

    def __post_init__(self):
        if self.replicates < 100:
            raise StatsError("replicates must be >= 100")


def paired_bootstrap(
    outcomes_a: Sequence[float],
    outcomes_b: Sequence[float],
    cfg: BootstrapConfig = BootstrapConfig(),
) -> float:
    """Two-sided bootstrap p-value for a paired mean difference.

    Item indices are resampled with replacement against the original item
    order; deterministic given the config seed. Uses the mid-p convention
    (half credit for resampled differences exactly at zero) so null
    p-values stay close to uniform despite the discrete resampling
    distribution.
    """
    a = np.asarray(outcomes_a, dtype=float)
    b = np.asarray(outcomes_b, dtype=float)
    if a.shape != b.shape:
        raise StatsError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise StatsError("empty input")
    d = a - b
    rng = np.random.default_rng(cfg.seed)
    idx = rng.integers(0, d.size, size=(cfg.replicates, d.size))
    means = d[idx].mean(axis=1)
    below = float(np.mean(means < 0.0)) + 0.5 * float(np.mean(means == 0.0))
    above = 1.0 - below
    if cfg.two_sided:
        return min(1.0, 2.0 * min(below, above))
    return above


def cohens_d(x: Sequence[float], y: Sequence[float]) -> float:
    """Standardized mean difference with unbiased pooled variance."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.size < 2 or ya.size < 2:
        raise StatsError("need at least two elements per sample")
    var_x = xa.var(ddof=1)
    var_y = ya.var(ddof=1)
    pooled = ((xa.size - 1) * var_x + (ya.size - 1) * var_y) / (xa.size + ya.size - 2)
    if pooled <= 0:
        raise StatsError("zero pooled variance; effect size undefined")
    return float((xa.mean() - ya.mean()) / math.sqrt(pooled))


def benjamini_hochberg(pvals: Sequence[float], q: float = 0.05) -> list[bool]:
    """Step-up FDR procedure; returns a rejection flag per input p-value."""
    p = np.asarray(pvals, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise StatsError("p-values must lie in [0, 1]")
    if not 0.0 < q < 1.0:
        raise StatsError("q must lie in (0, 1)")
    n = p.size
    order = np.argsort(p, kind="stable")
    threshold_rank = 0
    for rank, i in enumerate(order, start=1):
        if p[i] <= q * rank / n:
            threshold_rank = rank
    flags = np.zeros(n, dtype=bool)
    flags[order[:threshold_rank]] = True
    return flags.tolist()


# ---------------------------------------------------------------------------
# bias-bound experiment


@dataclass(frozen=True)
class NoiseSimConfig:
    flip_rate: float = 0.2
    seeds: int = 20
    dependence: str = "uncertainty-correlated"

    def __post_init__(self):
        if not 0.0 <= self.flip_rate < 0.5:
            raise StatsError("flip rate must lie in [0, 0.5)")
        if self.seeds < 1:
            raise StatsError("need at least one seed")
        if self.dependence not in ("independent", "uncertainty-correlated"):
            raise StatsError(f"unknown dependence mode {self.dependence!r}")


def fit_logit_margin(
    margins: np.ndarray, labels: np.ndarray, weights: np.ndarray | None = None
) -> float:
    """One-dimensional (weighted) logistic MLE: label ~ Bernoulli(sigma(theta * m)).

    Newton's method on the scalar slope; the objective is strictly convex
    whenever the margins are not all zero.
    """
    w = np.ones_like(margins) if weights is None else weights
    theta = 0.0
    for _ in range(50):
        z = theta * margins
        p = 1.0 / (1.0 + np.exp(-z))
        grad = float(np.sum(w * (p - labels) * margins))
        hess = float(np.sum(w * p * (1.0 - p) * margins**2))
        if hess <= 1e-12:
            break
        step = grad / hess
        theta -= step
        if abs(step) < 1e-10:
            break
    return theta


def _simulate_world(
    rng: np.random.Generator, n_pairs: int, flip_rate: float, dependence: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pairs with a true margin, simulated uncertainty, and (possibly flipped) labels."""
    margins = rng.normal(0.0, 1.5, size=n_pairs)
    # hard pairs (small true margin) yield fragile graphs, hence high
    # uncertainty; the scale is chosen so the weight floor actually binds
    uncertainty = 20.0 / (1.0 + np.exp(2.0 * np.abs(margins)))
    clean = (rng.random(n_pairs) < 1.0 / (1.0 + np.exp(-margins))).astype(float)
    if flip_rate > 0:
        if dependence == "independent":
            flip_prob = np.full(n_pairs, flip_rate)
        else:
            flip_prob = np.minimum(1.0, flip_rate * uncertainty / uncertainty.mean())
        flip = rng.random(n_pairs) < flip_prob
    else:
        flip = np.zeros(n_pairs, dtype=bool)
    labels = np.where(flip, 1.0 - clean, clean)
    return margins, uncertainty, labels


@dataclass(frozen=True)
class BiasGridPoint:
    eps: float
    w_min: float
    mean_abs_gap: float
    mean_signed_gap: float
    std_err: float
    fitted_c: float
    seed_count: int


def bias_bound_experiment(
    eps_grid: Sequence[float] = (0.0, 0.1, 0.2),
    w_min_grid: Sequence[float] = (0.05, 0.5, 1.0),
    seeds: int = 20,
    n_pairs: int = 16000,
    tau_w: float = 1.2,
    dependence: str = "uncertainty-correlated",
    base_seed: int = 0,
) -> list[BiasGridPoint]:
    """Estimator gap between weighted and unweighted logistic fits per grid point.

    For each (eps, w_min) the same flipped dataset is reused across w_min
    values so the weight floor is the only varying factor. The fitted
    constant is mean |gap| / ((1 - w_min) * eps) where that product is
    positive, else NaN.
    """
    results = []
    for eps in eps_grid:
        gaps: dict[float, list[float]] = {w: [] for w in w_min_grid}
        for s in range(seeds):
            rng = np.random.default_rng(base_seed + 1000 * s + int(eps * 1e6))
            margins, uncertainty, labels = _simulate_world(rng, n_pairs, eps, dependence)
            theta_plain = fit_logit_margin(margins, labels)
            for w_min in w_min_grid:
                weights = np.clip(tau_w / (1.0 + uncertainty), w_min, 1.0)
                if w_min >= 1.0:
                    theta_w = theta_plain
                else:
                    theta_w = fit_logit_margin(margins, labels, weights)
                gaps[w_min].append(theta_w - theta_plain)
        for w_min in w_min_grid:
            arr = np.asarray(gaps[w_min])
            mean_abs = float(np.abs(arr).mean())
            mean_signed = float(arr.mean())
            std_err = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
            denom = (1.0 - w_min) * eps
            fitted_c = mean_abs / denom if denom > 0 else float("nan")
            results.append(
                BiasGridPoint(
                    eps=eps,
                    w_min=w_min,
                    mean_abs_gap=mean_abs,
                    mean_signed_gap=mean_signed,
                    std_err=std_err,
                    fitted_c=fitted_c,
                    seed_count=seeds,
                )
            )
    return results


def bias_grid_csv(points: Sequence[BiasGridPoint]) -> str:
    lines = ["eps,w_min,gap,fitted_C,seed_count"]
    for p in points:
        lines.append(f"{p.eps},{p.w_min},{p.mean_abs_gap!r},{p.fitted_c!r},{p.seed_count}")
    return "\n".join(lines) + "\n"
