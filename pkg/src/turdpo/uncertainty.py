"""Epistemic/aleatoric uncertainty and the per-pair loss weight.

Epistemic uncertainty measures dispersion across K re-elicited graphs for
the same response (topology-score variance plus generalized Jensen-Shannon
divergence of their path distributions). Aleatoric uncertainty is the mean
smoothed binary entropy of node correctness probabilities. The combined
uncertainty of a preference pair maps to a clipped loss weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .graphs import (
    PathDistribution,
    ReasoningGraph,
    TopologyWeights,
    path_distribution,
    score_graph,
)


@dataclass(frozen=True)
class UncertaintyParams:
    lambda_epi: float = 1.0
    lambda_ale: float = 1.0
    tau_smooth: float = 0.05
    k_samples: int = 3

    def __post_init__(self):
        if self.lambda_epi < 0 or self.lambda_ale < 0:
            raise ValueError("lambda_epi and lambda_ale must be nonnegative")
        if not 0.0 <= self.tau_smooth < 0.5:
            raise ValueError("tau_smooth must lie in [0, 0.5)")
        if self.k_samples < 1:
            raise ValueError("k_samples must be >= 1")


@dataclass(frozen=True)
class PairWeightParams:
    tau_w: float = 1.2
    w_min: float = 0.05

    def __post_init__(self):
        if self.tau_w <= 0:
            raise ValueError("tau_w must be positive")
        if not 0.0 < self.w_min <= 1.0:
            raise ValueError("w_min must lie in (0, 1]")


def _entropy(probs: Iterable[float]) -> float:
    return -sum(p * math.log(p) for p in probs if p > 0.0)


def jensen_shannon_divergence(distributions: Sequence[PathDistribution]) -> float:
    """Generalized JSD (natural log): H(mean) minus mean entropy.

    Distributions are aligned on the union support of canonical edge keys;
    absent keys contribute probability zero.
    """
    if not distributions:
        raise ValueError("need at least one distribution")
    k = len(distributions)
    support = sorted(set().union(*(d.support() for d in distributions)))
    if not support:
        return 0.0
    rows = [[d.probs.get(key, 0.0) for key in support] for d in distributions]
    mixture = [sum(row[i] for row in rows) / k for i in range(len(support))]
    mean_entropy = sum(_entropy(row) for row in rows) / k
    return max(0.0, _entropy(mixture) - mean_entropy)


def epistemic_uncertainty(
    samples: Sequence[ReasoningGraph], weights: TopologyWeights
) -> float:
    """Score variance plus path-distribution JSD across re-elicited graphs."""
    if not samples:
        raise ValueError("need at least one graph sample")
    scores = [score_graph(g, weights) for g in samples]
    n = len(scores)
    mean = sum(scores) / n
    variance = sum((s - mean) ** 2 for s in scores) / n
    jsd = jensen_shannon_divergence([path_distribution(g) for g in samples])
    return variance + jsd


def aleatoric_uncertainty(g: ReasoningGraph, tau: float = 0.05) -> float:
    """Mean smoothed binary entropy of node correctness probabilities."""
    if not g.nodes:
        raise ValueError("aleatoric uncertainty undefined for an empty node set")
    if not 0.0 <= tau < 0.5:
        raise ValueError("tau must lie in [0, 0.5)")
    total = 0.0
    for node in g.nodes:
        p = (node.p_v + tau) / (1.0 + 2.0 * tau)
        total += _entropy([p, 1.0 - p])
    return total / len(g.nodes)


def total_uncertainty(u_epi: float, u_ale: float, params: UncertaintyParams) -> float:
    """Weighted combination of the two uncertainty components."""
    if u_epi < 0 or u_ale < 0:
        raise ValueError("uncertainty components must be nonnegative")
    return params.lambda_epi * u_epi + params.lambda_ale * u_ale


def pair_weight(u_plus: float, u_minus: float, params: PairWeightParams) -> float:
    """Map mean pair uncertainty to a loss weight in [w_min, 1]."""
    if u_plus < 0 or u_minus < 0:
        raise ValueError("uncertainties must be nonnegative")
    u_bar = 0.5 * (u_plus + u_minus)
    raw = params.tau_w / (1.0 + u_bar)
    return min(1.0, max(params.w_min, raw))


def candidate_uncertainty(
    samples: Sequence[ReasoningGraph],
    topo_weights: TopologyWeights,
    params: UncertaintyParams,
) -> float:
    """Total uncertainty of a candidate from its K graph samples.

    Aleatoric entropy is averaged over the samples; epistemic dispersion
    is computed across them.
    """
    u_epi = epistemic_uncertainty(samples, topo_weights)
    u_ale = sum(aleatoric_uncertainty(g, params.tau_smooth) for g in samples) / len(samples)
    return total_uncertainty(u_epi, u_ale, params)
