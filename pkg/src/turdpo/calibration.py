"""Calibration metrics: ECE, Brier score, reliability bins, temperature scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class CalibrationError(ValueError):
    """Invalid calibration input."""


@dataclass(frozen=True)
class CalibrationConfig:
    num_bins: int = 10
    edges: tuple[float, ...] | None = None  # custom bin edges override num_bins

    def __post_init__(self):
        if self.edges is None and self.num_bins < 2:
            raise CalibrationError("num_bins must be >= 2")

    def bin_edges(self) -> np.ndarray:
        if self.edges is not None:
            return np.asarray(self.edges, dtype=float)
        return np.linspace(0.0, 1.0, self.num_bins + 1)


@dataclass(frozen=True)
class TemperatureScaler:
    temperature: float

    def __post_init__(self):
        if self.temperature <= 0:
            raise CalibrationError("temperature must be positive")

    def calibrate(self, logits: Sequence[float]) -> np.ndarray:
        return _sigmoid(np.asarray(logits, dtype=float) / self.temperature)


def _check_inputs(probs: Sequence[float], labels: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.shape != y.shape:
        raise CalibrationError(f"length mismatch: {p.shape} vs {y.shape}")
    if p.size == 0:
        raise CalibrationError("empty input")
    return p, y


def _bin_index(p: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # half-open bins [e0, e1), ..., last bin closed so 1.0 lands in it
    idx = np.searchsorted(edges, p, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


@dataclass(frozen=True)
class ReliabilityBin:
    lower: float
    upper: float
    count: int
    mean_confidence: float
    accuracy: float
    gap: float


def reliability_bins(
    probs: Sequence[float], labels: Sequence[float], cfg: CalibrationConfig = CalibrationConfig()
) -> list[ReliabilityBin]:
    """Per-bin confidence/accuracy table; empty bins report zero gap."""
    p, y = _check_inputs(probs, labels)
    edges = cfg.bin_edges()
    idx = _bin_index(p, edges)
    bins = []
    for m in range(len(edges) - 1):
        mask = idx == m
        count = int(mask.sum())
        if count == 0:
            bins.append(ReliabilityBin(float(edges[m]), float(edges[m + 1]), 0, 0.0, 0.0, 0.0))
            continue
        conf = float(p[mask].mean())
        acc = float(y[mask].mean())
        bins.append(
            ReliabilityBin(float(edges[m]), float(edges[m + 1]), count, conf, acc, abs(conf - acc))
        )
    return bins


def ece(
    probs: Sequence[float], labels: Sequence[float], cfg: CalibrationConfig = CalibrationConfig()
) -> float:
    """Expected calibration error: count-weighted mean absolute bin gap."""
    p, _ = _check_inputs(probs, labels)
    bins = reliability_bins(probs, labels, cfg)
    n = p.size
    return sum(b.count / n * b.gap for b in bins)


def brier(probs: Sequence[float], labels: Sequence[float]) -> float:
    """Mean squared error between probabilities and binary outcomes."""
    p, y = _check_inputs(probs, labels)
    return float(np.mean((p - y) ** 2))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def nll(logits: Sequence[float], labels: Sequence[float], temperature: float = 1.0) -> float:
    """Binary negative log-likelihood of sigmoid(logit / T)."""
    z = np.asarray(logits, dtype=float) / temperature
    y = np.asarray(labels, dtype=float)
    # log sigma(z) = -softplus(-z); log(1 - sigma(z)) = -softplus(z)
    softplus = np.logaddexp(0.0, z)
    return float(np.sum(y * (softplus - z) + (1.0 - y) * softplus))


def fit_temperature(
    logits: Sequence[float], labels: Sequence[float], tol: float = 1e-6
) -> TemperatureScaler:
    """Fit a scalar temperature by NLL minimization.

    Golden-section search on log T over [-4, 4]; the NLL is convex in 1/T
    so the bracketed minimizer is unique.
    """
    z, y = _check_inputs(logits, labels)
    classes = set(np.unique(y))
    if not classes == {0.0, 1.0}:
        raise CalibrationError("need both label classes present to fit a temperature")

    def objective(log_t: float) -> float:
        return nll(z, y, math.exp(log_t))

    lo, hi = -4.0, 4.0
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = objective(d)
    log_t = 0.5 * (a + b)
    fitted = math.exp(log_t)
    # the optimizer must never lose to the T=1 incumbent
    if nll(z, y, 1.0) < objective(log_t):
        fitted = 1.0
    return TemperatureScaler(fitted)


def calibration_report(
    probs: Sequence[float],
    labels: Sequence[float],
    logits: Sequence[float] | None = None,
    cfg: CalibrationConfig = CalibrationConfig(),
) -> dict:
    """JSON-ready summary: ece, brier, bins, and fitted temperature if possible."""
    bins = reliability_bins(probs, labels, cfg)
    report = {
        "ece": ece(probs, labels, cfg),
        "brier": brier(probs, labels),
        "bins": [
            {
                "lower": b.lower,
                "upper": b.upper,
                "count": b.count,
                "mean_confidence": b.mean_confidence,
                "accuracy": b.accuracy,
                "gap": b.gap,
            }
            for b in bins
        ],
        "temperature": None,
    }
    if logits is not None:
        scaler = fit_temperature(logits, labels)
        report["temperature"] = scaler.temperature
        report["nll_raw"] = nll(logits, labels, 1.0)
        report["nll_calibrated"] = nll(logits, labels, scaler.temperature)
    return report
