"""Dataset records, validation, and run configuration.

Preference data is JSON Lines, one pair per line: a prompt id plus winner
and loser candidates, each carrying semantic signals and K serialized
graph samples. Configuration is a single JSON document overriding the
named hyperparameter defaults.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

from .graphs import (
    GraphError,
    ReasoningGraph,
    TopologyWeights,
    graph_from_dict,
    graph_to_dict,
    score_graph,
)
from .objective import ObjectiveParams
from .policy import EmaParams, TrainConfig, TrainPair
from .reward import (
    CalibratorParams,
    RewardParams,
    SemanticSignals,
    SemanticWeights,
    SignalBundle,
    semantic_score,
    shaped_reward,
)
from .uncertainty import (
    PairWeightParams,
    UncertaintyParams,
    candidate_uncertainty,
    pair_weight,
)

logger = logging.getLogger(__name__)

MAX_GRAPH_NODES = 16


class DatasetError(ValueError):
    """Dataset parse or validation failure with location context."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if path:
            loc.append(path)
        prefix = f"[{', '.join(loc)}] " if loc else ""
        super().__init__(prefix + message)
        self.line = line
        self.path = path


@dataclass(frozen=True)
class CandidateRecord:
    response_id: str
    signals: SemanticSignals
    graphs: tuple[ReasoningGraph, ...]


@dataclass(frozen=True)
class PairRecord:
    prompt_id: str
    winner: CandidateRecord
    loser: CandidateRecord
    judge_confidence: float | None = None


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    beta: float = 2.0
    gamma: float = 1.0
    a: float = 0.6
    lambda_u: float = 0.5
    tau_w: float = 1.2
    w_min: float = 0.05
    k_samples: int = 3
    tau_smooth: float = 0.05
    lambda_epi: float = 1.0
    lambda_ale: float = 1.0
    rho: float = 0.995
    ref_mode: str = "fixed"
    num_bins: int = 10
    alpha: tuple[float, float, float, float] = (1.0, 0.5, 0.5, 1.0)
    beta_sem: tuple[float, float, float] = (1.0, 1.0, 1.0)
    learning_rate: float = 0.1
    steps: int = 200
    seed: int = 0
    loss_mode: str = "pairwise"
    batch_size: int | None = None
    calibrator_lr: float = 0.0
    grad_clip: float = 10.0

    RANGE_HINTS = {
        "beta": (1.0, 4.0),
        "gamma": (0.5, 2.0),
        "a": (0.4, 0.7),
        "lambda_u": (0.1, 1.0),
        "tau_w": (0.5, 2.0),
    }

    def __post_init__(self):
        for name, (lo, hi) in self.RANGE_HINTS.items():
            v = getattr(self, name)
            if not lo <= v <= hi:
                warnings.warn(
                    f"config {name}={v} outside the recommended range [{lo}, {hi}]",
                    stacklevel=2,
                )

    def topology_weights(self) -> TopologyWeights:
        return TopologyWeights(*self.alpha)

    def semantic_weights(self) -> SemanticWeights:
        return SemanticWeights(*self.beta_sem)

    def uncertainty_params(self) -> UncertaintyParams:
        return UncertaintyParams(
            lambda_epi=self.lambda_epi,
            lambda_ale=self.lambda_ale,
            tau_smooth=self.tau_smooth,
            k_samples=self.k_samples,
        )

    def weight_params(self) -> PairWeightParams:
        return PairWeightParams(tau_w=self.tau_w, w_min=self.w_min)

    def reward_params(self) -> RewardParams:
        return RewardParams(a=self.a, lambda_u=self.lambda_u)

    def objective_params(self) -> ObjectiveParams:
        return ObjectiveParams(beta_temp=self.beta, gamma_mix=self.gamma)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            steps=self.steps,
            seed=self.seed,
            loss_mode=self.loss_mode,
            batch_size=self.batch_size,
            objective=self.objective_params(),
            ema=EmaParams(rho=self.rho, mode=self.ref_mode),
            reward=self.reward_params(),
            calibrator_lr=self.calibrator_lr,
            grad_clip=self.grad_clip,
        )


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise DatasetError("config must be a JSON object")
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise DatasetError(f"unknown config keys: {sorted(unknown)}")
    for key in ("alpha", "beta_sem"):
        if key in data:
            data[key] = tuple(data[key])
    return RunConfig(**data)


# ---------------------------------------------------------------------------
# parsing and serialization


def _parse_candidate(obj: dict, k_expected: int, line: int, path: str) -> CandidateRecord:
    if not isinstance(obj, dict):
        raise DatasetError("candidate must be an object", line, path)
    for key in ("response_id", "signals", "graphs"):
        if key not in obj:
            raise DatasetError(f"missing field {key!r}", line, path)
    sig = obj["signals"]
    try:
        signals = SemanticSignals(
            q_fact=float(sig["q_fact"]),
            q_task=float(sig["q_task"]),
            q_hall=float(sig["q_hall"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"bad semantic signals: {exc}", line, f"{path}.signals") from exc
    graphs = []
    for i, gobj in enumerate(obj["graphs"]):
        gpath = f"{path}.graphs[{i}]"
        try:
            g = graph_from_dict(gobj)
        except GraphError as exc:
            raise DatasetError(str(exc), line, gpath) from exc
        if not 1 <= len(g.nodes) <= MAX_GRAPH_NODES:
            raise DatasetError(
                f"graph has {len(g.nodes)} nodes, outside [1, {MAX_GRAPH_NODES}]", line, gpath
            )
        if not 3 <= len(g.nodes) <= 6:
            logger.warning("%s: graph has %d nodes, outside the typical 3-6", gpath, len(g.nodes))
        graphs.append(g)
    if len(graphs) != k_expected:
        raise DatasetError(
            f"candidate {obj['response_id']!r} has {len(graphs)} graph samples, "
            f"config expects K={k_expected}",
            line,
            f"{path}.graphs",
        )
    return CandidateRecord(str(obj["response_id"]), signals, tuple(graphs))


def parse_record(obj: dict, k_expected: int, line: int = 0) -> PairRecord:
    if not isinstance(obj, dict):
        raise DatasetError("record must be a JSON object", line)
    for key in ("prompt_id", "winner", "loser"):
        if key not in obj:
            raise DatasetError(f"missing field {key!r}", line)
    winner = _parse_candidate(obj["winner"], k_expected, line, "winner")
    loser = _parse_candidate(obj["loser"], k_expected, line, "loser")
    if winner.response_id == loser.response_id:
        raise DatasetError("winner and loser must differ", line, "loser.response_id")
    conf = obj.get("judge_confidence")
    return PairRecord(
        prompt_id=str(obj["prompt_id"]),
        winner=winner,
        loser=loser,
        judge_confidence=float(conf) if conf is not None else None,
    )


def parse_dataset(path: str | Path, k_expected: int = 3) -> list[PairRecord]:
    """Parse a JSON Lines preference dataset with line-precise diagnostics."""
    records = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"malformed JSON: {exc.msg}", lineno) from exc
            records.append(parse_record(obj, k_expected, lineno))
    return records


def candidate_to_dict(cand: CandidateRecord) -> dict:
    return {
        "response_id": cand.response_id,
        "signals": {
            "q_fact": cand.signals.q_fact,
            "q_task": cand.signals.q_task,
            "q_hall": cand.signals.q_hall,
        },
        "graphs": [graph_to_dict(g) for g in cand.graphs],
    }


def record_to_dict(record: PairRecord) -> dict:
    out = {
        "prompt_id": record.prompt_id,
        "winner": candidate_to_dict(record.winner),
        "loser": candidate_to_dict(record.loser),
    }
    if record.judge_confidence is not None:
        out["judge_confidence"] = record.judge_confidence
    return out


def write_dataset(path: str | Path, records: Sequence[PairRecord]) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# signal preparation


@dataclass(frozen=True)
class CandidateSignals:
    s_sem: float
    s_topo: float
    u: float


def candidate_signals(cand: CandidateRecord, cfg: RunConfig) -> CandidateSignals:
    topo_w = cfg.topology_weights()
    s_sem = semantic_score(cand.signals, cfg.semantic_weights())
    s_topo = sum(score_graph(g, topo_w) for g in cand.graphs) / len(cand.graphs)
    u = candidate_uncertainty(cand.graphs, topo_w, cfg.uncertainty_params())
    return CandidateSignals(s_sem=s_sem, s_topo=s_topo, u=u)


def score_record(
    record: PairRecord, cfg: RunConfig, phi: CalibratorParams = CalibratorParams()
) -> dict:
    """Per-pair score row: side signals, pair weight, and reward delta."""
    win = candidate_signals(record.winner, cfg)
    lose = candidate_signals(record.loser, cfg)
    w = pair_weight(win.u, lose.u, cfg.weight_params())
    rp = cfg.reward_params()
    r_w = shaped_reward(SignalBundle(win.s_sem, win.s_topo, win.u), phi, rp)
    r_l = shaped_reward(SignalBundle(lose.s_sem, lose.s_topo, lose.u), phi, rp)
    return {
        "prompt_id": record.prompt_id,
        "winner_id": record.winner.response_id,
        "loser_id": record.loser.response_id,
        "s_sem_winner": win.s_sem,
        "s_sem_loser": lose.s_sem,
        "s_topo_winner": win.s_topo,
        "s_topo_loser": lose.s_topo,
        "u_winner": win.u,
        "u_loser": lose.u,
        "weight": w,
        "d_reward": r_w - r_l,
    }


def prepare_pairs(records: Sequence[PairRecord], cfg: RunConfig) -> list[TrainPair]:
    pairs = []
    for record in records:
        win = candidate_signals(record.winner, cfg)
        lose = candidate_signals(record.loser, cfg)
        pairs.append(
            TrainPair(
                prompt=record.prompt_id,
                winner=record.winner.response_id,
                loser=record.loser.response_id,
                s_sem_w=win.s_sem,
                s_topo_w=win.s_topo,
                u_w=win.u,
                s_sem_l=lose.s_sem,
                s_topo_l=lose.s_topo,
                u_l=lose.u,
                weight=pair_weight(win.u, lose.u, cfg.weight_params()),
            )
        )
    return pairs
