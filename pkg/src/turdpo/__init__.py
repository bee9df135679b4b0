"""Topology- and uncertainty-aware direct preference optimization toolkit."""

from .graphs import (
    Edge,
    Node,
    PathDistribution,
    ReasoningGraph,
    TopologyFeatures,
    TopologyWeights,
    compute_features,
    contradiction_score,
    cycle_count,
    dangling_count,
    graph_from_dict,
    graph_to_dict,
    normalize_scores,
    path_coverage,
    path_distribution,
    sanitize_graph,
    score_graph,
    topology_score,
)
from .objective import (
    ListwiseInstance,
    ObjectiveParams,
    WeightedPair,
    listwise_grad,
    listwise_loss,
    margin,
    pairwise_grad,
    pairwise_loss,
)
from .policy import (
    EmaParams,
    TabularPolicy,
    TrainConfig,
    TrainPair,
    ema_update,
    gibbs_policy,
    kl_objective,
    train,
    tv_distance,
)
from .reward import (
    CalibratorParams,
    RewardParams,
    SemanticSignals,
    SemanticWeights,
    SignalBundle,
    calibrator_gradient,
    calibrator_step,
    semantic_score,
    shaped_reward,
)
from .uncertainty import (
    PairWeightParams,
    UncertaintyParams,
    aleatoric_uncertainty,
    epistemic_uncertainty,
    pair_weight,
    total_uncertainty,
)

__version__ = "0.1.0"
