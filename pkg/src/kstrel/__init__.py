"""Two-terminal network reliability with lifetime-distributed components.

Estimators: exact survival-signature enumeration, spanning-tree Monte Carlo
(MC-KST), and an active-learning variant (AL-KST) whose classifier can be
reused on component-deleted networks without new labeling.
"""

from .forest import Forest, TrainingSet, train
from .kst import (
    DisconnectedGraph,
    StateChain,
    build_chain,
    chain_arrays,
    k_lifetime,
    max_spanning_tree,
    prune_to_terminals,
)
from .learner import (
    LearnerConfig,
    LearnerState,
    predict_variant,
    run_al_kst,
    run_rf_kst,
)
from .lifetimes import (
    LifetimeDistribution,
    SamplePool,
    node_to_edge,
    sample_pool,
)
from .net_model import (
    FailureMode,
    InvalidRemoval,
    Mask,
    Network,
    ValidationReport,
    VariantDisconnected,
    combination_of,
    derive_variant,
    terminals_connected,
    validate,
)
from .signature import (
    ExactIntractable,
    ReliabilityCurve,
    SignatureTable,
    accumulate,
    combination_probability,
    default_grid,
    exact_signature,
    relative_error,
    reliability,
)

__version__ = "0.1.0"

__all__ = [
    "DisconnectedGraph",
    "ExactIntractable",
    "FailureMode",
    "Forest",
    "InvalidRemoval",
    "LearnerConfig",
    "LearnerState",
    "LifetimeDistribution",
    "Mask",
    "Network",
    "ReliabilityCurve",
    "SamplePool",
    "SignatureTable",
    "StateChain",
    "TrainingSet",
    "ValidationReport",
    "VariantDisconnected",
    "accumulate",
    "build_chain",
    "chain_arrays",
    "combination_of",
    "combination_probability",
    "default_grid",
    "derive_variant",
    "exact_signature",
    "k_lifetime",
    "max_spanning_tree",
    "node_to_edge",
    "predict_variant",
    "prune_to_terminals",
    "relative_error",
    "reliability",
    "run_al_kst",
    "run_rf_kst",
    "sample_pool",
    "terminals_connected",
    "train",
    "validate",
]
