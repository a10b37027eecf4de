"""Persistent ("self-like") vs plastic subnetworks across chains of policy checkpoints."""

__version__ = "0.1.0"

from .traces import (  # noqa: E402
    ActivationTrace,
    MlpWeights,
    NormalizedTrace,
    ReferenceSet,
    mlp_forward_collect,
    sample_reference_states,
    zscore_normalize,
)
from .fileio import read_trace, write_trace  # noqa: E402
from .coactivation import (  # noqa: E402
    DEFAULT_TAU,
    DEFAULT_TAU_GRID,
    block_layout,
    coactivation_matrix,
    connected_components,
    rcm_order,
    threshold_graph,
)
from .matching import build_families, cross_similarity, hungarian_match  # noqa: E402
from .persistence import aggregate_by_subnetwork, persistence_scores  # noqa: E402
from .stats import log10_normal_tail, summarize_deltas, tau_sweep, transition_delta  # noqa: E402
from .chain import analyze_chain  # noqa: E402
