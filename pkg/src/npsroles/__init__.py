"""Role extraction in directed graphs via Neighbourhood Pattern Similarity."""

from .sbm import (
    Assignment,
    Digraph,
    RoleModel,
    cycle_model,
    expected_adjacency,
    ideal_adjacency,
    sample_adjacency,
    shuffle_nodes,
)
from .nps import (
    BetaPolicy,
    SimilarityState,
    choose_beta,
    expected_similarity,
    gamma_apply,
    gamma_norm,
    similarity_limit,
    similarity_limit_oracle,
    similarity_recurrence,
)
from .spectral import (
    SpectralReport,
    algorithm1_subspace,
    estimate_rank,
    principal_angle_sines,
    truncated_evd,
)
from .clustering import extract_roles, kmeans, misclassification

__version__ = "0.1.0"
