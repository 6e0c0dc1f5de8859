"""Procedural 2x2 matrix games, behavioral choice models, and a structural
game-complexity index.

Submodules:
    games       payoff matrices, permutation symmetries, ordinal topology
    solvers     pure/mixed equilibria, dominance, best-response dynamics
    behavioral  level-k quantal response, QRE, belief noise, CARA risk
    fitting     parameter estimation, metrics, completeness, cross-validation
    neural      from-scratch MLP, training loop, neural-augmented models
    complexity  structural game features, LASSO, regression trees, the index
    dataio      game generation, trial CSV ingestion, synthetic participants
    cli         command-line pipelines
    kernels     numeric backends (compiled extension or numpy fallback)
"""

__version__ = "0.1.0"

from .games import (
    GameMatrix,
    Permutation,
    Topology,
    OrderGraph,
    apply_permutation,
    classify_topology,
    transpose_perspective,
)
from .behavioral import ModelParams, ModelSpec, parse_model_string, predict

__all__ = [
    "GameMatrix",
    "Permutation",
    "Topology",
    "OrderGraph",
    "apply_permutation",
    "classify_topology",
    "transpose_perspective",
    "ModelParams",
    "ModelSpec",
    "parse_model_string",
    "predict",
    "__version__",
]
