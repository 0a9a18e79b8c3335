"""Subgraph-level explanations for small graph neural networks.

Search over connected subgraphs with Monte Carlo tree search, score each
candidate with an approximated Shapley value of the model's prediction, and
evaluate explanations with Fidelity / Sparsity.
"""

from .dataio import DatasetRecord, read_dataset, read_ground_truth, write_dataset, write_ground_truth
from .datagen import MotifSpec, gen_ba, gen_ba2motifs, gen_bashape
from .errors import (
    CapacityError,
    ContractViolationError,
    DatasetFormatError,
    InputError,
    SubgraphXError,
    TrainingDivergedError,
    WeightFormatError,
)
from .graph import (
    Graph,
    PruneStrategy,
    connected_components,
    induced_degree_order,
    l_hop_neighbors,
    nodeset,
    prune_actions,
)
from .mcts import (
    Explanation,
    ScorerConfig,
    SearchConfig,
    brute_force_best,
    connected_subgraphs,
    run_search,
    select_action,
    update_path,
)
from .metrics import (
    EvalRecord,
    curve_to_csv,
    fidelity,
    motif_recall,
    sparsity,
    sparsity_fidelity_curve,
)
from .model import (
    GCNLayer,
    GINLayer,
    ModelSpec,
    Prediction,
    forward,
    normalize_adjacency,
    softmax,
)
from .shapley import (
    CoalitionGame,
    ScoreEstimate,
    ValueOracle,
    build_reduced_game,
    direct_score,
    exact_shapley,
    exact_shapley_value,
    marginal_contribution,
    mc_shapley,
    mc_shapley_value,
    shapley_values,
    value_function,
)
from .training import evaluate_accuracy, init_model, predict_batch, train
from .weights import load_weights, save_weights

__version__ = "0.1.0"
