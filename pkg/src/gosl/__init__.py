"""Label-efficient open-set learning on graphs.

An active-learning loop that screens likely out-of-distribution nodes with a
C+1-headed GCN filter, picks diverse informative candidates via K-Medoids
over propagated features, trains a C-class ID classifier, and scores
OOD-ness by prediction entropy.
"""

from .graph import (
    UNKNOWN,
    Graph,
    LabelState,
    NormalizedAdjacency,
    OpenSetSplit,
    build_split,
    init_label_state,
    normalize_adjacency,
)
from .loop import (
    ActiveLoop,
    BudgetPlan,
    ExperimentResult,
    Oracle,
    RoundReport,
    RunSettings,
    SimulatedOracle,
    run_experiment,
    simulated_oracle,
)
from .metrics import EvalResult, auroc, aupr, evaluate, fpr_at_tpr, id_accuracy
from .models import (
    ClassifierModel,
    FilterModel,
    PotentialIdSet,
    TrainConfig,
    hidden_features,
    ood_scores,
    potential_id_nodes,
    train_classifier,
    train_filter,
)
from .selection import (
    QueryBatch,
    SelectionConfig,
    k_medoids,
    pairwise_distances,
    select_lego,
    select_random,
    select_uncertainty,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
