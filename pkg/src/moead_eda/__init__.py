"""Decomposition-based multi-objective optimization with model-based variation."""

from .config import ConfigError, RunConfig, validate_config
from .core import (
    ExternalArchive,
    MetricsRecord,
    RunResult,
    RunState,
    StructureLog,
    build_neighborhoods,
    generate_weight_vectors,
    run,
    scalarize,
    tchebycheff,
    update_population,
    update_reference_point,
    weighted_sum,
)
from .metrics import count_matched_points, igd, nondominated_filter
from .problems import BiTrapProblem, ParetoFront, dominates, inv_trap5_block, make_problem, trap5_block
from .runner import BatchSummary, RunOutcome, aggregate_structure, parse_config, run_batch
from .variation import (
    OperatorConfig,
    TreeModel,
    UnivariateModel,
    diversity_preserving_sample,
    ga_variation,
    learn_tree,
    learn_univariate,
    make_operator,
    max_weight_spanning_forest,
    mutual_information_matrix,
    pbil_update,
    sample_tree,
    sample_univariate,
)

__version__ = "0.1.0"
