"""Collaboration-network knowledge measures and panel IV estimation.

The package builds inventor collaboration graphs from patent
microdata, computes per-inventor productivity and knowledge-exchange
measures, instruments the focal measure with averages over exact-
distance collaboration shells, and estimates the output elasticity on
a two-period panel with cluster-robust two-stage least squares.  A
synthetic-economy generator with known coefficients closes the loop
for end-to-end validation, and a rewiring ensemble contrasts the
estimated network effect with draws that preserve each inventor's
per-firm collaborator counts.
"""

from .errors import ConfigError, DataError, EstimationError, KnowexError
from .bfmodel import (
    BfParams,
    KnowledgeState,
    RotationResult,
    isolated_output,
    pair_output,
    rotation_schedule,
    simulate_rotation,
    steady_state_share,
    steady_state_size,
)
from .graph import (
    CollaborationGraph,
    hop_frontiers,
    hop_table_rows,
    scope_bitsets,
    shell_overlap_profile,
    shell_value_means,
)
from .measures import (
    FirmCovariates,
    MeasureTable,
    QualityStats,
    ScopeTable,
    build_vocab,
    category_at_level,
    cumulative_breadth,
    firm_covariates,
    novelty_values,
    period_measures,
    quality_values,
    scope_table,
)
from .geo import (
    PointIndex,
    UrbanAreas,
    assign_urban_area,
    delineate_urban_areas,
    great_circle,
    local_activity,
    local_inventors,
    local_rnd,
)
from .estimator import (
    DecompositionResult,
    FirstStage,
    FitResult,
    decompose_fit,
    effective_f,
    first_difference,
    mop_critical_value,
    ols_fit,
    tsls_fit,
    within_transform,
)
from .simulate import SimConfig, SyntheticEconomy, TruthTable, export_economy, generate
from .counterfactual import RewireConstraint, RewireResult, build_constraints, run_ensemble

__version__ = "0.1.0"

__all__ = [
    "BfParams",
    "CollaborationGraph",
    "ConfigError",
    "DataError",
    "DecompositionResult",
    "EstimationError",
    "FirmCovariates",
    "FirstStage",
    "FitResult",
    "KnowexError",
    "KnowledgeState",
    "MeasureTable",
    "PointIndex",
    "QualityStats",
    "RewireConstraint",
    "RewireResult",
    "RotationResult",
    "ScopeTable",
    "SimConfig",
    "SyntheticEconomy",
    "TruthTable",
    "UrbanAreas",
    "assign_urban_area",
    "build_constraints",
    "build_vocab",
    "category_at_level",
    "cumulative_breadth",
    "decompose_fit",
    "delineate_urban_areas",
    "effective_f",
    "export_economy",
    "firm_covariates",
    "first_difference",
    "generate",
    "great_circle",
    "hop_frontiers",
    "hop_table_rows",
    "isolated_output",
    "local_activity",
    "local_inventors",
    "local_rnd",
    "mop_critical_value",
    "novelty_values",
    "ols_fit",
    "pair_output",
    "period_measures",
    "quality_values",
    "rotation_schedule",
    "scope_bitsets",
    "scope_table",
    "shell_overlap_profile",
    "shell_value_means",
    "simulate_rotation",
    "steady_state_share",
    "steady_state_size",
    "tsls_fit",
    "within_transform",
]
