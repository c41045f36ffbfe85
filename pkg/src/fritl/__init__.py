"""Hybrid causal structure learning for linear non-Gaussian data with
latent confounders.

The pipeline runs up to four stages: constraint-based PAG construction
(FCI), residual-independence orientation (FRI), triad-based latent-
confounder detection (FRIT), and local model selection over the remaining
undetermined cliques (FRITL).
"""

from fritl.config import BenchmarkConfig, PipelineConfig
from fritl.graph import (
    ARROW,
    CIRCLE,
    TAIL,
    LatentGroup,
    Mark,
    MixedGraph,
    apply_fci_rules,
    d_separated,
    emit_graph_text,
    maximal_undetermined_cliques,
    parse_graph_text,
)
from fritl.metrics import MetricReport, arrowhead_metrics, latent_pair_metrics
from fritl.pipeline import DiscoveryRun, discover
from fritl.stats import Dataset, TestVerdict, ci_test, independence_test, standardize
from fritl.synth import (
    GeneratorConfig,
    LvLingamModel,
    analytic_covariance,
    generate_model,
    sample_data,
    true_pag,
)

__all__ = [
    "ARROW",
    "CIRCLE",
    "TAIL",
    "BenchmarkConfig",
    "Dataset",
    "DiscoveryRun",
    "GeneratorConfig",
    "LatentGroup",
    "LvLingamModel",
    "Mark",
    "MetricReport",
    "MixedGraph",
    "PipelineConfig",
    "TestVerdict",
    "analytic_covariance",
    "apply_fci_rules",
    "arrowhead_metrics",
    "ci_test",
    "d_separated",
    "discover",
    "emit_graph_text",
    "generate_model",
    "independence_test",
    "latent_pair_metrics",
    "maximal_undetermined_cliques",
    "parse_graph_text",
    "sample_data",
    "standardize",
    "true_pag",
]

__version__ = "0.1.0"
