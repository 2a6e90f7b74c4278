"""Block models for collections of interconnected networks.

Nodes come in pre-specified groups; each declared group pair carries one
interaction matrix (binary, count or real-valued), and every group is
partitioned into latent blocks shared across all the matrices it touches.
The package provides variational-EM inference at fixed block counts, ICL
model selection by stepwise split/merge search, a simulator with benchmark
presets, recovery metrics, an exhaustive-enumeration oracle for verification,
and a command-line interface.
"""

__version__ = "0.1.0"

from .criteria import IclReport, complete_log_likelihood, icl, penalty
from .emissions import BlockPairParameter, EmissionFamily, log_density, mstep_parameter
from .errors import BudgetError, ConfigError, MbmError, ValidationError
from .metrics import adjusted_rand_index, align_labels, recovery_report
from .network import (
    FunctionalGroup,
    InteractionSpec,
    MultipartiteNetwork,
    ObservationMatrix,
    block_pair_index_set,
    dyad_count,
    load_network,
    save_network,
)
from .oracle import exact_log_likelihood, exact_posterior_marginals
from .search import SearchConfig, SearchTrace, independent_start, merge_candidates, search, split_candidates
from .simulate import GeneratorSpec, sample, scenario1, scenario2
from .vem import (
    FitResult,
    MbmParameters,
    VariationalAssignment,
    elbo,
    fit,
    init_from_clustering,
    m_step,
    ve_step,
)

__all__ = [
    "BlockPairParameter",
    "BudgetError",
    "ConfigError",
    "EmissionFamily",
    "FitResult",
    "FunctionalGroup",
    "GeneratorSpec",
    "IclReport",
    "InteractionSpec",
    "MbmError",
    "MbmParameters",
    "MultipartiteNetwork",
    "ObservationMatrix",
    "SearchConfig",
    "SearchTrace",
    "ValidationError",
    "VariationalAssignment",
    "adjusted_rand_index",
    "align_labels",
    "block_pair_index_set",
    "complete_log_likelihood",
    "dyad_count",
    "elbo",
    "exact_log_likelihood",
    "exact_posterior_marginals",
    "fit",
    "icl",
    "independent_start",
    "init_from_clustering",
    "load_network",
    "log_density",
    "m_step",
    "merge_candidates",
    "mstep_parameter",
    "penalty",
    "recovery_report",
    "sample",
    "save_network",
    "scenario1",
    "scenario2",
    "search",
    "split_candidates",
    "ve_step",
]
