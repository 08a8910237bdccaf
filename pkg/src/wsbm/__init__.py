"""Bayesian weighted stochastic block models for dense weighted networks.

Fits a fixed-K block model or a truncated-Dirichlet-process variant
that infers the number of communities, with the full preprocessing
pipeline from compositional abundance tables to edge weights, posterior
consensus across parallel chains, planted-partition simulation, and
clustering-accuracy metrics.
"""

from .blocks import (
    BlockParameters,
    BlockStats,
    CommunityAssignment,
    NIGPrior,
    PosteriorNIG,
    block_loglik,
    block_stats,
    merge_stats,
    posterior_nig,
)
from .errors import ConfigError, EmptyNetworkError, InputError, NumericalError
from .finite import FiniteMixtureWeights, run_wsbm, sample_tau, sample_z_finite
from .gibbs import ChainConfig, ChainTrace, assignment_probs, chain_seed, make_rng, sample_theta
from .infinite import StickBreakingWeights, count_k, run_wsibm, sample_sticks, sample_z_infinite
from .metrics import ari, nmi
from .preprocess import (
    CorrelationMatrix,
    PreprocessConfig,
    RelativeAbundanceMatrix,
    TransformedAbundanceMatrix,
    WeightMatrix,
    build_weight_matrix,
    filter_prevalence,
    fisher_transform,
    inverse_fisher,
    mclr_transform,
    rank_correlation,
)
from .simulate import PlantedNetwork, SimulationSpec, preset_spec, simulate_network
from .summarize import (
    CommunitySummary,
    PosteriorPairwiseMatrix,
    accumulate_ppm,
    canonical_relabel,
    consensus_ppm,
    estimate_map,
    estimate_z_ppm,
    merge_ppm,
    nodal_strength,
    summarize_blocks,
)

__version__ = "0.1.0"
