"""Log-det geometry of matrix-weighted graphs and Langevin sampling on the SPD cone."""
from .errors import DegenerateVariance, InvalidInput, NotPositiveDefinite, StepTooLarge
from .psdgraph import (EdgeWeights, ModelContext, OrientedGraph, PerturbationDirection,
                       block_laplacian, dir_deriv_phi, dirichlet_form, energy_phi,
                       matrix_tree_check, pullback_metric, rank_one_direction,
                       rayleigh_residual)
from .sampler import (ChainTrace, PotentialParams, SamplerConfig, mh_step, potential,
                      riemannian_grad, run_chains)
from .spdgeo import ai_distance, ai_inner, exp_jacobian_log, exp_map, log_map
from .symcore import SpdMatrix, eigh, logdet, solve_spd, sym_func

__version__ = "0.1.0"

__all__ = [
    "ChainTrace",
    "DegenerateVariance",
    "EdgeWeights",
    "InvalidInput",
    "ModelContext",
    "NotPositiveDefinite",
    "OrientedGraph",
    "PerturbationDirection",
    "PotentialParams",
    "SamplerConfig",
    "SpdMatrix",
    "StepTooLarge",
    "ai_distance",
    "ai_inner",
    "block_laplacian",
    "dir_deriv_phi",
    "dirichlet_form",
    "eigh",
    "energy_phi",
    "exp_jacobian_log",
    "exp_map",
    "log_map",
    "logdet",
    "matrix_tree_check",
    "mh_step",
    "potential",
    "pullback_metric",
    "rank_one_direction",
    "rayleigh_residual",
    "riemannian_grad",
    "run_chains",
    "solve_spd",
    "sym_func",
]
