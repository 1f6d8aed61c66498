"""Fiber-sampled stochastic mirror descent for low-rank CP decomposition
under non-Euclidean losses (KL, Itakura-Saito, beta-divergences, Bernoulli
and logistic likelihoods), with synthetic data generation, permutation-
resolved factor error, and a stationarity diagnostic.
"""

import os as _os

# Honor the worker cap before any BLAS pool spins up (effective as long as
# this package is imported before numpy, as the console script guarantees).
_threads = _os.environ.get("SMARTCPD_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)
del _os, _threads

from . import backend
from .bregman import DomainExitError, MirrorMap, bregman_div, md_update, parse_mirror
from .losses import DomainError, LossSpec, convex_concave_split, loss_grad_m, \
    loss_value, parse_loss
from .gradient import sampled_gradient
from .metrics import factor_mse, objective_cost
from .sampler import SamplerState, fresh_seed
from .solver import IncompatiblePairError, SolverConfig, SolverError, TraceRecord, \
    default_init, smartcpd, stationarity_measure
from .stepsize import AdagradState, ScheduleSpec, adagrad_gamma, jensen_gamma, \
    parse_schedule, scalar_eta
from .synthdata import GeneratorSpec, gen_factors, observe
from .tensor import CooTensor, DenseTensor, FactorModel, cpd_entry, extract_fibers, \
    khatri_rao_rows, mode_unfold_index

__version__ = "0.1.0"

__all__ = [
    "AdagradState", "CooTensor", "DenseTensor", "DomainError", "DomainExitError",
    "FactorModel", "GeneratorSpec", "IncompatiblePairError", "LossSpec",
    "MirrorMap", "SamplerState", "ScheduleSpec", "SolverConfig", "SolverError",
    "TraceRecord", "adagrad_gamma", "backend", "bregman_div",
    "convex_concave_split", "cpd_entry", "default_init", "extract_fibers",
    "factor_mse", "fresh_seed", "gen_factors", "jensen_gamma", "khatri_rao_rows",
    "loss_grad_m", "loss_value", "md_update", "mode_unfold_index",
    "objective_cost", "observe", "parse_loss", "parse_mirror", "parse_schedule",
    "sampled_gradient", "scalar_eta", "smartcpd", "stationarity_measure",
]
