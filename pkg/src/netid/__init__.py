"""Identification of linear dynamic networks with rank-reduced noise.

Steps: high-order ARX innovation reconstruction, noise rank and ordering,
noise topology selection (AIC, BIC, CV or group lasso), structured
refinement and weighted null-space fitting of Box-Jenkins modules, plus
path-based informativity checks and a Monte-Carlo harness.
"""
from .exceptions import (ConvergenceError, DegenerateDataError, DimensionError, FormatError,
                         InconsistentRankError, ModelError, NetIdError, NumericalError,
                         RankError, SimulationError, StepError)
from .netmodel import (Dataset, NetworkModel, Polynomial, RationalTF, build_check_H,
                       check_lambda, filter_series, impulse_response, simulate,
                       simulate_experiment)
from .fileio import (read_dataset, read_network, six_node_network, write_dataset,
                     write_network)
from .arx import (InnovationEstimate, default_order, fit_arx_step1, fit_arx_step21,
                  fit_structured, refine_step31, residual_covariance)
from .topology import (RankResult, TopologyEstimate, estimate_rank, estimate_topology,
                       reorder_nodes, roc_eval, select_structure, tune_lambda)
from .glasso import glasso, glasso_gram
from .wnsf import BjEstimate, BjOrders, fit_wnsf, true_theta
from .informativity import (SignalGraph, check_prop3, check_prop4, informativity_report,
                            max_disjoint_paths, suggest_excitation)
from .pipeline import (BenchResult, IdentificationResult, RunConfig, read_config,
                       run_algorithm1, run_benchmark)

__version__ = "0.1.0"
