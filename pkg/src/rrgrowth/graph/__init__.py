"""Growing random regular graphs in the permutation model."""
from .cycles import (
    WORK_BUDGET,
    CountVector,
    CycleRecord,
    bad_walk_exists,
    cnbw_count,
    cnbw_counts,
    count_cycles,
    counts_by_length,
    cycle_lengths,
    divisors,
    list_cycles,
)
from .perm import Clock, GraphState, GrowthLog, PermTower, RandomStreams, advance, crp_step
from .spectral import (
    EIGEN_CAP,
    EigenError,
    chebyshev_t,
    f_basis,
    f_basis_gamma,
    gamma_eval,
    gamma_poly,
    gamma_shift,
    gamma_traces,
    mobius,
    monomial_to_gamma,
    scaled_eigenvalues,
    tr_f_basis,
    tr_poly,
)

__all__ = [
    "WORK_BUDGET", "CountVector", "CycleRecord", "bad_walk_exists", "cnbw_count", "cnbw_counts",
    "count_cycles", "counts_by_length", "cycle_lengths", "divisors", "list_cycles",
    "Clock", "GraphState", "GrowthLog", "PermTower", "RandomStreams", "advance", "crp_step",
    "EIGEN_CAP", "EigenError", "chebyshev_t", "f_basis", "f_basis_gamma", "gamma_eval", "gamma_poly",
    "gamma_shift", "gamma_traces", "mobius", "monomial_to_gamma", "scaled_eigenvalues", "tr_f_basis",
    "tr_poly",
]
