"""Sparse Trotter-Suzuki evolution of spin chains on linearly connected compute nodes."""

from .gates import dense_exp, exp_x, exp_xy, exp_zz
from .model import build_model, build_partition, initial_state
from .observables import correlation_zz, fidelity, magnetization
from .statevec import StateVector, apply_1q, apply_2q, inner_product, new_basis_state
from .trotter import build_sparse, build_stochastic, build_uniform, draw_cut_steps, execute

__all__ = [
    "StateVector", "apply_1q", "apply_2q", "inner_product", "new_basis_state",
    "dense_exp", "exp_x", "exp_xy", "exp_zz",
    "build_model", "build_partition", "initial_state",
    "build_uniform", "build_sparse", "build_stochastic", "draw_cut_steps", "execute",
    "fidelity", "magnetization", "correlation_zz",
]
