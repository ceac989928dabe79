"""Brute-force dense Hamiltonians and exact propagation for small chains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gates import dense_exp
from .model import ChainModel
from .statevec import StateVector

MAX_SITES = 12


def embed_one(op: np.ndarray, site: int, num_sites: int) -> np.ndarray:
    """Kronecker-embed a 1-site operator; site 0 is the rightmost factor."""
    return np.kron(np.kron(np.eye(1 << (num_sites - 1 - site)), op), np.eye(1 << site))


def embed_two(op: np.ndarray, site_a: int, site_b: int, num_sites: int) -> np.ndarray:
    """Embed a 4x4 operator indexed by ``2 * bit_b + bit_a`` into the full space."""
    dim = 1 << num_sites
    x = np.arange(dim)
    bits = ((x >> site_b) & 1) * 2 + ((x >> site_a) & 1)
    rest = x & ~((1 << site_a) | (1 << site_b))
    same_rest = rest[:, None] == rest[None, :]
    return np.where(same_rest, op[bits[:, None], bits[None, :]], 0.0)


@dataclass(frozen=True)
class DenseHamiltonian:
    num_sites: int
    matrix: np.ndarray


def assemble(model: ChainModel) -> DenseHamiltonian:
    L = model.num_sites
    if L > MAX_SITES:
        raise ValueError(f"dense Hamiltonian limited to {MAX_SITES} sites, got {L}")
    H = np.zeros((1 << L, 1 << L), dtype=np.complex128)
    bond = model.bond_term.matrix()
    for b in model.bonds:
        H += embed_two(bond, b.left, b.right, L)
    if model.site_term is not None:
        field = model.site_term.matrix()
        for i in range(L):
            H += embed_one(field, i, L)
    return DenseHamiltonian(L, H)


def evolve_exact(model: ChainModel, state: StateVector, t: float) -> StateVector:
    if state.num_sites != model.num_sites:
        raise ValueError("state and model differ in size")
    U = dense_exp(assemble(model).matrix, t)
    out = StateVector(U @ state.amplitudes, copy=False)
    out.amplitudes /= np.linalg.norm(out.amplitudes)
    return out
