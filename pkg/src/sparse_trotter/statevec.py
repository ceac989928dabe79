"""Dense statevector storage and in-place gate application.

Basis convention (fixed, asserted by the test-suite):

* site ``i`` is bit ``i`` of the amplitude index (site 0 is the least
  significant bit);
* spin up (sigma^z = +1) is bit value 0, spin down is bit value 1, so that
  sigma^z = diag(+1, -1) in bit order.

Two-site matrices are indexed by ``2 * bit_b + bit_a`` where ``site_a`` is
the first site argument, i.e. rows/columns run over
``(bit_b, bit_a) = (0,0), (0,1), (1,0), (1,1)``.
"""

from __future__ import annotations

import enum
import os
from collections.abc import Iterable, Sequence

import numpy as np

from . import _kernels

#: Unitarity checks on gate matrices; off by default for speed.
VALIDATE = os.environ.get("SPARSE_TROTTER_VALIDATE", "") not in ("", "0")

_UNITARY_TOL = 1e-12

_SWAP_PERM = [0, 2, 1, 3]


class Spin(enum.IntEnum):
    UP = 0
    DOWN = 1

    @classmethod
    def parse(cls, value) -> Spin:
        if isinstance(value, Spin):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("u", "up", "↑", "+"):
                return cls.UP
            if key in ("d", "down", "dn", "↓", "-"):
                return cls.DOWN
            raise ValueError(f"unknown spin label {value!r}")
        if value in (0, 1):
            return cls(int(value))
        raise ValueError(f"unknown spin label {value!r}")


def site_to_bit(site: int) -> int:
    return site


def bit_to_site(bit: int) -> int:
    return bit


class StateVector:
    """A normalised wavefunction of ``num_sites`` spin-1/2 sites."""

    __slots__ = ("num_sites", "amplitudes")

    def __init__(self, amplitudes, *, copy: bool = True):
        amps = np.array(amplitudes, dtype=np.complex128, copy=copy).reshape(-1)
        dim = amps.size
        if dim < 2 or dim & (dim - 1):
            raise ValueError(f"amplitude count must be a power of two >= 2, got {dim}")
        self.num_sites = dim.bit_length() - 1
        self.amplitudes = np.ascontiguousarray(amps)

    @classmethod
    def zeros(cls, num_sites: int) -> StateVector:
        if num_sites < 1:
            raise ValueError("num_sites must be >= 1")
        return cls(np.zeros(1 << num_sites, dtype=np.complex128), copy=False)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> StateVector:
        return StateVector(self.amplitudes, copy=True)

    def __repr__(self) -> str:
        return f"StateVector(num_sites={self.num_sites})"


def basis_index(spins: Sequence) -> int:
    index = 0
    for site, spin in enumerate(spins):
        if Spin.parse(spin) is Spin.DOWN:
            index |= 1 << site_to_bit(site)
    return index


def new_basis_state(num_sites: int, spins: Sequence) -> StateVector:
    """Product state with ``spins[i]`` on site ``i``."""
    if num_sites < 1:
        raise ValueError("num_sites must be >= 1")
    if len(spins) != num_sites:
        raise ValueError(f"expected {num_sites} spin labels, got {len(spins)}")
    state = StateVector.zeros(num_sites)
    state.amplitudes[basis_index(spins)] = 1.0
    return state


def _check_site(state: StateVector, site: int) -> None:
    if not 0 <= site < state.num_sites:
        raise ValueError(f"site {site} out of range for {state.num_sites} sites")


def _check_unitary(u: np.ndarray) -> None:
    err = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
    if err > _UNITARY_TOL:
        raise ValueError(f"gate matrix is not unitary (max deviation {err:.3e})")


def _as_matrix(u, dim: int) -> np.ndarray:
    m = np.ascontiguousarray(u, dtype=np.complex128)
    if m.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
    return m


def apply_1q(state: StateVector, site: int, u, *, validate: bool | None = None) -> None:
    _check_site(state, site)
    m = _as_matrix(u, 2)
    if VALIDATE if validate is None else validate:
        _check_unitary(m)
    _kernels.apply_1q(state.amplitudes, site_to_bit(site), m)


def _ordered(site_a: int, site_b: int, u: np.ndarray) -> tuple[int, int, np.ndarray]:
    """Return (low bit, high bit, matrix indexed by 2*bit_high + bit_low)."""
    a, b = site_to_bit(site_a), site_to_bit(site_b)
    if a < b:
        return a, b, u
    return b, a, np.ascontiguousarray(u[np.ix_(_SWAP_PERM, _SWAP_PERM)])


def apply_2q(state: StateVector, site_a: int, site_b: int, u, *, validate: bool | None = None) -> None:
    _check_site(state, site_a)
    _check_site(state, site_b)
    if site_a == site_b:
        raise ValueError("two-site gate needs distinct sites")
    m = _as_matrix(u, 4)
    if VALIDATE if validate is None else validate:
        _check_unitary(m)
    lo, hi, m = _ordered(site_a, site_b, m)
    _kernels.apply_2q(state.amplitudes, lo, hi, m)


def apply_flip_block(state: StateVector, site_a: int, site_b: int, block) -> None:
    """Apply a gate that is the identity outside the {|01>, |10>} subspace.

    ``block`` acts on the subspace ordered as ``(bit_b, bit_a) = (0,1), (1,0)``,
    matching rows 1 and 2 of the full two-site matrix.
    """
    _check_site(state, site_a)
    _check_site(state, site_b)
    if site_a == site_b:
        raise ValueError("two-site gate needs distinct sites")
    g = _as_matrix(block, 2)
    lo, hi = sorted((site_to_bit(site_a), site_to_bit(site_b)))
    if site_to_bit(site_a) > site_to_bit(site_b):
        g = np.ascontiguousarray(g[::-1, ::-1])
    _kernels.apply_2q_flip_block(state.amplitudes, lo, hi, g)


def apply_zz_phases(state: StateVector, bonds: Iterable[tuple[int, int]], angles: Iterable[float]) -> None:
    """Multiply by exp(i * sum_b angle_b * Z_i Z_j) in a single pass.

    The phase is split into a table over the low bits and a table over the
    remaining high bits, so the per-amplitude cost is two lookups.
    """
    bonds = [tuple(sorted((site_to_bit(i), site_to_bit(j)))) for i, j in bonds]
    angles = [float(a) for a in angles]
    if len(bonds) != len(angles):
        raise ValueError("bonds and angles differ in length")
    nsites = state.num_sites
    for i, j in bonds:
        if i == j or not (0 <= i < nsites and 0 <= j < nsites):
            raise ValueError(f"invalid bond ({i}, {j})")
    if not bonds:
        return
    split = max(1, (nsites + 1) // 2)
    low_terms = [(b, a) for b, a in zip(bonds, angles) if b[1] < split]
    high_terms = [(b, a) for b, a in zip(bonds, angles) if b[1] >= split]
    shift = min([b[0] for b, _ in high_terms], default=split)
    shift = min(shift, split)
    low_table = _zz_phase_table(split, low_terms, 0)
    high_table = _zz_phase_table(nsites - shift, high_terms, shift)
    _kernels.apply_split_diagonal(state.amplitudes, low_table, high_table, shift)


def _zz_phase_table(nbits: int, terms, offset: int) -> np.ndarray:
    x = np.arange(1 << nbits, dtype=np.int64)
    angle = np.zeros(x.size)
    for (i, j), theta in terms:
        parity = ((x >> (i - offset)) ^ (x >> (j - offset))) & 1
        angle += theta * (1 - 2 * parity)
    return np.exp(1j * angle)


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b> = sum_i conj(a_i) b_i."""
    if a.num_sites != b.num_sites:
        raise ValueError(f"dimension mismatch: {a.num_sites} vs {b.num_sites} sites")
    return complex(np.vdot(a.amplitudes, b.amplitudes))
