"""Closed-form exponentials of the chain Hamiltonian terms.

Conventions (hbar = 1): the two-site terms are ``-J (XX + YY)`` and
``-J ZZ``, the one-site term is ``h X``.  Each ``exp_*`` returns
``exp(-i * term * t)``; two-site matrices use the ``2 * bit_b + bit_a``
ordering of :mod:`sparse_trotter.statevec`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

I2 = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

_HERMITIAN_TOL = 1e-12


class TermKind(str, enum.Enum):
    XX_PLUS_YY = "XX_plus_YY"
    ZZ = "ZZ"
    X_FIELD = "X_field"

    @property
    def arity(self) -> int:
        return 1 if self is TermKind.X_FIELD else 2


@dataclass(frozen=True)
class TermSpec:
    kind: TermKind
    coupling: float

    @property
    def arity(self) -> int:
        return self.kind.arity

    def matrix(self) -> np.ndarray:
        """The local Hamiltonian term as a dense 2x2 or 4x4 matrix."""
        if self.kind is TermKind.X_FIELD:
            return self.coupling * PAULI_X
        if self.kind is TermKind.ZZ:
            return -self.coupling * np.kron(PAULI_Z, PAULI_Z)
        return -self.coupling * (np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y))

    def exp(self, t: float) -> np.ndarray:
        if self.kind is TermKind.X_FIELD:
            return exp_x(self.coupling, t)
        if self.kind is TermKind.ZZ:
            return exp_zz(self.coupling, t)
        return exp_xy(self.coupling, t)


def xy_block(J: float, t: float) -> np.ndarray:
    """exp_xy restricted to the {|01>, |10>} subspace."""
    c, s = math.cos(2 * J * t), math.sin(2 * J * t)
    return np.array([[c, 1j * s], [1j * s, c]], dtype=np.complex128)


def exp_xy(J: float, t: float) -> np.ndarray:
    u = np.eye(4, dtype=np.complex128)
    u[1:3, 1:3] = xy_block(J, t)
    return u


def exp_zz(J: float, t: float) -> np.ndarray:
    p = complex(math.cos(J * t), math.sin(J * t))
    return np.diag([p, p.conjugate(), p.conjugate(), p])


def exp_x(h: float, t: float) -> np.ndarray:
    c, s = math.cos(h * t), math.sin(h * t)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def dense_exp(H, t: float) -> np.ndarray:
    """exp(-i H t) for Hermitian ``H`` via its eigendecomposition."""
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    if H.shape[0] > 1 << 12:
        raise ValueError(f"matrix dimension {H.shape[0]} exceeds 4096")
    if np.abs(H - H.conj().T).max(initial=0.0) > _HERMITIAN_TOL:
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * w * t)) @ v.conj().T
