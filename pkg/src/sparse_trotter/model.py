"""Spin-chain models, bond parities, node partitions and initial states."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

from .gates import TermKind, TermSpec
from .statevec import Spin, StateVector, new_basis_state


class ModelKind(str, enum.Enum):
    XY = "XY"
    TFI = "TFI"

    @classmethod
    def parse(cls, value) -> ModelKind:
        if isinstance(value, ModelKind):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown model kind {value!r} (expected XY or TFI)") from None


@dataclass(frozen=True)
class Bond:
    left: int
    right: int

    @property
    def parity(self) -> str:
        return "even" if self.left % 2 == 0 else "odd"

    @property
    def sites(self) -> tuple[int, int]:
        return (self.left, self.right)


@dataclass(frozen=True)
class ChainModel:
    """Open nearest-neighbour chain; bond (i, i+1) is even iff i is even."""

    kind: ModelKind
    num_sites: int
    J: float = 1.0
    h: float = 0.0

    @cached_property
    def bonds(self) -> tuple[Bond, ...]:
        return tuple(Bond(i, i + 1) for i in range(self.num_sites - 1))

    @property
    def even_bonds(self) -> tuple[Bond, ...]:
        return tuple(b for b in self.bonds if b.parity == "even")

    @property
    def odd_bonds(self) -> tuple[Bond, ...]:
        return tuple(b for b in self.bonds if b.parity == "odd")

    @property
    def has_field(self) -> bool:
        return self.kind is ModelKind.TFI

    @property
    def bond_term(self) -> TermSpec:
        kind = TermKind.XX_PLUS_YY if self.kind is ModelKind.XY else TermKind.ZZ
        return TermSpec(kind, self.J)

    @property
    def site_term(self) -> TermSpec | None:
        return TermSpec(TermKind.X_FIELD, self.h) if self.has_field else None


def build_model(kind, num_sites: int, J: float = 1.0, h: float = 0.0) -> ChainModel:
    kind = ModelKind.parse(kind)
    if num_sites < 2:
        raise ValueError(f"chain needs at least 2 sites, got {num_sites}")
    if kind is ModelKind.XY and h != 0:
        raise ValueError("XY model takes no transverse field (h must be 0)")
    return ChainModel(kind, int(num_sites), float(J), float(h))


@dataclass(frozen=True)
class Partition:
    """Contiguous equal blocks of sites, one per compute node."""

    k: int
    node_of_site: tuple[int, ...]
    cut_bonds: tuple[Bond, ...] = field(default=())

    @property
    def num_sites(self) -> int:
        return len(self.node_of_site)

    @property
    def block_size(self) -> int:
        return self.num_sites // self.k

    def node_sites(self, node: int) -> range:
        size = self.block_size
        return range(node * size, (node + 1) * size)

    def internal_bonds(self, model: ChainModel, node: int) -> tuple[Bond, ...]:
        return tuple(b for b in model.bonds
                     if self.node_of_site[b.left] == node and self.node_of_site[b.right] == node)

    def cut_nodes(self, bond: Bond) -> tuple[int, int]:
        return self.node_of_site[bond.left], self.node_of_site[bond.right]


def build_partition(model: ChainModel, k: int) -> Partition:
    if k < 1:
        raise ValueError(f"node count must be >= 1, got {k}")
    if model.num_sites % k:
        raise ValueError(f"{model.num_sites} sites cannot be split into {k} equal nodes")
    size = model.num_sites // k
    node_of_site = tuple(i // size for i in range(model.num_sites))
    cuts = tuple(b for b in model.bonds if node_of_site[b.left] != node_of_site[b.right])
    return Partition(k, node_of_site, cuts)


def initial_spins(model: ChainModel) -> list[Spin]:
    L = model.num_sites
    if model.kind is ModelKind.XY:
        if L % 2:
            raise ValueError("domain-wall state needs an even number of sites")
        return [Spin.UP] * (L // 2) + [Spin.DOWN] * (L // 2)
    return [Spin.DOWN] * L


def initial_state(model: ChainModel) -> StateVector:
    """Domain wall (up on the left half) for XY, all down for TFI."""
    return new_basis_state(model.num_sites, initial_spins(model))
