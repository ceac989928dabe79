"""Gate schedules for uniform, sparse and stochastic sparse Trotterization.

A :class:`Schedule` is an ordered list of :class:`Layer` objects:

* ``Local1Q``, ``EvenBonds``, ``OddBonds`` act on the whole chain and make
  up the symmetric second-order step used by the uniform scheme;
* ``LocalBlock`` is one full symmetric step of the given duration restricted
  to the sites and internal bonds of a single node;
* ``CutBond`` is the exponential of the term on one inter-node bond.

:func:`execute` expands layers into groups of commuting gates, merges groups
where that is exact (commuting generators on identical terms, or disjoint
supports), and drives the kernels of :mod:`sparse_trotter.statevec`.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .gates import exp_x, xy_block
from .model import Bond, ChainModel, ModelKind, Partition
from .statevec import StateVector, apply_1q, apply_2q, apply_flip_block, apply_zz_phases

TIME_TOL = 1e-9


class LayerKind(str, enum.Enum):
    LOCAL_1Q = "Local1Q"
    EVEN = "EvenBonds"
    ODD = "OddBonds"
    CUT = "CutBond"
    BLOCK = "LocalBlock"


@dataclass(frozen=True)
class Layer:
    kind: LayerKind
    duration: float
    node: int | None = None
    bond: Bond | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"layer duration must be positive, got {self.duration}")
        if self.kind is LayerKind.CUT and self.bond is None:
            raise ValueError("CutBond layer needs a bond")
        if self.kind is LayerKind.BLOCK and self.node is None:
            raise ValueError("LocalBlock layer needs a node")

    @property
    def scope(self) -> str:
        if self.kind is LayerKind.CUT:
            return f"bond:{self.bond.left}-{self.bond.right}"
        if self.kind is LayerKind.BLOCK:
            return f"node:{self.node}"
        return "chain"


@dataclass(frozen=True)
class StochasticParams:
    mu: float
    sigma: float
    seed: int = 0
    t1: float | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mean step mu must be positive, got {self.mu}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.t1 is not None and not self.t1 > 0:
            raise ValueError(f"first step t1 must be positive, got {self.t1}")

    @property
    def first_step(self) -> float:
        return self.mu if self.t1 is None else self.t1


@dataclass
class Schedule:
    scheme: str
    model_kind: ModelKind
    num_sites: int
    t_end: float
    layers: list[Layer] = field(default_factory=list)
    # (number of layers applied, simulated time) at which every term has
    # evolved for the same time; snapshots are only taken here
    checkpoints: list[tuple[int, float]] = field(default_factory=list)
    partition: Partition | None = None
    N: int | None = None
    n: int | None = None
    dt: float | None = None
    dt_ref: float | None = None
    seed: int | None = None
    cut_steps: dict[tuple[int, int], list[float]] = field(default_factory=dict)

    @property
    def interconnect_uses(self) -> int:
        return sum(1 for layer in self.layers if layer.kind is LayerKind.CUT)

    @property
    def checkpoint_times(self) -> list[float]:
        return [t for _, t in self.checkpoints]


def _step_layers(model: ChainModel, dt: float) -> list[Layer]:
    layers = [
        Layer(LayerKind.EVEN, dt / 2),
        Layer(LayerKind.ODD, dt),
        Layer(LayerKind.EVEN, dt / 2),
    ]
    if not model.odd_bonds:
        layers = [Layer(LayerKind.EVEN, dt)]
    if model.has_field:
        layers = [Layer(LayerKind.LOCAL_1Q, dt / 2), *layers, Layer(LayerKind.LOCAL_1Q, dt / 2)]
    return layers


def build_uniform(model: ChainModel, N: int, t: float) -> Schedule:
    if N < 1:
        raise ValueError(f"step count must be >= 1, got {N}")
    if not t > 0:
        raise ValueError(f"evolution time must be positive, got {t}")
    dt = t / N
    sched = Schedule("uniform", model.kind, model.num_sites, t, N=N, n=1, dt=dt)
    sched.checkpoints.append((0, 0.0))
    block = _step_layers(model, dt)
    for s in range(N):
        sched.layers.extend(block)
        sched.checkpoints.append((len(sched.layers), round(t * (s + 1) / N, 12)))
    return sched


def _check_partition(model: ChainModel, partition: Partition) -> None:
    if partition.num_sites != model.num_sites:
        raise ValueError("partition and model differ in size")
    if partition.k < 2:
        raise ValueError("sparse schemes need at least two nodes")


def build_sparse(model: ChainModel, partition: Partition, N: int, n: int, t: float) -> Schedule:
    _check_partition(model, partition)
    if n < 2 or n % 2:
        raise ValueError(f"sparsity n must be a positive even integer, got {n}")
    if N < 1 or N % n:
        raise ValueError(f"step count N={N} must be a positive multiple of n={n}")
    if not t > 0:
        raise ValueError(f"evolution time must be positive, got {t}")
    dt = t / N
    macro = N // n
    sched = Schedule("sparse", model.kind, model.num_sites, t, partition=partition, N=N, n=n, dt=dt)
    sched.checkpoints.append((0, 0.0))
    half = [Layer(LayerKind.BLOCK, dt, node=k) for k in range(partition.k) for _ in range(n // 2)]
    for m in range(macro):
        sched.layers.extend(half)
        sched.layers.extend(Layer(LayerKind.CUT, n * dt, bond=b) for b in partition.cut_bonds)
        sched.layers.extend(half)
        sched.checkpoints.append((len(sched.layers), round(t * (m + 1) / macro, 12)))
    return sched


def draw_cut_steps(params: StochasticParams, t_end: float, dt_ref: float,
                   rng: np.random.Generator) -> list[float]:
    """Remote step durations for one cut bond, summing to ``t_end``.

    The first step is deterministic; later ones are normal draws clamped
    below at ``dt_ref``.  The final draw is replaced by whatever remains.
    """
    t1 = params.first_step
    if not 0 < t1 < t_end:
        raise ValueError(f"need 0 < t1 < t_end, got t1={t1}, t_end={t_end}")
    tol = TIME_TOL * max(1.0, t_end)
    steps = [t1]
    total = t1
    while total < t_end - tol:
        x = max(float(rng.normal(params.mu, params.sigma)), dt_ref)
        steps.append(x)
        total += x
    if len(steps) > 1:
        steps[-1] = t_end - math.fsum(steps[:-1])
        while steps[-1] <= tol and len(steps) > 2:
            steps.pop()
            steps[-1] = t_end - math.fsum(steps[:-1])
    return steps


def _fill(node: int, span: float, dt_ref: float) -> list[Layer]:
    """Local uniform evolution of ``node`` for ``span``: whole steps then one remainder."""
    if span <= TIME_TOL:
        return []
    whole = math.floor(span / dt_ref + TIME_TOL)
    rest = span - whole * dt_ref
    layers = [Layer(LayerKind.BLOCK, dt_ref, node=node)] * whole
    if rest > TIME_TOL:
        layers.append(Layer(LayerKind.BLOCK, rest, node=node))
    return layers


def build_stochastic(model: ChainModel, partition: Partition, params: StochasticParams,
                     dt_ref: float, t_end: float,
                     rng: np.random.Generator | None = None,
                     steps: dict[tuple[int, int], list[float]] | None = None) -> Schedule:
    """Randomised remote steps with local fills keeping every node's clock exact.

    Cut-bond events are processed in ascending order of the time their bond
    has evolved (offset by half the first step); ties go left to right.
    ``steps`` maps each cut bond's sites to explicit durations, replacing
    the random draws; each list must start with the first step and sum to
    ``t_end``.
    """
    _check_partition(model, partition)
    t1 = params.first_step
    half = t1 / 2
    if steps is None:
        if rng is None:
            rng = np.random.default_rng(params.seed)
        steps = {b.sites: draw_cut_steps(params, t_end, dt_ref, rng) for b in partition.cut_bonds}
    else:
        steps = {tuple(key): [float(x) for x in val] for key, val in steps.items()}
        for b in partition.cut_bonds:
            seq = steps.get(b.sites)
            if seq is None:
                raise ValueError(f"no steps given for cut bond {b.sites}")
            if abs(seq[0] - t1) > TIME_TOL or min(seq) <= 0:
                raise ValueError(f"steps for {b.sites} must be positive and start with t1={t1}")
            if abs(math.fsum(seq) - t_end) > TIME_TOL * max(1.0, t_end):
                raise ValueError(f"steps for {b.sites} sum to {math.fsum(seq)}, expected {t_end}")

    sched = Schedule("stochastic", model.kind, model.num_sites, t_end, partition=partition,
                     dt=dt_ref, dt_ref=dt_ref, seed=params.seed, cut_steps=steps)
    sched.checkpoints.append((0, 0.0))
    layers = sched.layers
    for node in range(partition.k):
        layers.extend(_fill(node, half, dt_ref))
    for b in partition.cut_bonds:
        layers.append(Layer(LayerKind.CUT, t1, bond=b))

    events = []
    for index, b in enumerate(partition.cut_bonds):
        key = half
        for step in steps[b.sites][1:]:
            key += step
            events.append((key, index, step, b))
    events.sort(key=lambda e: (e[0], e[1]))

    clock = [half] * partition.k
    for key, _, step, b in events:
        for node in partition.cut_nodes(b):
            layers.extend(_fill(node, key - clock[node], dt_ref))
            clock[node] = key
        layers.append(Layer(LayerKind.CUT, step, bond=b))

    for node in range(partition.k):
        layers.extend(_fill(node, t_end - half - clock[node], dt_ref))
    for node in range(partition.k):
        layers.extend(_fill(node, half, dt_ref))
    sched.checkpoints.append((len(layers), round(t_end, 12)))
    return sched


# -- time accounting -------------------------------------------------------

def term_times(schedule: Schedule, model: ChainModel) -> dict[str, float]:
    """Total evolution time of every Hamiltonian term, keyed ``bond:i-j`` / ``field:i``."""
    times: dict[str, float] = {f"bond:{b.left}-{b.right}": 0.0 for b in model.bonds}
    if model.has_field:
        times.update({f"field:{i}": 0.0 for i in range(model.num_sites)})

    def add_bonds(bonds, d):
        for b in bonds:
            times[f"bond:{b.left}-{b.right}"] += d

    def add_fields(sites, d):
        if model.has_field:
            for i in sites:
                times[f"field:{i}"] += d

    for layer in schedule.layers:
        d = layer.duration
        if layer.kind is LayerKind.LOCAL_1Q:
            add_fields(range(model.num_sites), d)
        elif layer.kind is LayerKind.EVEN:
            add_bonds(model.even_bonds, d)
        elif layer.kind is LayerKind.ODD:
            add_bonds(model.odd_bonds, d)
        elif layer.kind is LayerKind.CUT:
            add_bonds([layer.bond], d)
        else:
            part = schedule.partition
            add_bonds(part.internal_bonds(model, layer.node), d)
            add_fields(part.node_sites(layer.node), d)
    return times


def check_time_accounting(schedule: Schedule, model: ChainModel, tol: float = TIME_TOL) -> None:
    for term, total in term_times(schedule, model).items():
        if abs(total - schedule.t_end) > tol:
            raise AssertionError(f"{term} evolved for {total!r}, expected {schedule.t_end!r}")


# -- text dump -------------------------------------------------------------

def dump(schedule: Schedule) -> str:
    """One layer per line: kind, scope, duration (17 significant digits)."""
    head = [f"# scheme={schedule.scheme} model={schedule.model_kind.value} L={schedule.num_sites} "
            f"t_end={schedule.t_end:.17g}"]
    if schedule.seed is not None:
        head.append(f"# seed={schedule.seed}")
    body = [f"{layer.kind.value} {layer.scope} {layer.duration:.17g}" for layer in schedule.layers]
    return "\n".join(head + body) + "\n"


def parse_dump(text: str) -> list[tuple[str, str, float]]:
    rows = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        kind, scope, duration = line.split()
        rows.append((kind, scope, float(duration)))
    return rows


# -- execution -------------------------------------------------------------

FIELD, ZZ, XY = "field", "zz", "xy"


@dataclass
class GateGroup:
    """Gates from one commuting family; terms map site or bond to duration."""

    family: str
    terms: dict

    def support(self) -> set[int]:
        if self.family == FIELD:
            return set(self.terms)
        return {s for bond in self.terms for s in bond}

    def absorb(self, other: GateGroup) -> bool:
        """Merge ``other`` (applied after self) if the product is unchanged."""
        if other.family != self.family:
            return False
        if self.family == XY:
            mine = self.support()
            for bond in other.terms:
                if bond not in self.terms and mine.intersection(bond):
                    return False
        for key, d in other.terms.items():
            self.terms[key] = self.terms.get(key, 0.0) + d
        return True


def _expand(layer: Layer, model: ChainModel, partition: Partition | None) -> list[GateGroup]:
    bond_family = XY if model.kind is ModelKind.XY else ZZ
    d = layer.duration

    def bonds(bs, dur):
        return [GateGroup(bond_family, {b.sites: dur for b in bs})] if bs else []

    if layer.kind is LayerKind.LOCAL_1Q:
        return [GateGroup(FIELD, {i: d for i in range(model.num_sites)})] if model.has_field else []
    if layer.kind is LayerKind.EVEN:
        return bonds(model.even_bonds, d)
    if layer.kind is LayerKind.ODD:
        return bonds(model.odd_bonds, d)
    if layer.kind is LayerKind.CUT:
        return bonds([layer.bond], d)
    sites = partition.node_sites(layer.node)
    internal = partition.internal_bonds(model, layer.node)
    even = [b for b in internal if b.parity == "even"]
    odd = [b for b in internal if b.parity == "odd"]
    groups = bonds(even, d / 2) + bonds(odd, d) + bonds(even, d / 2)
    if not odd:
        groups = bonds(even, d)
    if model.has_field:
        fields = {i: d / 2 for i in sites}
        groups = [GateGroup(FIELD, dict(fields)), *groups, GateGroup(FIELD, dict(fields))]
    return groups


def compile_groups(layers: Iterable[Layer], model: ChainModel,
                   partition: Partition | None) -> list[GateGroup]:
    """Expand layers and merge each group into the latest compatible group.

    A group may move earlier only past groups with disjoint support, so the
    resulting product is identical to the unmerged one.
    """
    out: list[GateGroup] = []
    for layer in layers:
        for group in _expand(layer, model, partition):
            support = group.support()
            for prev in reversed(out):
                if prev.absorb(group):
                    break
                if prev.support() & support:
                    out.append(group)
                    break
            else:
                out.append(group)
    return out


def _apply_group(group: GateGroup, model: ChainModel, state: StateVector) -> None:
    psi = state.amplitudes
    if group.family == FIELD:
        for site, d in group.terms.items():
            _kernels.apply_1q(psi, site, exp_x(model.h, d))
    elif group.family == ZZ:
        apply_zz_phases(state, group.terms.keys(), [model.J * d for d in group.terms.values()])
    else:
        for (a, b), d in group.terms.items():
            apply_flip_block(state, a, b, xy_block(model.J, d))


def _apply_layers_literal(layers: Iterable[Layer], model: ChainModel,
                          partition: Partition | None, state: StateVector) -> None:
    # gate-by-gate with full matrices; the reference path for the fused executor
    bond_term = model.bond_term
    for layer in layers:
        for group in _expand(layer, model, partition):
            for key, d in group.terms.items():
                if group.family == FIELD:
                    apply_1q(state, key, model.site_term.exp(d))
                else:
                    apply_2q(state, key[0], key[1], bond_term.exp(d))


def _check_compatible(schedule: Schedule, model: ChainModel, state: StateVector) -> None:
    if schedule.num_sites != model.num_sites or schedule.model_kind is not model.kind:
        raise ValueError(f"schedule for {schedule.model_kind.value} L={schedule.num_sites} "
                         f"does not match model {model.kind.value} L={model.num_sites}")
    if state.num_sites != model.num_sites:
        raise ValueError(f"state has {state.num_sites} sites, model has {model.num_sites}")


def _time_key(t: float) -> float:
    return round(t, 9)


def iter_execute(schedule: Schedule, model: ChainModel, state: StateVector,
                 times: Iterable[float] | None = None, *, fuse: bool = True) -> Iterator[float]:
    """Evolve ``state`` in place, yielding the simulated time at each snapshot.

    ``times`` selects checkpoints to stop at (all of them when ``None``); the
    state must not be modified by the consumer between yields.
    """
    _check_compatible(schedule, model, state)
    wanted = None if times is None else {_time_key(t) for t in times}
    stops = [(i, t) for i, t in schedule.checkpoints if wanted is None or _time_key(t) in wanted]
    done = 0
    for index, t in stops:
        segment = schedule.layers[done:index]
        if fuse:
            for group in compile_groups(segment, model, schedule.partition):
                _apply_group(group, model, state)
        else:
            _apply_layers_literal(segment, model, schedule.partition, state)
        done = index
        yield t
    rest = schedule.layers[done:]
    if rest:
        if fuse:
            for group in compile_groups(rest, model, schedule.partition):
                _apply_group(group, model, state)
        else:
            _apply_layers_literal(rest, model, schedule.partition, state)


def execute(schedule: Schedule, model: ChainModel, state: StateVector,
            callback: Callable[[float, StateVector], None] | None = None,
            times: Iterable[float] | None = None, *, fuse: bool = True) -> None:
    """Apply the whole schedule to ``state``; ``callback(t, state)`` at snapshots."""
    if callback is None and times is None:
        times = ()
    for t in iter_execute(schedule, model, state, times, fuse=fuse):
        if callback is not None:
            callback(t, state)
