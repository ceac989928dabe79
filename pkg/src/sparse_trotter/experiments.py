"""Config-driven runs of test schemes against a uniform reference trajectory."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ChainModel, ModelKind, Partition, build_model, build_partition, initial_state
from .observables import fidelity, z_profile
from .statevec import StateVector
from .trotter import (
    TIME_TOL,
    Schedule,
    StochasticParams,
    build_sparse,
    build_stochastic,
    build_uniform,
    dump,
    iter_execute,
)

log = logging.getLogger(__name__)

SCHEMES = ("uniform", "sparse", "stochastic")
OBSERVABLES = ("fidelity", "magnetization", "correlation")
SWEEP_PARAMS = ("n", "dt", "sigma", "mu", "t1", "k")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``problems`` lists field diagnostics."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid config: " + "; ".join(problems))


@dataclass
class ExperimentConfig:
    kind: str
    L: int
    scheme: str
    t_end: float
    J: float = 1.0
    h: float = 0.0
    k: int = 1
    dt: float = 0.1
    n: int | None = None
    mu: float | None = None
    sigma: float = 0.0
    t1: float | None = None
    ensemble_size: int = 1
    base_seed: int = 0
    reference_dt: float = 0.1
    # snapshot every `snapshot_stride` checkpoints; 0 keeps only t=0 and the end
    snapshot_stride: int = 1
    observables: tuple[str, ...] = OBSERVABLES
    correlation_site: int = 0
    output: str | None = None
    threads: int = 1
    label: str | None = None

    def validate(self) -> ExperimentConfig:
        problems = []
        try:
            ModelKind.parse(self.kind)
        except ValueError as exc:
            problems.append(f"model.kind: {exc}")
        if not isinstance(self.L, int) or self.L < 2:
            problems.append(f"model.L: need an integer >= 2, got {self.L!r}")
        if str(self.kind).upper() == "XY" and self.h != 0:
            problems.append("model.h: must be 0 for the XY model")
        if self.scheme not in SCHEMES:
            problems.append(f"scheme: expected one of {SCHEMES}, got {self.scheme!r}")
        if not _positive(self.t_end):
            problems.append(f"t_end: must be positive, got {self.t_end!r}")
        if not _positive(self.dt):
            problems.append(f"dt: must be positive, got {self.dt!r}")
        if not _positive(self.reference_dt):
            problems.append(f"reference_dt: must be positive, got {self.reference_dt!r}")
        if self.scheme in ("sparse", "stochastic"):
            if not isinstance(self.k, int) or self.k < 2:
                problems.append(f"k: {self.scheme} scheme needs k >= 2, got {self.k!r}")
            elif isinstance(self.L, int) and self.L % self.k:
                problems.append(f"k: {self.L} sites cannot be split into {self.k} equal nodes")
        if self.scheme == "sparse":
            if not isinstance(self.n, int) or self.n < 2 or self.n % 2:
                problems.append(f"n: sparse scheme needs a positive even integer, got {self.n!r}")
        if self.scheme == "stochastic":
            if not _positive(self.mu):
                problems.append(f"mu: stochastic scheme needs mu > 0, got {self.mu!r}")
            if not isinstance(self.sigma, (int, float)) or self.sigma < 0:
                problems.append(f"sigma: must be >= 0, got {self.sigma!r}")
            if not isinstance(self.ensemble_size, int) or self.ensemble_size < 1:
                problems.append(f"ensemble_size: must be >= 1, got {self.ensemble_size!r}")
        if not isinstance(self.snapshot_stride, int) or self.snapshot_stride < 0:
            problems.append(f"snapshot_stride: must be an integer >= 0, got {self.snapshot_stride!r}")
        unknown = set(self.observables) - set(OBSERVABLES)
        if unknown:
            problems.append(f"observables: unknown {sorted(unknown)}")
        if isinstance(self.L, int) and not 0 <= self.correlation_site < self.L:
            problems.append(f"correlation_site: out of range for L={self.L}")
        if not isinstance(self.threads, int) or self.threads < 1:
            problems.append(f"threads: must be >= 1, got {self.threads!r}")
        if problems:
            raise ConfigError(problems)
        return self

    def model(self) -> ChainModel:
        return build_model(self.kind, self.L, self.J, self.h)

    def partition(self, model: ChainModel) -> Partition:
        return build_partition(model, self.k)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["observables"] = list(self.observables)
        return d


def _positive(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and x > 0 and math.isfinite(x)


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a config from parsed JSON; ``model`` may be a nested object."""
    flat = dict(data)
    flat.pop("sweep", None)
    model = flat.pop("model", None)
    if isinstance(model, dict):
        for key, value in model.items():
            flat.setdefault(key, value)
    elif model is not None:
        flat.setdefault("kind", model)
    unknown = sorted(set(flat) - _FIELDS)
    missing = sorted(name for name in ("kind", "L", "scheme", "t_end") if name not in flat)
    problems = [f"{name}: unknown field" for name in unknown]
    problems += [f"{name}: required" for name in missing]
    if problems:
        raise ConfigError(problems)
    if "observables" in flat:
        flat["observables"] = tuple(flat["observables"])
    return ExperimentConfig(**flat).validate()


def load_config(path) -> tuple[ExperimentConfig, list[ExperimentConfig]]:
    """Read a JSON config; returns the base config and its sweep members (maybe empty)."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: not valid JSON ({exc})"]) from None
    base = config_from_dict(data)
    return base, sweep_members(base, data.get("sweep"))


def sweep_members(base: ExperimentConfig, sweep) -> list[ExperimentConfig]:
    """Expand ``{"param": p, "values": [...]}`` or ``{"members": [overrides...]}``."""
    if not sweep:
        return []
    if "members" in sweep:
        overrides = list(sweep["members"])
    else:
        param = sweep.get("param")
        if param not in SWEEP_PARAMS:
            raise ConfigError([f"sweep.param: expected one of {SWEEP_PARAMS}, got {param!r}"])
        overrides = [{param: v} for v in sweep.get("values", [])]
    if not overrides:
        raise ConfigError(["sweep: no members"])
    members = []
    for o in overrides:
        bad = sorted(set(o) - _FIELDS)
        if bad:
            raise ConfigError([f"sweep.{name}: unknown field" for name in bad])
        label = o.get("label") or ",".join(f"{key}={value}" for key, value in o.items())
        members.append(dataclasses.replace(base, **{**o, "label": label}).validate())
    return members


@dataclass
class ExperimentResult:
    config: ExperimentConfig | None
    times: np.ndarray
    fidelity: np.ndarray | None = None
    fidelity_std: np.ndarray | None = None
    magnetization: np.ndarray | None = None
    correlation: np.ndarray | None = None
    reference_magnetization: np.ndarray | None = None
    reference_correlation: np.ndarray | None = None
    norms: np.ndarray | None = None
    ensemble_fidelity: np.ndarray | None = None
    seeds: list[int] = field(default_factory=list)
    interconnect_uses: int = 0
    correlation_site: int = 0

    @property
    def is_ensemble(self) -> bool:
        return self.fidelity_std is not None

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelity[-1])

    @property
    def max_magnetization_deviation(self) -> float:
        return float(np.abs(self.magnetization - self.reference_magnetization).max())

    @property
    def max_correlation_deviation(self) -> float:
        return float(np.abs(self.correlation - self.reference_correlation).max())


# -- schedules ---------------------------------------------------------------

def _steps_covering(x: float) -> int:
    # smallest whole number of steps reaching x
    return max(1, math.ceil(x - TIME_TOL))


def scheme_schedule(cfg: ExperimentConfig, model: ChainModel, seed: int | None = None) -> Schedule:
    """Schedule for the configured scheme: whole steps up to the first one reaching t_end."""
    if cfg.scheme == "uniform":
        N = _steps_covering(cfg.t_end / cfg.dt)
        return build_uniform(model, N, N * cfg.dt)
    partition = cfg.partition(model)
    if cfg.scheme == "sparse":
        macro = _steps_covering(cfg.t_end / (cfg.n * cfg.dt))
        return build_sparse(model, partition, macro * cfg.n, cfg.n, macro * cfg.n * cfg.dt)
    params = StochasticParams(cfg.mu, cfg.sigma, cfg.base_seed if seed is None else seed, cfg.t1)
    return build_stochastic(model, partition, params, cfg.dt, cfg.t_end)


def reference_schedule(cfg: ExperimentConfig, model: ChainModel, t_end: float | None = None) -> Schedule:
    t_end = cfg.t_end if t_end is None else t_end
    N = _steps_covering(t_end / cfg.reference_dt)
    return build_uniform(model, N, N * cfg.reference_dt)


def _snapshot_times(schedule: Schedule, stride: int) -> list[float]:
    times = schedule.checkpoint_times
    if stride == 0:
        return [times[0], times[-1]]
    picked = times[::stride]
    if picked[-1] != times[-1]:
        picked.append(times[-1])
    return picked


def _key(t: float) -> float:
    return round(t, 9)


# -- lockstep runner ----------------------------------------------------------

@dataclass
class _Track:
    cfg: ExperimentConfig
    schedule: Schedule
    state: StateVector
    times: list[float]
    rows: list = field(default_factory=list)


def _profile_row(state: StateVector, site: int, want_profile: bool):
    if not want_profile:
        return None, None, state.norm()
    prof = z_profile(state, site)
    return prof.magnetization, prof.correlation, math.sqrt(prof.norm_sq)


class ReferenceTrajectory:
    """Uniform reference run; caches observables and selected states by time."""

    def __init__(self, cfg: ExperimentConfig, model: ChainModel, t_end: float | None = None):
        self.cfg = cfg
        self.model = model
        self.schedule = reference_schedule(cfg, model, t_end)
        self.grid = {_key(t) for t in self.schedule.checkpoint_times}
        self.profiles: dict[float, tuple] = {}
        self.states: dict[float, StateVector] = {}

    def on_grid(self, t: float) -> bool:
        return _key(t) in self.grid

    def run(self, times, keep_states=(), tracks: list[_Track] = (), site: int = 0) -> None:
        """Evolve to every requested time, advancing ``tracks`` in lockstep."""
        keep = {_key(t) for t in keep_states}
        wanted = sorted({_key(t) for t in times} | keep | {_key(t) for tr in tracks for t in tr.times})
        wanted = [t for t in wanted if t in self.grid]
        state = initial_state(self.model)
        gens = [(tr, iter_execute(tr.schedule, self.model, tr.state, tr.times)) for tr in tracks]
        pending = [list(map(_key, tr.times)) for tr in tracks]
        for t in iter_execute(self.schedule, self.model, state, wanted):
            tk = _key(t)
            self.profiles[tk] = _profile_row(state, site, True)
            if tk in keep:
                self.states[tk] = state.copy()
            for (tr, gen), todo in zip(gens, pending):
                if todo and todo[0] == tk:
                    todo.pop(0)
                    t_test = next(gen)
                    assert _key(t_test) == tk
                    mag, chi, norm = _profile_row(tr.state, site, True)
                    tr.rows.append((t_test, fidelity(state, tr.state), mag, chi, norm))
        for _, gen in gens:
            for _ in gen:
                pass


def _want_profile(cfg: ExperimentConfig) -> bool:
    return "magnetization" in cfg.observables or "correlation" in cfg.observables


def _result_from_rows(cfg: ExperimentConfig, rows, reference: ReferenceTrajectory,
                      schedule: Schedule) -> ExperimentResult:
    times = np.array([r[0] for r in rows])
    res = ExperimentResult(cfg, times, correlation_site=cfg.correlation_site,
                           interconnect_uses=schedule.interconnect_uses)
    res.norms = np.array([r[4] for r in rows])
    if "fidelity" in cfg.observables:
        res.fidelity = np.array([r[1] for r in rows])
    ref_rows = [reference.profiles[_key(t)] for t in times]
    if "magnetization" in cfg.observables:
        res.magnetization = np.array([r[2] for r in rows])
        res.reference_magnetization = np.array([r[0] for r in ref_rows])
    if "correlation" in cfg.observables:
        res.correlation = np.array([r[3] for r in rows])
        res.reference_correlation = np.array([r[1] for r in ref_rows])
    if schedule.seed is not None:
        res.seeds = [schedule.seed]
    return res


def _deterministic_tracks(members, model, reference):
    tracks = []
    for cfg in members:
        sched = scheme_schedule(cfg, model)
        times = [t for t in _snapshot_times(sched, cfg.snapshot_stride) if reference.on_grid(t)]
        if not times:
            raise ConfigError([f"{cfg.label or cfg.scheme}: no snapshot time lies on the reference grid"])
        tracks.append(_Track(cfg, sched, initial_state(model), times))
    return tracks


def _run_ensemble(cfg: ExperimentConfig, model: ChainModel, reference: ReferenceTrajectory) -> ExperimentResult:
    """Independent stochastic schedules with seeds base_seed + i; final-time statistics."""
    seeds = [cfg.base_seed + i for i in range(cfg.ensemble_size)]
    t0, t_end = 0.0, _key(cfg.t_end)
    ref_state = reference.states[t_end]
    ref0, ref1 = reference.profiles[_key(t0)], reference.profiles[t_end]
    memo: dict[str, tuple] = {}

    def one(seed: int):
        sched = scheme_schedule(cfg, model, seed)
        digest = hashlib.sha256(dump(sched).split("\n", 2)[-1].encode()).hexdigest()
        if digest in memo:
            return memo[digest] + (sched.interconnect_uses,)
        state = initial_state(model)
        for _ in iter_execute(sched, model, state, ()):
            pass
        out = (fidelity(ref_state, state), *_profile_row(state, cfg.correlation_site, True))
        memo[digest] = out
        return out + (sched.interconnect_uses,)

    init = initial_state(model)
    prof0 = _profile_row(init, cfg.correlation_site, True)
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            outs = list(pool.map(one, seeds))
    else:
        outs = [one(s) for s in seeds]

    finals = np.array([o[0] for o in outs])
    ens = np.column_stack([np.ones(len(seeds)), finals])
    res = ExperimentResult(cfg, np.array([t0, t_end]), correlation_site=cfg.correlation_site, seeds=seeds)
    res.fidelity = ens.mean(axis=0)
    res.fidelity_std = ens.std(axis=0)
    res.ensemble_fidelity = ens
    # worst instance, so a single non-unitary run cannot hide in the mean
    res.norms = np.array([prof0[2], max((o[3] for o in outs), key=lambda x: abs(x - 1))])
    res.interconnect_uses = int(np.mean([o[4] for o in outs]))
    res.magnetization = np.array([prof0[0], np.mean([o[1] for o in outs], axis=0)])
    res.correlation = np.array([prof0[1], np.mean([o[2] for o in outs], axis=0)])
    res.reference_magnetization = np.array([ref0[0], ref1[0]])
    res.reference_correlation = np.array([ref0[1], ref1[1]])
    if "fidelity" not in cfg.observables:
        res.fidelity = res.fidelity_std = res.ensemble_fidelity = None
    if "magnetization" not in cfg.observables:
        res.magnetization = res.reference_magnetization = None
    if "correlation" not in cfg.observables:
        res.correlation = res.reference_correlation = None
    return res


def sweep(members: list[ExperimentConfig]) -> list[ExperimentResult]:
    """Run several configs of the same model against one shared reference.

    Deterministic members are evolved in lockstep with the reference; the
    reference keeps the end states that stochastic members compare against.
    """
    if not members:
        return []
    base = members[0]
    model = base.model()
    for cfg in members[1:]:
        if (cfg.kind, cfg.L, cfg.J, cfg.h, cfg.reference_dt, cfg.correlation_site) != \
                (base.kind, base.L, base.J, base.h, base.reference_dt, base.correlation_site):
            raise ConfigError([f"{cfg.label}: sweep members must share model, reference_dt and correlation_site"])
    det = [cfg for cfg in members if cfg.scheme != "stochastic"]
    stoch = [cfg for cfg in members if cfg.scheme == "stochastic"]
    t_max = max([scheme_schedule(cfg, model).t_end for cfg in det] + [cfg.t_end for cfg in stoch])
    reference = ReferenceTrajectory(base, model, t_max)
    for cfg in stoch:
        if not reference.on_grid(cfg.t_end):
            raise ConfigError([f"t_end: {cfg.t_end} is not a multiple of reference_dt"])
    tracks = _deterministic_tracks(det, model, reference)
    keep = [cfg.t_end for cfg in stoch]
    reference.run([0.0, *keep], keep_states=keep, tracks=tracks, site=base.correlation_site)
    log.info("reference done: %d snapshots", len(reference.profiles))
    by_cfg = {id(tr.cfg): _result_from_rows(tr.cfg, tr.rows, reference, tr.schedule) for tr in tracks}
    for cfg in stoch:
        by_cfg[id(cfg)] = _run_ensemble(cfg, model, reference)
    return [by_cfg[id(cfg)] for cfg in members]


def run(cfg: ExperimentConfig) -> ExperimentResult:
    return sweep([cfg.validate()])[0]


# -- CSV ---------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.12g}"


def csv_columns(result: ExperimentResult) -> list[str]:
    cols = ["time"]
    if result.magnetization is not None:
        cols += [f"m_{i}" for i in range(result.magnetization.shape[1])]
    if result.correlation is not None:
        c = result.correlation_site
        cols += [f"chi_{c}_{i}" for i in range(result.correlation.shape[1])]
    if result.fidelity is not None:
        cols += ["fidelity_mean", "fidelity_std"] if result.is_ensemble else ["fidelity"]
    return cols


def write_csv(result: ExperimentResult, path) -> None:
    path = Path(path)
    cols = csv_columns(result)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for r, t in enumerate(result.times):
                row = [t]
                if result.magnetization is not None:
                    row += list(result.magnetization[r])
                if result.correlation is not None:
                    row += list(result.correlation[r])
                if result.fidelity is not None:
                    row.append(result.fidelity[r])
                    if result.is_ensemble:
                        row.append(result.fidelity_std[r])
                writer.writerow([_fmt(float(x)) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def read_csv(path) -> ExperimentResult:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, len(rows[0]))
    col = {name: i for i, name in enumerate(header)}
    res = ExperimentResult(None, body[:, col["time"]])
    mags = [i for name, i in col.items() if name.startswith("m_")]
    chis = [(name, i) for name, i in col.items() if name.startswith("chi_")]
    if mags:
        res.magnetization = body[:, mags]
    if chis:
        res.correlation = body[:, [i for _, i in chis]]
        res.correlation_site = int(chis[0][0].split("_")[1])
    if "fidelity" in col:
        res.fidelity = body[:, col["fidelity"]]
    if "fidelity_mean" in col:
        res.fidelity = body[:, col["fidelity_mean"]]
        res.fidelity_std = body[:, col["fidelity_std"]]
    return res


def summary(result: ExperimentResult) -> dict:
    out = {"label": result.config.label if result.config else None,
           "interconnect_uses": result.interconnect_uses,
           "final_time": float(result.times[-1])}
    if result.fidelity is not None:
        out["final_fidelity"] = result.final_fidelity
        if result.is_ensemble:
            out["final_fidelity_std"] = float(result.fidelity_std[-1])
    if result.magnetization is not None:
        out["max_abs_dm"] = result.max_magnetization_deviation
    if result.correlation is not None:
        out["max_abs_dchi"] = result.max_correlation_deviation
    if result.norms is not None:
        out["max_norm_error"] = float(np.abs(result.norms - 1).max())
    return out


def write_metadata(result: ExperimentResult, path) -> None:
    """JSON sidecar with the config echo, seeds and summary numbers."""
    meta = {"config": result.config.to_dict() if result.config else None,
            "seeds": list(result.seeds), **summary(result)}
    Path(path).write_text(json.dumps(meta, indent=2) + "\n")


def output_paths(base: str | os.PathLike, label: str | None = None) -> tuple[Path, Path]:
    base = Path(base)
    stem = base.stem if base.suffix == ".csv" else base.name
    if label:
        stem += "_" + "".join(c if c.isalnum() or c in "-.=" else "_" for c in label)
    csv_path = base.with_name(stem + ".csv")
    return csv_path, base.with_name(stem + ".meta.json")
