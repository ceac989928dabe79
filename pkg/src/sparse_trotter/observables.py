"""Fidelities and sigma^z observables computed directly from amplitudes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .statevec import StateVector, inner_product


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2, clamped to [0, 1]."""
    f = abs(inner_product(a, b)) ** 2
    return min(1.0, max(0.0, f))


@dataclass(frozen=True)
class ZProfile:
    """Magnetisation of every site and sigma^z correlations with one site."""

    magnetization: np.ndarray
    correlation: np.ndarray
    site: int
    norm_sq: float


def z_profile(state: StateVector, site: int = 0) -> ZProfile:
    """m_j and chi_{site, j} for all j in one pass over the amplitudes."""
    L = state.num_sites
    if not 0 <= site < L:
        raise ValueError(f"site {site} out of range")
    split = (L + 1) // 2
    low, high = _kernels.site_histograms(state.amplitudes, site, split)
    p_low = low.sum(axis=0)
    p_high = high.sum(axis=0)
    d_low = low[0] - low[1]
    d_high = high[0] - high[1]
    mag = np.empty(L)
    chi = np.empty(L)
    for j in range(L):
        if j < split:
            sign = 1.0 - 2.0 * ((np.arange(p_low.size) >> j) & 1)
            mag[j] = sign @ p_low
            chi[j] = sign @ d_low
        else:
            sign = 1.0 - 2.0 * ((np.arange(p_high.size) >> (j - split)) & 1)
            mag[j] = sign @ p_high
            chi[j] = sign @ d_high
    chi[site] = 1.0
    return ZProfile(mag, chi, site, float(p_low.sum()))


def magnetization(state: StateVector) -> np.ndarray:
    """<sigma^z_i> for every site i."""
    return z_profile(state, 0).magnetization


def correlation_zz(state: StateVector, i: int, j: int) -> float:
    """<sigma^z_i sigma^z_j>; exactly 1 when i == j."""
    L = state.num_sites
    if not (0 <= i < L and 0 <= j < L):
        raise ValueError(f"sites ({i}, {j}) out of range for {L} sites")
    if i == j:
        return 1.0
    return float(_kernels.zz_expectation(state.amplitudes, i, j))


@dataclass
class TimeSeries:
    """Values (scalars or per-site rows) on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[:1] != self.times.shape:
            raise ValueError("times and values differ in length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.size

    def at(self, times) -> TimeSeries:
        """Restrict to the given times (matched to 1e-9)."""
        index = {round(float(t), 9): k for k, t in enumerate(self.times)}
        try:
            rows = [index[round(float(t), 9)] for t in times]
        except KeyError as exc:
            raise ValueError(f"time {exc.args[0]} not on grid") from None
        return TimeSeries(self.times[rows], self.values[rows])


def common_times(*series: TimeSeries) -> np.ndarray:
    keys = set.intersection(*({round(float(t), 9) for t in s.times} for s in series))
    return np.array(sorted(keys))


def deviation_series(test: TimeSeries, reference: TimeSeries) -> tuple[TimeSeries, float]:
    """Element-wise test - reference and its largest absolute entry."""
    if test.times.shape != reference.times.shape or np.any(np.abs(test.times - reference.times) > 1e-9):
        raise ValueError("time grids of test and reference differ")
    if test.values.shape != reference.values.shape:
        raise ValueError(f"value shapes differ: {test.values.shape} vs {reference.values.shape}")
    diff = test.values - reference.values
    return TimeSeries(test.times, diff), float(np.abs(diff).max(initial=0.0))
