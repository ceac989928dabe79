"""Numba kernels operating in place on flat complex128 amplitude arrays.

Bit ``q`` of an amplitude index is the state of site ``q``.  Every kernel
touches each amplitude pair (or quadruple) exactly once.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_JIT = dict(nogil=True, cache=True)


@nb.njit(**_JIT)
def apply_1q(psi, q, u):
    m = 1 << q
    v = psi.reshape((psi.size // (2 * m), 2, m))
    u00, u01, u10, u11 = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
    for r in range(v.shape[0]):
        for j in range(m):
            a = v[r, 0, j]
            b = v[r, 1, j]
            v[r, 0, j] = u00 * a + u01 * b
            v[r, 1, j] = u10 * a + u11 * b


@nb.njit(**_JIT)
def apply_2q(psi, lo, hi, u):
    # u rows/cols ordered by 2*bit_hi + bit_lo
    ml = 1 << lo
    mid = 1 << (hi - lo - 1)
    v = psi.reshape((psi.size // (4 * ml * mid), 2, mid, 2, ml))
    for r in range(v.shape[0]):
        for s in range(mid):
            for j in range(ml):
                a0 = v[r, 0, s, 0, j]
                a1 = v[r, 0, s, 1, j]
                a2 = v[r, 1, s, 0, j]
                a3 = v[r, 1, s, 1, j]
                v[r, 0, s, 0, j] = u[0, 0] * a0 + u[0, 1] * a1 + u[0, 2] * a2 + u[0, 3] * a3
                v[r, 0, s, 1, j] = u[1, 0] * a0 + u[1, 1] * a1 + u[1, 2] * a2 + u[1, 3] * a3
                v[r, 1, s, 0, j] = u[2, 0] * a0 + u[2, 1] * a1 + u[2, 2] * a2 + u[2, 3] * a3
                v[r, 1, s, 1, j] = u[3, 0] * a0 + u[3, 1] * a1 + u[3, 2] * a2 + u[3, 3] * a3


@nb.njit(**_JIT)
def apply_2q_flip_block(psi, lo, hi, g):
    """Mix only the (hi=0, lo=1) and (hi=1, lo=0) amplitudes with the 2x2 block ``g``."""
    ml = 1 << lo
    mid = 1 << (hi - lo - 1)
    v = psi.reshape((psi.size // (4 * ml * mid), 2, mid, 2, ml))
    g00, g01, g10, g11 = g[0, 0], g[0, 1], g[1, 0], g[1, 1]
    for r in range(v.shape[0]):
        for s in range(mid):
            for j in range(ml):
                a = v[r, 0, s, 1, j]
                b = v[r, 1, s, 0, j]
                v[r, 0, s, 1, j] = g00 * a + g01 * b
                v[r, 1, s, 0, j] = g10 * a + g11 * b


@nb.njit(**_JIT)
def apply_split_diagonal(psi, low_table, high_table, shift):
    """psi[x] *= low_table[x & (len(low_table)-1)] * high_table[x >> shift]."""
    mask = low_table.size - 1
    block = 1 << shift
    for g in range(high_table.size):
        f = high_table[g]
        base = g * block
        for l in range(block):
            x = base + l
            psi[x] *= f * low_table[x & mask]


@nb.njit(**_JIT)
def site_histograms(psi, site, split):
    """Joint weights of (bit ``site``, low ``split`` bits) and (bit ``site``, high bits)."""
    nlow = 1 << split
    nhigh = psi.size >> split
    low = np.zeros((2, nlow))
    high = np.zeros((2, nhigh))
    for h in range(nhigh):
        base = h * nlow
        for l in range(nlow):
            a = psi[base + l]
            w = a.real * a.real + a.imag * a.imag
            b = ((base + l) >> site) & 1
            low[b, l] += w
            high[b, h] += w
    return low, high


@nb.njit(**_JIT)
def zz_expectation(psi, i, j):
    acc = 0.0
    for x in range(psi.size):
        a = psi[x]
        w = a.real * a.real + a.imag * a.imag
        if ((x >> i) ^ (x >> j)) & 1:
            acc -= w
        else:
            acc += w
    return acc
