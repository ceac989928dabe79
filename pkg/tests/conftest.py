from __future__ import annotations

import numpy as np
import pytest

from sparse_trotter.statevec import StateVector

I2 = np.eye(2)


def random_state(rng, num_sites: int) -> StateVector:
    v = rng.normal(size=1 << num_sites) + 1j * rng.normal(size=1 << num_sites)
    return StateVector(v / np.linalg.norm(v))


def random_unitary(rng, dim: int) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def kron_site(op: np.ndarray, site: int, num_sites: int) -> np.ndarray:
    """Explicit Kronecker chain; site 0 is the rightmost (least significant) factor."""
    factors = [op if s == site else I2 for s in reversed(range(num_sites))]
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return out


def kron_pair(u: np.ndarray, site_a: int, site_b: int, num_sites: int) -> np.ndarray:
    """Embed a 4x4 matrix indexed by 2*bit_b + bit_a as a sum of Kronecker products."""
    full = np.zeros((1 << num_sites, 1 << num_sites), dtype=complex)
    for r in range(4):
        for c in range(4):
            if u[r, c] == 0:
                continue
            eb = np.zeros((2, 2))
            ea = np.zeros((2, 2))
            eb[r >> 1, c >> 1] = 1
            ea[r & 1, c & 1] = 1
            full += u[r, c] * kron_site(eb, site_b, num_sites) @ kron_site(ea, site_a, num_sites)
    return full


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_criteria: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    _criteria.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _criteria:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
