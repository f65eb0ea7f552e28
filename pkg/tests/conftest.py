import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sparse_mfpca.grid_basis import build_grid, eval_basis  # noqa: E402


@pytest.fixture
def grid():
    return build_grid((0.0, 1.0), 101)


@pytest.fixture
def bspline6(grid):
    return eval_basis("bspline", 6, (0.0, 1.0), grid)


def random_sparse_sample(rng, n, m_low=2, m_high=4, domain=(0.0, 1.0)):
    """Random ``(t, y)`` pairs with between ``m_low`` and ``m_high`` observations."""
    out = []
    for _ in range(n):
        m = int(rng.integers(m_low, m_high + 1))
        t = np.sort(rng.uniform(*domain, size=m))
        out.append((t, rng.standard_normal(m)))
    return out


def rank_sample(rng, n, phi_funcs, lam, sigma2, m_range=(3, 7)):
    """Sparse curves ``sum_q xi_q phi_q(t) + noise`` on [0, 1]."""
    out = []
    for _ in range(n):
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        t = np.sort(rng.uniform(0, 1, size=m))
        xi = rng.standard_normal(len(lam)) * np.sqrt(lam)
        y = sum(x * f(t) for x, f in zip(xi, phi_funcs)) + rng.standard_normal(m) * np.sqrt(sigma2)
        out.append((t, y))
    return out
