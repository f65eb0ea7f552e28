"""Synthetic sparse trivariate functional data with known eigenstructure.

Each variable's covariance is built from three L2-orthonormal trigonometric
functions on [0, 1]; cross-covariances scale the geometric mean of the
eigenvalues by a correlation level ``rho``. Because the building blocks are
orthonormal, the multivariate covariance operator is represented exactly by
a 9 x 9 coefficient matrix whose eigenpairs give the true multivariate
eigenvalues and eigenfunctions.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from .data import SparseDataset
from .grid_basis import build_grid

N_VARIABLES = 3
N_TRUE_COMPONENTS = 9
DOMAIN = (0.0, 1.0)
VARIABLE_NAMES = ("X1", "X2", "X3")

EIGENVALUES = (
    np.array([3.0, 1.5, 0.75]),
    np.array([3.5, 1.75, 0.5]),
    np.array([2.5, 2.0, 1.0]),
)

SQ2 = np.sqrt(2.0)


def mean_function(k: int, t) -> np.ndarray:
    """True mean of variable ``k`` (1-based)."""
    t = np.asarray(t, dtype=float)
    if k == 1:
        return 5 * np.sin(2 * np.pi * t)
    if k == 2:
        return 5 * np.cos(2 * np.pi * t)
    if k == 3:
        return 5 * (t - 1) ** 2
    raise ValueError(f"variable index must be 1, 2 or 3, got {k}")


def basis_functions(k: int, t) -> np.ndarray:
    """The three orthonormal functions of variable ``k`` at ``t``, shape ``(len(t), 3)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    pi = np.pi
    if k == 1:
        cols = [np.sin(2 * pi * t), np.cos(4 * pi * t), np.sin(4 * pi * t)]
    elif k == 2:
        cols = [np.cos(pi * t), np.cos(2 * pi * t), np.cos(3 * pi * t)]
    elif k == 3:
        cols = [np.sin(pi * t), np.sin(2 * pi * t), np.sin(3 * pi * t)]
    else:
        raise ValueError(f"variable index must be 1, 2 or 3, got {k}")
    return SQ2 * np.stack(cols, axis=-1)


def _check_points(t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.size and (t.min() < DOMAIN[0] or t.max() > DOMAIN[1]):
        raise ValueError("evaluation points must lie in [0, 1]")
    return t


def coefficient_covariance(rho: float) -> np.ndarray:
    """9 x 9 covariance of the stacked coefficients on the per-variable basis functions."""
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    roots = np.concatenate([np.sqrt(lam) for lam in EIGENVALUES])
    K = np.zeros((9, 9))
    for k in range(3):
        for k2 in range(3):
            blk = slice(3 * k, 3 * k + 3), slice(3 * k2, 3 * k2 + 3)
            if k == k2:
                K[blk] = np.diag(EIGENVALUES[k])
            else:
                K[blk] = rho * np.diag(roots[3 * k: 3 * k + 3] * roots[3 * k2: 3 * k2 + 3])
    return K


def true_covariance(k: int, k2: int, s, t, rho: float) -> np.ndarray:
    """``C_{k k2}(s, t)`` on the outer grid ``s x t`` (scalars give a scalar)."""
    scalar = np.ndim(s) == 0 and np.ndim(t) == 0
    s, t = _check_points(s), _check_points(t)
    K = coefficient_covariance(rho)
    blk = K[3 * (k - 1): 3 * k, 3 * (k2 - 1): 3 * k2]
    out = basis_functions(k, s) @ blk @ basis_functions(k2, t).T
    return float(out[0, 0]) if scalar else out


@lru_cache(maxsize=32)
def _exact_eigen(rho: float):
    vals, vecs = np.linalg.eigh(coefficient_covariance(rho))
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    # deterministic sign: largest-magnitude coefficient positive
    idx = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[idx, np.arange(9)])
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return vals, vecs


def exact_mv_eigen(rho: float) -> Tuple[np.ndarray, np.ndarray]:
    """True multivariate eigenvalues (descending) and their 9 x 9 coefficient eigenvectors."""
    return _exact_eigen(float(rho))


def true_mv_eigen(rho: float, H: int = 401):
    """Discretized multivariate eigenproblem on ``H`` points per variable.

    Solves ``W^{1/2} C W^{1/2} v = d v`` for the assembled ``3H x 3H``
    block covariance and back-transforms ``psi = W^{-1/2} v``.

    Returns
    -------
    d : ndarray of shape (9,)
    psi : ndarray of shape (3, H, 9)
        ``psi[k, :, l]`` is block ``k`` of eigenfunction ``l`` on the grid.
    points : ndarray of shape (H,)
    """
    if H < 50:
        raise ValueError("H must be at least 50")
    grid = build_grid(DOMAIN, H)
    tau = grid.points
    C = np.block([[true_covariance(k, k2, tau, tau, rho) for k2 in (1, 2, 3)] for k in (1, 2, 3)])
    sw = np.sqrt(np.tile(grid.weights, 3))
    A = sw[:, None] * C * sw[None, :]
    vals, vecs = np.linalg.eigh((A + A.T) / 2)
    order = np.argsort(vals)[::-1][:N_TRUE_COMPONENTS]
    psi = (vecs[:, order] / sw[:, None]).reshape(3, H, N_TRUE_COMPONENTS)
    return vals[order], psi, tau


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    sigma2: float
    rho: float
    m_range: Tuple[int, ...] = (3, 4, 5, 6, 7)
    seed: int = 0
    replicate_index: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        if not 0 <= self.rho <= 1:
            raise ValueError("rho must lie in [0, 1]")
        if not self.m_range:
            raise ValueError("m_range must be nonempty")

    def replicate(self, index: int) -> "ScenarioConfig":
        return ScenarioConfig(self.n, self.sigma2, self.rho, tuple(self.m_range), self.seed, index)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["m_range"] = list(self.m_range)
        return d


SCENARIOS = {
    1: dict(n=25, sigma2=0.1, rho=0.5),
    2: dict(n=100, sigma2=0.25, rho=0.5),
    3: dict(n=500, sigma2=0.5, rho=0.5),
    4: dict(n=25, sigma2=0.1, rho=0.9),
    5: dict(n=100, sigma2=0.25, rho=0.9),
    6: dict(n=500, sigma2=0.5, rho=0.9),
}


def scenario(number: int, seed: int = 0, replicate_index: int = 0) -> ScenarioConfig:
    if number not in SCENARIOS:
        raise ValueError(f"unknown scenario {number}; expected 1..6")
    return ScenarioConfig(**SCENARIOS[number], seed=seed, replicate_index=replicate_index)


@dataclass(eq=False)
class TruthBundle:
    """Ground truth of one simulated replicate.

    ``scores`` are the simulated multivariate scores (n x 9), paired with
    ``eigenvalues`` and the coefficient eigenvectors ``coef_vectors``.
    """

    rho: float
    eigenvalues: np.ndarray
    coef_vectors: np.ndarray
    scores: np.ndarray
    subject_ids: list

    def mean(self, k: int, t) -> np.ndarray:
        return mean_function(k, _check_points(t))

    def eigenfunctions(self, k: int, t) -> np.ndarray:
        """Block ``k`` of all 9 true eigenfunctions at ``t``, shape ``(len(t), 9)``."""
        return basis_functions(k, _check_points(t)) @ self.coef_vectors[3 * (k - 1): 3 * k]

    def covariance(self, k: int, k2: int, s, t) -> np.ndarray:
        return true_covariance(k, k2, s, t, self.rho)

    def centered_curves(self, k: int, t) -> np.ndarray:
        """``X_i(t) - mu(t)`` for every subject, shape ``(n, len(t))``."""
        return self.scores @ self.eigenfunctions(k, t).T

    def curves(self, k: int, t) -> np.ndarray:
        return self.mean(k, t)[None, :] + self.centered_curves(k, t)

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "eigenvalues": self.eigenvalues.tolist(),
            "coef_vectors": self.coef_vectors.tolist(),
            "scores": self.scores.tolist(),
            "subject_ids": list(self.subject_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TruthBundle":
        return cls(float(d["rho"]), np.array(d["eigenvalues"]), np.array(d["coef_vectors"]),
                   np.array(d["scores"]).reshape(-1, N_TRUE_COMPONENTS), list(d["subject_ids"]))


def subject_stream(seed: int, replicate: int, subject: int, stream: int) -> np.random.Generator:
    """Independent Philox stream for one (replicate, subject, stream) triple.

    ``stream`` 0 draws the subject's scores; ``stream`` k draws variable k's
    observation count, times and noise.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replicate), int(subject), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def generate(config: ScenarioConfig):
    """Simulate one replicate.

    Returns
    -------
    dataset : SparseDataset
        Subject ids ``"1".."n"``, variables ``X1, X2, X3`` on [0, 1].
    truth : TruthBundle
    """
    d, V = exact_mv_eigen(config.rho)
    sd = np.sqrt(np.clip(d, 0, None))
    m_choices = np.asarray(config.m_range, dtype=int)
    n = config.n
    scores = np.empty((n, N_TRUE_COMPONENTS))
    times = [[None] * n for _ in range(N_VARIABLES)]
    values = [[None] * n for _ in range(N_VARIABLES)]
    noise_sd = np.sqrt(config.sigma2)
    for i in range(n):
        scores[i] = sd * subject_stream(config.seed, config.replicate_index, i, 0).standard_normal(N_TRUE_COMPONENTS)
        for k in range(1, N_VARIABLES + 1):
            rng = subject_stream(config.seed, config.replicate_index, i, k)
            m = int(rng.choice(m_choices))
            t = rng.uniform(DOMAIN[0], DOMAIN[1], size=m)
            e = rng.standard_normal(m) * noise_sd
            order = np.argsort(t, kind="stable")
            t = t[order]
            x = mean_function(k, t) + basis_functions(k, t) @ (V[3 * (k - 1): 3 * k] @ scores[i])
            times[k - 1][i] = t
            values[k - 1][i] = x + e[order]
    ids = [str(i + 1) for i in range(n)]
    dataset = SparseDataset(ids, list(VARIABLE_NAMES), [DOMAIN] * N_VARIABLES, times, values,
                            metadata={"scenario": config.to_dict()})
    truth = TruthBundle(float(config.rho), np.array(d), np.array(V), scores, ids)
    return dataset, truth
