"""Principal component scores by conditional expectation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .data import check_sparse_sample


@dataclass(eq=False)
class ScoreMatrix:
    """Scores of ``n`` subjects on ``M`` components for one variable.

    ``underdetermined`` flags subjects observed at fewer than ``M`` times.
    """

    values: np.ndarray
    subject_ids: List[str]
    variable: Optional[str] = None
    underdetermined: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.subject_ids):
            raise ValueError("score rows must align with subject_ids")
        if self.underdetermined is None:
            self.underdetermined = np.zeros(len(self.subject_ids), dtype=bool)

    @property
    def n_components(self) -> int:
        return self.values.shape[1]


def conditional_scores(model, X, subject_ids=None, variable=None) -> ScoreMatrix:
    """``xi_i = Lam Phi_i' C_i^{-1} y_i`` for each subject's centered observations.

    Parameters
    ----------
    model : UnivariateModel
    X : sequence of (t, y)
        Centered observations.

    Subjects without observations get a zero row.
    """
    times, values = check_sparse_sample(X, model.basis.domain)
    n, M = len(times), model.n_components
    lam = model.eigenvalues
    s2 = model.noise_variance
    out = np.zeros((n, M))
    counts = np.array([t.size for t in times])
    for m in np.unique(counts[counts > 0]):
        idx = np.flatnonzero(counts == m)
        T = np.stack([times[i] for i in idx])
        Y = np.stack([values[i] for i in idx])
        F = model.eigenfunctions(T.ravel()).reshape(len(idx), m, M)
        C = np.einsum("imq,q,ikq->imk", F, lam, F)
        C = (C + np.swapaxes(C, 1, 2)) / 2
        C[:, np.arange(m), np.arange(m)] += s2
        v = np.linalg.solve(C, Y[:, :, None])[:, :, 0]
        out[idx] = np.einsum("imq,im->iq", F, v) * lam
    if subject_ids is None:
        subject_ids = [str(i + 1) for i in range(n)]
    return ScoreMatrix(out, list(subject_ids), variable, counts < M)
