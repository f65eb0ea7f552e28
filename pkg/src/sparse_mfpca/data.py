"""Sparse longitudinal data container and input validation helpers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .exceptions import AlignmentError, DomainError, InsufficientDataError


def check_sparse_sample(X, domain=None, allow_empty: bool = True):
    """Validate one variable's sparse sample.

    Parameters
    ----------
    X : sequence of (t, y) pairs
        One pair of equal-length 1-d arrays per subject.
    domain : (a, b), optional
        If given, every time must lie inside it.
    allow_empty : bool
        Whether subjects without observations are accepted.

    Returns
    -------
    times, values : list of ndarray
        Float copies, sorted by time within subject.
    """
    if isinstance(X, SparseDataset):
        raise TypeError("expected a single variable's sample; use dataset.sample(k)")
    times, values = [], []
    for i, pair in enumerate(X):
        try:
            t, y = pair
        except (TypeError, ValueError):
            raise ValueError(f"subject {i}: expected a (t, y) pair") from None
        t = np.atleast_1d(np.asarray(t, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if t.ndim != 1 or t.shape != y.shape:
            raise ValueError(f"subject {i}: t and y must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise ValueError(f"subject {i}: non-finite time or value")
        if not allow_empty and t.size == 0:
            raise InsufficientDataError(f"subject {i} has no observations")
        if domain is not None and t.size:
            a, b = domain
            tol = 1e-12 * (b - a)
            if t.min() < a - tol or t.max() > b + tol:
                raise DomainError(f"subject {i}: observation time outside [{a}, {b}]")
        order = np.argsort(t, kind="stable")
        times.append(t[order])
        values.append(y[order])
    if not times:
        raise InsufficientDataError("sample contains no subjects")
    return times, values


@dataclass
class SparseDataset:
    """Irregularly observed multivariate functional data.

    ``times[k][i]`` and ``values[k][i]`` hold subject ``i``'s observations
    of variable ``k``; arrays are sorted by time.
    """

    subject_ids: List[str]
    variables: List[str]
    domains: List[Tuple[float, float]]
    times: List[List[np.ndarray]]
    values: List[List[np.ndarray]]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        p = len(self.variables)
        if not (len(self.domains) == len(self.times) == len(self.values) == p):
            raise ValueError("variables, domains, times and values must have one entry per variable")
        n = len(self.subject_ids)
        for k in range(p):
            if len(self.times[k]) != n or len(self.values[k]) != n:
                raise AlignmentError(f"variable {self.variables[k]!r} does not cover every subject")
        self.domains = [tuple(float(v) for v in d) for d in self.domains]

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def index(self, variable) -> int:
        if isinstance(variable, (int, np.integer)):
            return int(variable)
        return self.variables.index(variable)

    def sample(self, variable) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Per-subject ``(t, y)`` pairs for one variable."""
        k = self.index(variable)
        return list(zip(self.times[k], self.values[k]))

    def pooled(self, variable):
        k = self.index(variable)
        return np.concatenate(self.times[k]), np.concatenate(self.values[k])

    def counts(self, variable) -> np.ndarray:
        k = self.index(variable)
        return np.array([t.size for t in self.times[k]])

    def with_values(self, variable, values: Sequence[np.ndarray]) -> "SparseDataset":
        k = self.index(variable)
        new_values = list(self.values)
        new_values[k] = [np.asarray(v, dtype=float) for v in values]
        return SparseDataset(
            list(self.subject_ids), list(self.variables), list(self.domains),
            list(self.times), new_values, dict(self.metadata),
        )

    def subset(self, subjects) -> "SparseDataset":
        """Restrict to the given subject ids (order preserved as given)."""
        lookup = {s: i for i, s in enumerate(self.subject_ids)}
        try:
            idx = [lookup[s] for s in subjects]
        except KeyError as exc:
            raise AlignmentError(f"unknown subject {exc.args[0]!r}") from None
        return SparseDataset(
            [self.subject_ids[i] for i in idx], list(self.variables), list(self.domains),
            [[tk[i] for i in idx] for tk in self.times],
            [[vk[i] for i in idx] for vk in self.values],
            dict(self.metadata),
        )

    @classmethod
    def from_samples(cls, samples, variables=None, domains=None, subject_ids=None) -> "SparseDataset":
        """Build from one ``[(t, y), ...]`` sample per variable."""
        samples = list(samples)
        p = len(samples)
        variables = list(variables) if variables is not None else [f"X{k + 1}" for k in range(p)]
        times, values = [], []
        for k, sample in enumerate(samples):
            dom = None if domains is None else domains[k]
            tk, vk = check_sparse_sample(sample, dom)
            times.append(tk)
            values.append(vk)
        n = len(times[0])
        if subject_ids is None:
            subject_ids = [str(i + 1) for i in range(n)]
        if domains is None:
            domains = []
            for tk in times:
                allt = np.concatenate(tk)
                domains.append((float(allt.min()), float(allt.max())))
        return cls(list(map(str, subject_ids)), variables, list(domains), times, values)
