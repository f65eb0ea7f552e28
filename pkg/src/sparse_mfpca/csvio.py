"""Long-format CSV ingestion and emission (``subject_id, variable, t, y``)."""

from __future__ import annotations

import csv
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from .data import SparseDataset
from .exceptions import DataFormatError

COLUMNS = ("subject_id", "variable", "t", "y")


class EmptyDataError(DataFormatError):
    """The file holds no usable rows."""


def _transform_fn(name):
    if name in (None, "none"):
        return None
    if name == "sqrt":
        return np.sqrt, lambda y: y >= 0, "nonnegative"
    if name == "log2":
        return np.log2, lambda y: y > 0, "positive"
    raise ValueError(f"unknown transform {name!r}; expected sqrt, log2 or none")


def _transforms_by_variable(transform) -> Dict[Optional[str], object]:
    if transform is None or isinstance(transform, str):
        return {None: _transform_fn(transform)}
    return {var: _transform_fn(name) for var, name in dict(transform).items()}


def read_long_csv(path: Union[str, Path], transform=None, min_visits: Optional[int] = None,
                  domains=None) -> SparseDataset:
    """Parse a long CSV into a :class:`SparseDataset`.

    Parameters
    ----------
    path : str or Path
    transform : str or dict, optional
        ``'sqrt'``, ``'log2'`` or ``'none'`` for every variable, or a mapping
        from variable name to one of those.
    min_visits : int, optional
        Drop subjects observed at fewer than this many distinct times
        (pooled over variables). ``2`` keeps subjects with a follow-up visit.
    domains : dict or sequence, optional
        Per-variable ``(a, b)``; defaults to the observed time range.

    Subjects and variables keep their order of first appearance; times are
    sorted within each subject and variable.

    Raises
    ------
    DataFormatError
        Missing columns, unparseable or non-finite numbers, values outside a
        transform's domain. Messages cite ``file:line``.
    EmptyDataError
        No data rows (before or after filtering).
    """
    path = Path(path)
    transforms = _transforms_by_variable(transform)
    rows: "OrderedDict[str, OrderedDict[str, list]]" = OrderedDict()
    variables = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataError(f"{path}: file is empty")
        header = [h.strip() for h in header]
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise DataFormatError(f"{path}:1: missing column(s) {', '.join(missing)}")
        idx = [header.index(c) for c in COLUMNS]
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise DataFormatError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            sid, var, t_raw, y_raw = (row[i].strip() for i in idx)
            if not sid or not var:
                raise DataFormatError(f"{path}:{line_no}: empty subject_id or variable")
            try:
                t, y = float(t_raw), float(y_raw)
            except ValueError:
                raise DataFormatError(f"{path}:{line_no}: cannot parse number in t={t_raw!r}, y={y_raw!r}") from None
            if not (np.isfinite(t) and np.isfinite(y)):
                raise DataFormatError(f"{path}:{line_no}: non-finite value")
            spec = transforms.get(var, transforms.get(None))
            if spec is not None:
                fn, ok, what = spec
                if not ok(y):
                    raise DataFormatError(f"{path}:{line_no}: y={y_raw} must be {what} for the transform")
                y = float(fn(y))
            if var not in variables:
                variables.append(var)
            rows.setdefault(sid, OrderedDict()).setdefault(var, []).append((t, y))
    if not rows:
        raise EmptyDataError(f"{path}: no data rows")
    unknown = set(k for k in transforms if k is not None) - set(variables)
    if unknown:
        raise DataFormatError(f"{path}: transform given for unknown variable(s) {sorted(unknown)}")
    if min_visits is not None:
        rows = OrderedDict(
            (sid, per_var) for sid, per_var in rows.items()
            if len({t for obs in per_var.values() for t, _ in obs}) >= min_visits
        )
        if not rows:
            raise EmptyDataError(f"{path}: no subject has at least {min_visits} visits")
    ids = list(rows)
    times, values = [], []
    for var in variables:
        tk, yk = [], []
        for sid in ids:
            obs = sorted(rows[sid].get(var, []), key=lambda o: o[0])
            tk.append(np.array([o[0] for o in obs], dtype=float))
            yk.append(np.array([o[1] for o in obs], dtype=float))
        times.append(tk)
        values.append(yk)
    doms = _resolve_domains(domains, variables, times)
    return SparseDataset(ids, variables, doms, times, values, metadata={"source": str(path)})


def _resolve_domains(domains, variables, times):
    if domains is None:
        out = []
        for tk in times:
            allt = np.concatenate(tk)
            out.append((float(allt.min()), float(allt.max())))
        return out
    if isinstance(domains, dict):
        domains = [domains[v] for v in variables]
    domains = [tuple(float(x) for x in d) for d in domains]
    if len(domains) != len(variables):
        raise DataFormatError(f"expected {len(variables)} domains, got {len(domains)}")
    return domains


def write_long_csv(dataset: SparseDataset, path: Union[str, Path]) -> None:
    """Emit a dataset in the long format; floats use their shortest exact repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for i, sid in enumerate(dataset.subject_ids):
            for k, var in enumerate(dataset.variables):
                for t, y in zip(dataset.times[k][i], dataset.values[k][i]):
                    writer.writerow((sid, var, repr(float(t)), repr(float(y))))
