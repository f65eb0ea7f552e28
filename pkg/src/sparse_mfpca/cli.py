"""Command-line interface.

Exit codes: 0 success, 2 usage error (bad flags, missing files, empty
input), 3 data error (malformed CSV or archive), 4 numerical failure. Errors
are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .archive import load_model, save_model
from .benchmark import run_benchmark
from .csvio import EmptyDataError, read_long_csv, write_long_csv
from .exceptions import BenchmarkFailedError, DataFormatError, FPCAError, NumericalError, SelectionError
from .estimators import MultivariateFPCA
from .simulation import SCENARIOS, ScenarioConfig, generate, scenario as make_scenario

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

# config-file key -> MultivariateFPCA parameter
CONFIG_KEYS = {
    "basis": "basis",
    "n_basis": "n_basis",
    "n_components": "n_components_univariate",
    "mv_components": "n_components",
    "n_grid": "n_grid",
    "weights": "weights",
    "gtol": "gtol",
    "ftol": "ftol",
    "max_iter": "max_iter",
    "seed": "random_state",
    "mean": "mean",
}
EXTRA_KEYS = {"domains"}

logger = logging.getLogger("sparse_mfpca")


class UsageError(Exception):
    pass


def load_config(path):
    """Read a JSON config; returns (estimator options, extras). Missing keys keep defaults."""
    if path is None:
        return {}, {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    unknown = set(raw) - set(CONFIG_KEYS) - EXTRA_KEYS
    if unknown:
        raise UsageError(f"{path}: unknown config key(s) {sorted(unknown)}")
    options = {CONFIG_KEYS[k]: v for k, v in raw.items() if k in CONFIG_KEYS}
    extras = {k: raw[k] for k in EXTRA_KEYS if k in raw}
    return options, extras


def _parse_transform(values):
    if not values:
        return None
    if len(values) == 1 and "=" not in values[0]:
        return values[0]
    out = {}
    for item in values:
        if "=" not in item:
            raise UsageError("mix of global and per-variable --transform values")
        var, name = item.split("=", 1)
        out[var] = name
    return out


def _provenance(seed=None):
    return {
        "seed": seed,
        "command": " ".join(sys.argv) if sys.argv else "",
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
    }


def _require_file(path, what):
    if not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")


def cmd_simulate(args):
    explicit = [args.n, args.sigma2, args.rho]
    if args.scenario is not None and any(v is not None for v in explicit):
        raise UsageError("--scenario conflicts with --n/--sigma2/--rho")
    if args.scenario is None:
        if any(v is None for v in explicit):
            raise UsageError("give --scenario or all of --n, --sigma2, --rho")
        base = ScenarioConfig(args.n, args.sigma2, args.rho, seed=args.seed)
    else:
        if args.scenario not in SCENARIOS:
            raise UsageError(f"unknown scenario {args.scenario}; expected 1..6")
        base = make_scenario(args.scenario, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for r in range(args.replicates):
        data, truth = generate(base.replicate(r))
        write_long_csv(data, out / f"data_r{r}.csv")
        bundle = {"scenario": base.replicate(r).to_dict(), "truth": truth.to_dict()}
        (out / f"truth_r{r}.json").write_text(json.dumps(bundle) + "\n", encoding="utf-8")
    config = {"domains": [list(d) for d in data.domains]}
    (out / "config.json").write_text(json.dumps(config, indent=1) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_fit(args):
    _require_file(args.data, "data file")
    options, extras = load_config(args.config)
    if args.seed is not None:
        options["random_state"] = args.seed
    if options.get("mean", "estimate") != "estimate":
        raise UsageError("fit supports only mean='estimate'")
    data = read_long_csv(args.data, transform=_parse_transform(args.transform),
                         min_visits=args.min_visits, domains=extras.get("domains"))
    try:
        est = MultivariateFPCA(**options)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    est.fit(data)
    prov = _provenance(seed=est.random_state)
    prov.update(data=str(args.data), transform=_parse_transform(args.transform), min_visits=args.min_visits)
    save_model(est, args.out, prov)
    logger.info("fitted M=%d multivariate components", est.n_components_)
    return EXIT_OK


def _points(est, n):
    if n < 2:
        raise UsageError("--points must be at least 2")
    return [np.linspace(a, b, n) for a, b in est.domains_]


def cmd_eval_grid(args):
    _require_file(args.model, "model file")
    est = load_model(args.model)
    pts = _points(est, args.points)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    variables = est.variables_
    with open(out / "mean.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("variable", "t", "mean"))
        for k, var in enumerate(variables):
            for t, v in zip(pts[k], est.univariate_estimators_[k].mean_(pts[k])):
                w.writerow((var, repr(float(t)), repr(float(v))))
    with open(out / "univariate_eigenfunctions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("variable", "component", "t", "value"))
        for k, var in enumerate(variables):
            phi = est.univariate_[k].eigenfunctions(pts[k])
            for q in range(phi.shape[1]):
                for t, v in zip(pts[k], phi[:, q]):
                    w.writerow((var, q + 1, repr(float(t)), repr(float(v))))
    psi = est.eigenfunctions(pts)
    with open(out / "mv_eigenfunctions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("component", "variable", "t", "value"))
        for l in range(est.n_components_):
            for k, var in enumerate(variables):
                for t, v in zip(pts[k], psi[k][:, l]):
                    w.writerow((l + 1, var, repr(float(t)), repr(float(v))))
    with open(out / "covariance.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("variable_s", "variable_t", "s", "t", "value"))
        for k, var in enumerate(variables):
            for k2, var2 in enumerate(variables):
                C = est.covariance(k, k2, pts[k], pts[k2])
                for a, s in enumerate(pts[k]):
                    for b, t in enumerate(pts[k2]):
                        w.writerow((var, var2, repr(float(s)), repr(float(t)), repr(float(C[a, b]))))
    return EXIT_OK


def cmd_scores(args):
    _require_file(args.model, "model file")
    est = load_model(args.model)
    mv = est.model_
    header = ["subject_id"]
    blocks = []
    for k, sm in enumerate(mv.univariate_scores):
        header += [f"{mv.variables[k]}_xi{q + 1}" for q in range(sm.n_components)]
        blocks.append(sm.values)
    header += [f"rho{l + 1}" for l in range(mv.M)]
    blocks.append(mv.scores)
    table = np.hstack(blocks)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for sid, row in zip(mv.subject_ids, table):
            w.writerow([sid] + [repr(float(x)) for x in row])
    return EXIT_OK


def cmd_reconstruct(args):
    _require_file(args.model, "model file")
    est = load_model(args.model)
    mv = est.model_
    if args.subjects in (None, "all"):
        idx = list(range(len(mv.subject_ids)))
    else:
        wanted = [s.strip() for s in args.subjects.split(",") if s.strip()]
        lookup = {sid: i for i, sid in enumerate(mv.subject_ids)}
        missing = [s for s in wanted if s not in lookup]
        if missing:
            raise UsageError(f"unknown subject id(s): {', '.join(missing)}")
        idx = [lookup[s] for s in wanted]
    pts = _points(est, args.points)
    curves = est.inverse_transform(mv.scores[idx], pts)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("subject_id", "variable", "t", "fitted"))
        for row, i in enumerate(idx):
            for k, var in enumerate(mv.variables):
                for t, v in zip(pts[k], curves[k][row]):
                    w.writerow((mv.subject_ids[i], var, repr(float(t)), repr(float(v))))
    return EXIT_OK


def cmd_benchmark(args):
    if args.scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {args.scenario}; expected 1..6")
    if args.replicates < 1:
        raise UsageError("--replicates must be at least 1")
    options, extras = load_config(args.config)
    if extras:
        raise UsageError("benchmark configs do not accept 'domains'")
    report = run_benchmark(args.scenario, args.replicates, seed=args.seed, options=options, n_jobs=args.n_jobs)
    report.write(args.out)
    prov = _provenance(seed=args.seed)
    (Path(args.out) / "provenance.json").write_text(json.dumps(prov, indent=1) + "\n", encoding="utf-8")
    for key, agg in report.aggregates.items():
        print(f"{key}: median={agg['median']:.4g} iqr={agg['iqr']:.4g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparse-mfpca", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write simulated replicates as long CSV plus truth bundles")
    p.add_argument("--scenario", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model to a long CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--transform", action="append", metavar="[VAR=]sqrt|log2|none")
    p.add_argument("--min-visits", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval-grid", help="evaluate fitted functions on an equally spaced grid")
    p.add_argument("--model", required=True)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_grid)

    p = sub.add_parser("scores", help="write univariate and multivariate scores")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scores)

    p = sub.add_parser("reconstruct", help="write fitted trajectories")
    p.add_argument("--model", required=True)
    p.add_argument("--subjects", default="all", help="comma-separated ids or 'all'")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("benchmark", help="Monte-Carlo benchmark of a simulation scenario")
    p.add_argument("--scenario", type=int, required=True)
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("--n-jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)
    return parser


def _fail(code, exc):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    failures = getattr(exc, "failures", None)
    if isinstance(failures, dict):
        err["failures"] = {str(k): str(v) for k, v in failures.items()}
    elif failures is not None:
        err["failures"] = failures
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, EmptyDataError) as exc:
        return _fail(EXIT_USAGE, exc)
    except (NumericalError, SelectionError, BenchmarkFailedError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except (DataFormatError, FPCAError, ValueError) as exc:
        return _fail(EXIT_DATA, exc)
    except OSError as exc:
        return _fail(EXIT_USAGE, exc)


if __name__ == "__main__":
    sys.exit(main())
