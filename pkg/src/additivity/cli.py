"""Command-line interface.

Commands::

    additivity test          run a significance / total / partial test on a CSV file
    additivity simulate      run a Monte Carlo campaign (newline-delimited JSON)
    additivity grid-preview  print the resolved test grid, one JSON line per point

Every option can also come from ``--config FILE``, a ``key = value`` file whose
keys are the long option names (``n-tilde = 50``).  Command-line flags win.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import platform
import sys
import time
import warnings
from pathlib import Path
from typing import Any, Sequence

import numba
import numpy as np
import scipy

from . import __version__
from .ensemble import InternalConfig
from .errors import AdditivityError, ConfigurationError, IngestionError
from .grid import FeatureGroup, TestGrid, check_interior, make_grid, quantile_group
from .hypotest import DEFAULT_ALPHA, end_to_end_test
from .numerics import RngStream
from .rptest import ProjectionConfig, run_projection_test
from .simlab import METHODS, REGISTRY, SimSpec, run_campaign
from .tree import Dataset, TreeConfig

EXIT_OK = 0
EXIT_ERROR = 2

_MISSING = {"", "na", "nan", "null", "none"}


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def ingest_csv(path, response: str | None = None, features: Sequence[str] | None = None) -> Dataset:
    """Read a headed numeric CSV file.

    The response is the column named ``response`` (default: the last column);
    features are ``features`` (default: every other column).
    """
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path}: file is empty (header row required)") from None
        body = [row for row in reader if any(cell.strip() for cell in row)]
    if not body:
        raise IngestionError(f"{path}: no data rows after the header")
    if len(set(header)) != len(header):
        raise IngestionError(f"{path}: duplicate column names in header {header}")

    response = response or header[-1]
    if response not in header:
        raise IngestionError(f"{path}: response column {response!r} not in header {header}")
    features = list(features) if features else [h for h in header if h != response]
    missing = [f for f in features if f not in header]
    if missing:
        raise IngestionError(f"{path}: feature columns {missing} not in header {header}")
    if response in features:
        raise IngestionError(f"{path}: column {response!r} is both response and feature")

    wanted = features + [response]
    cols = [header.index(c) for c in wanted]
    values = np.empty((len(body), len(wanted)))
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise IngestionError(f"{path}: data row {r + 1} has {len(row)} cells, header has {len(header)}")
        for out_col, (name, c) in enumerate(zip(wanted, cols)):
            cell = row[c].strip()
            try:
                if cell.lower() in _MISSING:
                    raise ValueError
                value = float(cell)
                if not math.isfinite(value):
                    raise ValueError
            except ValueError:
                raise IngestionError(
                    f"{path}: non-numeric or missing value {cell!r} at data row {r + 1}, column {name!r}"
                ) from None
            values[r, out_col] = value
    return Dataset(values[:, :-1], values[:, -1], tuple(features), response)


def write_csv(data: Dataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*data.feature_names, data.response_name])
        for x, y in zip(data.features, data.response):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])


# ---------------------------------------------------------------------------
# grid parsing
# ---------------------------------------------------------------------------


def _split(text: str, sep: str) -> list[str]:
    return [part.strip() for part in text.split(sep) if part.strip()]


def _resolve_feature(token: str, names: Sequence[str]) -> int:
    if token in names:
        return names.index(token)
    try:
        idx = int(token)
    except ValueError:
        raise ConfigurationError(f"unknown feature {token!r}; columns are {list(names)}") from None
    if not 0 <= idx < len(names):
        raise ConfigurationError(f"feature index {idx} out of range for {len(names)} features")
    return idx


def parse_groups(spec: str | None, names: Sequence[str]) -> list[tuple[int, ...]]:
    """``"a,b;c"`` -> ``[(0, 1), (2,)]``; default one group per feature."""
    if not spec:
        return [(i,) for i in range(len(names))]
    return [tuple(_resolve_feature(t, names) for t in _split(g, ",")) for g in _split(spec, ";")]


def parse_levels(spec: str, groups: Sequence[tuple[int, ...]]) -> list[np.ndarray]:
    """``"0.2,0.4;1:2,3:4"``: groups separated by ``;``, levels by ``,``, vector entries by ``:``."""
    per_group = _split(spec, ";")
    if len(per_group) == 1 and len(groups) > 1:
        per_group = per_group * len(groups)
    if len(per_group) != len(groups):
        raise ConfigurationError(f"got level lists for {len(per_group)} groups, expected {len(groups)}")
    out = []
    for members, text in zip(groups, per_group):
        rows = []
        for level in _split(text, ","):
            vec = [float(v) for v in _split(level, ":")]
            if len(vec) != len(members):
                raise ConfigurationError(
                    f"level {level!r} has {len(vec)} entries, group {members} has {len(members)} features"
                )
            rows.append(vec)
        out.append(np.asarray(rows))
    return out


def parse_probs(spec: str, n_groups: int) -> list[list[float]]:
    per_group = _split(spec, ";")
    if len(per_group) == 1:
        per_group = per_group * n_groups
    if len(per_group) != n_groups:
        raise ConfigurationError(f"got quantile lists for {len(per_group)} groups, expected {n_groups}")
    return [[float(p) for p in _split(text, ",")] for text in per_group]


def resolve_grid(args, names: Sequence[str], data: Dataset | None) -> TestGrid:
    groups = parse_groups(args.groups, names)
    if args.levels and args.quantiles:
        raise ConfigurationError("use either --levels or --quantiles, not both")
    if args.levels:
        feature_groups = [FeatureGroup(m, lv) for m, lv in zip(groups, parse_levels(args.levels, groups))]
    elif args.quantiles:
        if data is None:
            raise ConfigurationError("--quantiles needs --input data")
        probs = parse_probs(args.quantiles, len(groups))
        feature_groups = [quantile_group(data, m, p) for m, p in zip(groups, probs)]
    else:
        raise ConfigurationError("a grid needs --levels or --quantiles")
    return make_grid(feature_groups, n_features=len(names))


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; keys are long option names")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: all cores)")
    p.add_argument("--out", help="write the report here instead of stdout")


def _add_grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="CSV file with a header row")
    p.add_argument("--response", help="response column (default: last column)")
    p.add_argument("--features", help="comma-separated feature columns (default: all but the response)")
    p.add_argument("--groups", help="feature groups, e.g. 'x1,x2;x3' (names or zero-based indices)")
    p.add_argument("--levels", help="explicit levels per group, e.g. '0.2,0.4;0.3,0.5'")
    p.add_argument("--quantiles", help="quantile probabilities, e.g. '0.2,0.4,0.6,0.8'")


def _add_tree(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-node-size", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=None)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="additivity", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test a CSV dataset")
    _add_grid(t)
    t.add_argument("--kind", choices=("significance", "total", "partial"), default="total")
    t.add_argument("--k", type=int, help="subsample size (default: ceil(sqrt(n)))")
    t.add_argument("--n-tilde", type=int, default=50)
    t.add_argument("--n-mc", type=int, default=250)
    t.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    t.add_argument("--project", action="store_true", help="use the random-projection test")
    t.add_argument("--r", type=int, default=5)
    t.add_argument("--M", type=int, default=1000)
    _add_tree(t)
    _add_common(t)

    s = sub.add_parser("simulate", help="Monte Carlo alpha-level / power campaign")
    s.add_argument("--function", required=False, choices=sorted(REGISTRY))
    s.add_argument("--method", choices=METHODS, default="ensemble")
    s.add_argument("--project", action="store_true", help="shorthand for --method projection")
    s.add_argument("--kind", choices=("significance", "total", "partial"))
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--k", type=int, default=50)
    s.add_argument("--n-tilde", type=int, default=50)
    s.add_argument("--n-mc", type=int, default=250)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--noise-sd", type=float, default=0.05)
    s.add_argument("--beta", type=float, default=0.0)
    s.add_argument("--levels", help="per-axis levels, e.g. '0.2,0.4,0.6,0.8' or one list per axis with ';'")
    s.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    s.add_argument("--r", type=int, default=5)
    s.add_argument("--M", type=int, default=1000)
    _add_tree(s)
    _add_common(s)

    g = sub.add_parser("grid-preview", help="print the resolved test grid")
    _add_grid(g)
    g.add_argument("--out", help="also write the grid as one JSON document")
    g.add_argument("--config", help="key = value file; keys are long option names")
    return parser


def _read_config(path: str) -> dict[str, str]:
    text = Path(path).read_text(encoding="utf-8")
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text)
    out: dict[str, str] = {}
    for section in cp.sections():
        out.update(cp[section])
    return out


def parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    # config values are spliced in front of the real flags so flags win
    injected: list[str] = [args.command]
    sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    flags = {opt: action for action in sub._actions for opt in action.option_strings}  # noqa: SLF001
    for key, value in _read_config(args.config).items():
        opt = "--" + key.strip().replace("_", "-")
        action = flags.get(opt)
        if action is None:
            raise ConfigurationError(f"unknown key {key!r} in config file {args.config}")
        if action.nargs == 0:
            if value.strip().lower() in {"1", "true", "yes", "on"}:
                injected.append(opt)
        else:
            injected += [opt, value]
    return parser.parse_args(injected + argv[1:])


def _provenance(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "config": {k: v for k, v in vars(args).items()},
        "seed": getattr(args, "seed", None),
        "versions": {
            "additivity": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
    }


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_data(args) -> Dataset:
    features = _split(args.features, ",") if args.features else None
    return ingest_csv(args.input, args.response, features)


def cmd_test(args) -> dict[str, Any]:
    if not args.input:
        raise ConfigurationError("test needs --input")
    data = _load_data(args)
    grid = resolve_grid(args, list(data.feature_names), data)
    k = args.k if args.k is not None else min(data.n - 1, math.ceil(math.sqrt(data.n)))
    if k > 1.5 * math.sqrt(data.n):
        warnings.warn(
            f"subsample size k={k} is large relative to sqrt(n)={math.sqrt(data.n):.1f}; "
            "the normal approximation assumes k grows slower than sqrt(n)",
            stacklevel=2,
        )
    check_interior(grid, data)
    tree_cfg = TreeConfig(min_node_size=args.min_node_size, max_depth=args.max_depth)
    root = RngStream(args.seed)
    cfg = InternalConfig(k, args.n_tilde, args.n_mc, root.child(1))
    if args.project:
        proj = ProjectionConfig(args.r, args.M, root.child(2))
        report = run_projection_test(data, grid, args.kind, tree_cfg, cfg, proj, args.alpha, args.threads)
    else:
        report = end_to_end_test(data, grid, args.kind, tree_cfg, cfg, args.alpha, args.threads)
    return {
        "command": "test",
        "projected": bool(args.project),
        "report": report.to_dict(),
        "data": {"n": data.n, "d": data.d, "features": list(data.feature_names), "response": data.response_name},
        "grid": {
            "shape": list(grid.shape),
            "groups": [[data.feature_names[m] for m in g.members] for g in grid.groups],
            "levels": [g.levels.tolist() for g in grid.groups],
        },
    }


def cmd_simulate(args) -> SimSpec:
    if not args.function:
        raise ConfigurationError("simulate needs --function")
    method = "projection" if args.project else args.method
    model = REGISTRY[args.function]
    levels = None
    if args.levels:
        lists = [tuple(float(v) for v in _split(part, ",")) for part in _split(args.levels, ";")]
        levels = tuple(lists * model.d) if len(lists) == 1 else tuple(lists)
    return SimSpec(
        function_id=args.function,
        n=args.n,
        k=args.k,
        n_tilde=args.n_tilde,
        n_mc=args.n_mc,
        kind=args.kind,
        replications=args.reps,
        noise_sd=args.noise_sd,
        seed=args.seed,
        beta=args.beta,
        method=method,
        levels=levels,
        alpha=args.alpha,
        r=args.r,
        M=args.M,
        tree=TreeConfig(min_node_size=args.min_node_size, max_depth=args.max_depth),
    )


def cmd_grid_preview(args) -> tuple[TestGrid, list[str]]:
    if args.input:
        data = _load_data(args)
        names = list(data.feature_names)
    else:
        if not args.groups:
            raise ConfigurationError("grid-preview without --input needs --groups (zero-based indices)")
        try:
            members = [int(t) for g in _split(args.groups, ";") for t in _split(g, ",")]
        except ValueError:
            raise ConfigurationError("without --input, --groups must use zero-based feature indices") from None
        data = None
        names = [f"x{i + 1}" for i in range(max(members) + 1)]
    return resolve_grid(args, names, data), names


def main(argv: Sequence[str] | None = None) -> int:
    start = time.perf_counter()
    captured: list[str] = []
    try:
        args = parse_args(argv)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if args.command == "test":
                doc = cmd_test(args)
            elif args.command == "simulate":
                spec = cmd_simulate(args)
                result = run_campaign(spec, threads=args.threads)
            else:
                grid, names = cmd_grid_preview(args)
        captured = [str(w.message) for w in caught]
        for msg in captured:
            print(f"warning: {msg}", file=sys.stderr)

        if args.command == "test":
            doc.update(_provenance(args))
            doc["warnings"] = captured
            doc["wall_time"] = time.perf_counter() - start
            _emit(json.dumps(doc, indent=2), args.out)
        elif args.command == "simulate":
            rows = result.rows()
            rows[-1].update(_provenance(args))
            rows[-1]["warnings"] = captured
            _emit("\n".join(json.dumps(r) for r in rows), args.out)
        else:
            records = []
            for rec in grid.describe():
                rec["point"] = dict(zip(names, rec["point"]))
                records.append(rec)
                print(json.dumps(rec))
            if args.out:
                _emit(json.dumps({"shape": list(grid.shape), "points": records}, indent=2), args.out)
        return EXIT_OK
    except (AdditivityError, KeyError, ValueError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc).strip("'\"")}
        print(json.dumps(err))
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
