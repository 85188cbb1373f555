"""Command line entry point: ``relclust QUERY.json --k K [options]``.

The query file names each relation's CSV file and attribute list:

    {"relations": {"R1": {"path": "r1.csv", "attributes": ["A", "B"]}, ...},
     "attributes": ["A", "B", "C"],
     "ghd": {"bags": [["A", "B", "C"]], "edges": [], "cover": [{"R": 0.5, ...}]}}

Paths are relative to the query file.  ``attributes`` and ``ghd`` are optional.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import oracle
from .errors import ParseError, RelClustError, SchemaMismatch
from .ghd import DEFAULT_BAG_BUDGET, GHDSpec
from .pipeline import RunConfig, run
from .relational import Database, JoinQuery, Relation

log = logging.getLogger("relclust")


def read_csv(path: Path, attrs: list[str]) -> np.ndarray:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}:1: missing header row")
        header = [h.strip() for h in header]
        missing = [a for a in attrs if a not in header]
        if missing:
            raise SchemaMismatch(f"{path}: columns {missing} not in header {header}")
        cols = [header.index(a) for a in attrs]
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for c in cols:
                try:
                    v = float(row[c])
                except ValueError:
                    raise ParseError(f"{path}:{reader.line_num}: not a number: {row[c]!r}") from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}:{reader.line_num}: non-finite value {row[c]!r}")
                vals.append(v)
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, len(attrs))


def ingest(spec_path) -> tuple[Database, JoinQuery, GHDSpec | None]:
    spec_path = Path(spec_path)
    try:
        spec = json.loads(spec_path.read_text())
    except OSError as exc:
        raise ParseError(f"{spec_path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{spec_path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(spec, dict) or not isinstance(spec.get("relations"), dict) or not spec["relations"]:
        raise ParseError(f"{spec_path}: expected an object with a non-empty 'relations' map")
    rels = []
    for name, entry in spec["relations"].items():
        try:
            path, attrs = entry["path"], list(entry["attributes"])
        except (KeyError, TypeError):
            raise ParseError(f"{spec_path}: relation {name!r} needs 'path' and 'attributes'") from None
        rels.append(Relation(name, tuple(attrs), read_csv(spec_path.parent / path, attrs)))
    db = Database(rels)
    try:
        query = JoinQuery.from_database(db, attributes=spec.get("attributes"))
    except RelClustError as exc:
        raise SchemaMismatch(str(exc)) from None
    ghd = None
    if spec.get("ghd"):
        g = spec["ghd"]
        ghd = GHDSpec(g["bags"], g.get("edges", []), g.get("cover"))
    return db, query, ghd


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relclust", description="k-median / k-means over a join without materializing it")
    p.add_argument("query", help="JSON query file")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--objective", choices=["median", "means"], default="median")
    p.add_argument("--mode", choices=["geometric", "discrete"], default="geometric")
    p.add_argument("--algorithm", choices=["slow", "fast"], default="fast")
    p.add_argument("--solver", choices=["auto", "exhaustive", "iterative"], default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="write the JSON report here instead of stdout")
    p.add_argument("--oracle", action="store_true", help="also materialize the join and report exact costs")
    p.add_argument("--budget", type=int, default=oracle.DEFAULT_BUDGET, help="tuple budget for --oracle")
    p.add_argument("--bag-budget", type=int, default=DEFAULT_BAG_BUDGET)
    p.add_argument("--sampler", choices=["binomial", "explicit"], default="binomial")
    p.add_argument("--max-samples", type=int, default=None)
    return p


def run_command(args: argparse.Namespace) -> dict:
    t0 = time.perf_counter()
    db, query, ghd = ingest(args.query)
    cfg = RunConfig(k=args.k, eps=args.epsilon, objective=args.objective, mode=args.mode,
                    algorithm=args.algorithm, solver=args.solver, seed=args.seed,
                    sampler=args.sampler, bag_budget=args.bag_budget)
    if args.max_samples is not None:
        cfg.max_samples = args.max_samples
    sol = run(db, query, cfg, ghd)
    report = {
        "attributes": list(sol.attributes),
        "centers": sol.centers.tolist(),
        "r_u": sol.r_u,
        "objective": args.objective,
        "mode": args.mode,
        "algorithm": args.algorithm,
        "solver": args.solver,
        "epsilon": args.epsilon,
        "k": args.k,
        "seed": args.seed,
        "diagnostics": {
            "join_size": sol.diagnostics["join_size"],
            "rect_queries": sol.stats["rect_queries"],
            "counting_passes": sol.stats["passes"],
            "tuples_touched": sol.stats["touched"],
            "samples": sol.stats["samples"],
            "nodes": [{"attributes": list(nd.attrs), "r_u": nd.r_u, **nd.diagnostics} for nd in sol.nodes],
            "wall_seconds": time.perf_counter() - t0,
        },
    }
    if args.oracle:
        mj = oracle.materialize(db, query, args.budget)
        attrs = list(sol.attributes)
        exact = oracle.exact_cost(mj, attrs, sol.centers, args.objective)
        best, best_cost = oracle.discrete_opt(mj, attrs, args.k, args.objective)
        report["oracle"] = {"join_size": len(mj), "exact_cost": exact,
                            "discrete_opt_centers": [list(c) for c in best], "discrete_opt_cost": best_cost}
    return report


def main(argv=None) -> int:
    level = os.environ.get("RELCLUST_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        report = run_command(args)
    except RelClustError as exc:
        print(f"relclust: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
