"""Command-line interface: ``admgip {simulate,learn,score,evaluate,oracle}``.

Exit codes: 0 success, 1 runtime failure (including infeasible models and
rejected graphs), 2 usage error, 3 time limit reached with an incumbent.
Set ``ADMGIP_LOG_LEVEL`` (e.g. ``INFO``, ``DEBUG``) for progress logging.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .bnc import OPTIMAL, TIME_LIMIT, SolverConfig
from .candidates import CandidateLimitError, Limits, read_cache, read_component_list, write_cache
from .graph import (
    GraphError, c_components, find_almost_directed_cycle, find_directed_cycle, read_graph, to_text,
)
from .learn import candidate_pool, learn_from_pool
from .metrics import evaluate
from .oracle import MAX_ORACLE_NODES, oracle_search
from .scoring import GaussianDataset, LocalScorer, ScoringError, graph_bic
from .simulate import (
    five_node_instance, generate_instance, instance_from_ag, load_fixed_ag, write_bundle,
)

log = logging.getLogger("admgip")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_TIMEOUT = 3
LOG_ENV = "ADMGIP_LOG_LEVEL"


class UsageError(Exception):
    pass


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s")


def _load_data(path) -> GaussianDataset:
    try:
        data = GaussianDataset.from_csv(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    if data.n_samples < 3:
        raise UsageError(f"{path}: need at least 3 samples, found {data.n_samples}")
    return data


def _load_graph(path):
    try:
        return read_graph(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _emit(text: str, path=None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args) -> int:
    if args.ag is not None:
        inst = instance_from_ag(load_fixed_ag(args.ag), args.n, args.seed)
        extra = {"source": f"fixed ancestral graph {args.ag}"}
    elif args.five_node:
        inst = five_node_instance(args.n, args.seed)
        extra = {"source": "five-node DAG with node 0 hidden"}
    else:
        if args.d < 1 or args.latents < 0:
            raise UsageError("--d must be >= 1 and --latents >= 0")
        inst = generate_instance(args.d, args.latents, args.n, args.seed, args.max_parents)
        extra = {"source": "random DAG"}
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    try:
        write_bundle(inst, args.out, extra)
    except OSError as exc:
        log.error("cannot write bundle: %s", exc)
        return EXIT_FAIL
    print(f"wrote {args.out}: d={len(inst.observed)} latents={len(inst.latents)} N={args.n}")
    return EXIT_OK


def _limits(args, d: int) -> Limits:
    if args.unrestricted:
        return Limits.unrestricted(d)
    if min(args.max_parents, args.district_parents) < 0 or args.max_district < 1:
        raise UsageError("parent limits must be >= 0 and --max-district >= 1")
    return Limits(args.max_parents, args.max_district, args.district_parents)


def cmd_learn(args) -> int:
    data = _load_data(args.data)
    d = data.n_vars
    limits = _limits(args, d)
    include = read_component_list(args.include) if args.include else ()
    if args.cache and os.path.exists(args.cache):
        pool = read_cache(args.cache)
        log.info("read %d candidates from %s", len(pool), args.cache)
    else:
        try:
            pool = candidate_pool(data.covariance, data.n_samples, limits, include)
        except CandidateLimitError as exc:
            raise UsageError(str(exc)) from exc
        if args.cache:
            write_cache(args.cache, pool, meta=f"N={data.n_samples} limits={limits}")
    cut_fh = open(args.log_cuts, "w") if args.log_cuts else None
    try:
        config = SolverConfig(time_limit=args.time_limit, restarts=args.restarts, seed=args.seed,
                              engine=args.engine,
                              cut_log=(lambda line: cut_fh.write(line + "\n")) if cut_fh else None)
        res = learn_from_pool(pool, d, not args.no_prune, config, limits)
    finally:
        if cut_fh:
            cut_fh.close()
    summary = res.summary()
    summary["data"] = {"path": str(args.data), "N": data.n_samples, "d": d, "columns": data.columns}
    if res.graph is None:
        log.error("no feasible graph found (status %s)", res.solve.status)
        _emit(json.dumps(summary, indent=2, sort_keys=True) + "\n", args.out and args.out + ".json")
        return EXIT_FAIL
    graph_text = to_text(res.graph, comment=f"BIC {res.score!r} ({res.solve.status})")
    if args.out:
        _emit(graph_text, args.out + ".graph")
        _emit(json.dumps(summary, indent=2, sort_keys=True) + "\n", args.out + ".json")
        print(f"score {res.score:.6f} bound {res.solve.proven_bound:.6f} status {res.solve.status}")
    else:
        sys.stdout.write(graph_text)
        sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if res.solve.status == TIME_LIMIT:
        return EXIT_TIMEOUT
    return EXIT_OK if res.solve.status == OPTIMAL else EXIT_FAIL


def cmd_score(args) -> int:
    data = _load_data(args.data)
    g = _load_graph(args.graph)
    if g.n_nodes != data.n_vars:
        raise UsageError(f"graph has {g.n_nodes} nodes but data has {data.n_vars} columns")
    cyc = find_directed_cycle(g)
    if cyc is not None:
        print("rejected: directed cycle " + " -> ".join(str(v + 1) for v in cyc + cyc[:1]))
        return EXIT_FAIL
    adc = find_almost_directed_cycle(g)
    if adc is not None:
        path, (a, b) = adc
        print("rejected: almost directed cycle " + " -> ".join(str(v + 1) for v in path)
              + f" with {a + 1} <-> {b + 1}")
        return EXIT_FAIL
    scorer = LocalScorer(data.covariance, data.n_samples)
    for c in c_components(g):
        print(f"{scorer(c):.6f}\t{c.label(one_based=True)}")
    print(f"BIC {graph_bic(g, data.covariance, data.n_samples):.6f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pred, truth = _load_graph(args.pred), _load_graph(args.truth)
    if pred.n_nodes != truth.n_nodes:
        raise UsageError(f"node counts differ: {pred.n_nodes} vs {truth.n_nodes}")
    text = json.dumps(evaluate(pred, truth), indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out:
        _emit(text, args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    data = _load_data(args.data)
    limit = min(args.max_nodes, MAX_ORACLE_NODES)
    if data.n_vars > limit:
        raise UsageError(f"oracle enumeration supports at most {limit} nodes, data has {data.n_vars}")
    res = oracle_search(data.covariance, data.n_samples)
    text = to_text(res.graph, comment=f"BIC {res.score!r}")
    _emit(text, args.out)
    print(f"score {res.score:.6f} over {res.n_graphs} ancestral graphs ({res.ties} tied)",
          file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="admgip", description="Exact BIC learning of ancestral ADMGs")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a ground-truth instance bundle")
    s.add_argument("--d", type=int, default=4, help="observed variables")
    s.add_argument("--latents", type=int, default=0, help="hidden variables")
    s.add_argument("--n", type=int, default=1000, help="samples")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-parents", type=int, default=3)
    src = s.add_mutually_exclusive_group()
    src.add_argument("--ag", type=int, choices=range(1, 6), help="use a shipped 10-node ancestral graph")
    src.add_argument("--five-node", action="store_true", help="five-node DAG with node 0 hidden")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("learn", help="learn a BIC-optimal ancestral ADMG")
    s.add_argument("--data", required=True, help="CSV with a header row")
    s.add_argument("--max-parents", type=int, default=3, help="parents of single-node districts")
    s.add_argument("--max-district", type=int, default=2, help="largest district size")
    s.add_argument("--district-parents", type=int, default=1, help="parents per node in larger districts")
    s.add_argument("--unrestricted", action="store_true", help="all c-components (small d only)")
    s.add_argument("--time-limit", type=float, default=None, help="seconds")
    s.add_argument("--no-prune", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--restarts", type=int, default=20, help="contraction restarts per separation round")
    s.add_argument("--engine", choices=["simplex", "highs"], default="simplex")
    s.add_argument("--include", help="extra candidate components, one per line")
    s.add_argument("--cache", help="candidate cache file (read if present, else written)")
    s.add_argument("--log-cuts", help="write one line per added cut")
    s.add_argument("--out", help="output prefix for .graph and .json")
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("score", help="BIC of a given graph")
    s.add_argument("--data", required=True)
    s.add_argument("--graph", required=True)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("evaluate", help="SHD, precision and recall against a truth graph")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--out", help="write the metrics JSON here as well")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("oracle", help="exhaustive search over all ancestral ADMGs")
    s.add_argument("--data", required=True)
    s.add_argument("--max-nodes", type=int, default=MAX_ORACLE_NODES)
    s.add_argument("--out", help="write the optimal graph here")
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"admgip {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GraphError, ScoringError, ValueError, RuntimeError) as exc:
        print(f"admgip {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
