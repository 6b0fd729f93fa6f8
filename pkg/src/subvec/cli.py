"""Command-line front end.

Every command writes ``<out>.manifest.json`` recording the resolved
arguments, seed, input digests, timing and outputs.  ``subvec replay
MANIFEST`` re-runs a recorded command.

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import DomainError, InvariantError, ParseError
from .graph import (SubgraphSet, make_link_split, parse_communities, parse_subgraph_set,
                    read_edge_list)
from .oracle import BoundReport, exhaustive_corpus, verify_pairs
from .tasks import (community_prf, default_hops, detect_communities, map_score,
                    predict_links)
from .train import TrainConfig, save_model, train
from .walks import build_corpus

log = logging.getLogger("subvec")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
SEED_ENV = "SUBVEC_SEED"


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("grid is empty")
    return vals


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _add_walk_flags(p):
    p.add_argument("--walk-length", type=int, default=1000)
    p.add_argument("--walks-per-subgraph", type=int, default=1)


def _add_train_flags(p):
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr0", type=float, default=0.025)
    p.add_argument("--lr-min", type=float, default=1e-4)
    p.add_argument("--mode", choices=("dbon", "dm"), default="dbon")
    p.add_argument("--combiner", choices=("avg", "concat"), default="avg")
    p.add_argument("--predecessor-window", action="store_true",
                   help="DM context uses only preceding nodes instead of a symmetric window")


def _add_common(p, seed=True):
    if seed:
        p.add_argument("--seed", type=int, default=None,
                       help=f"random seed (falls back to ${SEED_ENV}, then 0)")
        p.add_argument("--parallel", type=int, default=1, metavar="N",
                       help="worker threads; N > 1 gives lock-free, non-bitwise-reproducible training")
    p.add_argument("--out", required=True, help="output path (manifest goes to OUT.manifest.json)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subvec", description="Subgraph embeddings from truncated random walks.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="train subgraph vectors")
    p.add_argument("--graph", required=True)
    p.add_argument("--subgraphs", help="subgraph-set file: 'sid node node ...' per line")
    p.add_argument("--ego", action="store_true", help="embed the ego-net of every node")
    p.add_argument("--hops", type=int, choices=(1, 2), default=None)
    p.add_argument("--dump-walks", help="write the walk corpus here")
    _add_walk_flags(p)
    _add_train_flags(p)
    _add_common(p)

    p = sub.add_parser("communities", help="cluster ego-net vectors into k communities")
    p.add_argument("--graph", required=True)
    p.add_argument("--truth", help="ground truth: 'node community' per line")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--hops", type=int, choices=(1, 2), default=None)
    _add_walk_flags(p)
    _add_train_flags(p)
    _add_common(p)

    p = sub.add_parser("linkpred", help="hide edges and rank candidate links")
    p.add_argument("--graph", required=True)
    p.add_argument("--hide-percent", type=float, default=10.0)
    p.add_argument("--hops", type=int, choices=(1, 2), default=None)
    _add_walk_flags(p)
    _add_train_flags(p)
    _add_common(p)

    p = sub.add_parser("sweep", help="metric as a function of walk length or dimension")
    p.add_argument("--graph", required=True)
    p.add_argument("--param", choices=("walk-length", "dimension"), required=True)
    p.add_argument("--grid", type=_int_list, required=True)
    p.add_argument("--task", choices=("communities", "linkpred"), default="communities")
    p.add_argument("--truth")
    p.add_argument("--k", type=int)
    p.add_argument("--hide-percent", type=float, default=10.0)
    p.add_argument("--hops", type=int, choices=(1, 2), default=None)
    _add_walk_flags(p)
    _add_train_flags(p)
    _add_common(p)

    p = sub.add_parser("scalability", help="wall-clock time vs number or size of ego-nets")
    p.add_argument("--graph", required=True)
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--counts", type=_int_list, help="ego-net counts, e.g. 100,200,400,800")
    grid.add_argument("--hop-grid", type=_int_list, help="ego-net radii, e.g. 1,2")
    p.add_argument("--hops", type=int, choices=(1, 2), default=1)
    p.add_argument("--repeats", type=int, default=1)
    _add_walk_flags(p)
    _add_train_flags(p)
    _add_common(p)

    p = sub.add_parser("verify", help="check the shifted co-occurrence overlap bound on subgraph pairs")
    p.add_argument("--graph", required=True)
    p.add_argument("--subgraphs", required=True)
    p.add_argument("--window", type=int, default=2, help="context length w")
    p.add_argument("--negatives", type=float, default=1, help="negative-sampling k")
    p.add_argument("--walk-length", type=float, default=None,
                   help="walk length l (default: w for exhaustive corpora, L for random walks)")
    p.add_argument("--corpus", choices=("exhaustive", "random"), default="exhaustive")
    p.add_argument("--random-walk-length", type=int, default=1000)
    p.add_argument("--walks-per-subgraph", type=int, default=1)
    _add_common(p)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write outputs here instead of the recorded path")
    p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _validate(args):
    """Flag combinations argparse cannot express; raise before any computation."""
    cmd = args.command
    if cmd == "replay":
        return
    if getattr(args, "parallel", 1) < 1:
        raise UsageError("--parallel must be >= 1")
    if cmd == "embed" and bool(args.subgraphs) == bool(args.ego):
        raise UsageError("embed needs exactly one of --subgraphs or --ego")
    if cmd == "embed" and args.hops is not None and not args.ego:
        raise UsageError("--hops only applies with --ego")
    if hasattr(args, "combiner") and args.combiner == "concat" and args.mode != "dm":
        raise UsageError("--combiner concat requires --mode dm")
    if hasattr(args, "dim") and (args.dim < 1 or args.window < 1 or args.negatives < 1
                                 or args.epochs < 0 or not args.lr0 > args.lr_min > 0):
        raise UsageError("need --dim, --window, --negatives >= 1, --epochs >= 0, --lr0 > --lr-min > 0")
    if cmd in ("embed", "communities", "linkpred", "sweep", "scalability") and (
            args.walk_length < 1 or args.walks_per_subgraph < 0):
        raise UsageError("need --walk-length >= 1 and --walks-per-subgraph >= 0")
    if cmd == "communities" and args.k < 2:
        raise UsageError("--k must be >= 2")
    if cmd in ("linkpred", "sweep") and not 0 < args.hide_percent < 100:
        raise UsageError("--hide-percent must lie strictly between 0 and 100")
    if cmd == "sweep" and args.task == "communities" and (not args.truth or not args.k or args.k < 2):
        raise UsageError("sweep --task communities needs --truth and --k >= 2")
    if cmd == "sweep" and min(args.grid) < 1:
        raise UsageError("sweep grid values must be >= 1")
    if cmd == "scalability" and args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    if cmd == "scalability" and args.hop_grid and not set(args.hop_grid) <= {1, 2}:
        raise UsageError("--hop-grid values must be 1 or 2")
    if cmd == "verify" and (args.window < 1 or args.negatives <= 0):
        raise UsageError("verify needs --window >= 1 and --negatives > 0")


def _resolve_seed(args):
    if not hasattr(args, "seed"):
        return None
    if args.seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            args.seed = int(env) if env is not None else 0
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}")
    return args.seed


def _train_config(args, **over) -> TrainConfig:
    kw = dict(dim=args.dim, window=args.window, negatives=args.negatives, epochs=args.epochs,
              lr0=args.lr0, lr_min=args.lr_min, mode=args.mode, combiner=args.combiner,
              symmetric=not args.predecessor_window, seed=args.seed, workers=args.parallel)
    kw.update(over)
    return TrainConfig(**kw)


# -- commands -----------------------------------------------------------------

def cmd_embed(args, ctx):
    g = read_edge_list(args.graph)
    ctx["inputs"].append(args.graph)
    if args.ego:
        hops = args.hops or default_hops(g)
        ctx["params"]["hops"] = hops
        sset = SubgraphSet.ego_nets(g, hops)
    else:
        with open(args.subgraphs) as fh:
            sset = parse_subgraph_set(fh, g)
        ctx["inputs"].append(args.subgraphs)
    cfg = _train_config(args)
    corpus = build_corpus(sset, args.walk_length, args.walks_per_subgraph, args.seed,
                          workers=args.parallel)
    if args.dump_walks:
        with open(args.dump_walks, "w") as fh:
            corpus.dump(fh)
        ctx["outputs"].append(args.dump_walks)
    model = train(corpus, cfg)
    meta = {"walk_length": args.walk_length, "walks_per_subgraph": args.walks_per_subgraph,
            "corpus_seed": args.seed, "output_width": cfg.output_width}
    paths = save_model(model, args.out, meta)
    ctx["outputs"].extend(paths.values())
    ctx["params"]["output_width"] = cfg.output_width
    print(f"embedded {len(sset)} subgraphs into {cfg.dim} dimensions -> {args.out}")


def _read_truth(path, g):
    with open(path) as fh:
        return parse_communities(fh, g)


def _communities_f1(g, truth, args, cfg, walk_length):
    ca = detect_communities(g, args.k, args.hops, cfg, walk_length, args.walks_per_subgraph)
    return ca, (community_prf(ca.labels, truth) if truth is not None else None)


def cmd_communities(args, ctx):
    g = read_edge_list(args.graph)
    ctx["inputs"].append(args.graph)
    if args.k > g.n:
        raise DomainError(f"--k {args.k} exceeds node count {g.n}")
    truth = None
    if args.truth:
        truth = _read_truth(args.truth, g)
        ctx["inputs"].append(args.truth)
    ctx["params"]["hops"] = args.hops or default_hops(g)
    ca, report = _communities_f1(g, truth, args, _train_config(args), args.walk_length)
    with open(args.out, "w") as fh:
        for v in range(g.n):
            fh.write(f"{g.labels[v]} {int(ca.labels[v])}\n")
        if report is not None:
            for line in report.as_lines():
                fh.write(line + "\n")
    ctx["outputs"].append(args.out)
    if report is not None:
        print(f"P {report.precision:.4f} R {report.recall:.4f} F1 {report.f1:.4f}")


def _linkpred(g, args, cfg, walk_length):
    split = make_link_split(g, args.hide_percent, args.seed)
    if split.shortfall:
        log.warning("only %d of %d edges could be hidden without disconnecting the graph",
                    len(split.hidden_edges), split.target)
    ranking = predict_links(split, args.hops, cfg, walk_length, args.walks_per_subgraph)
    return split, ranking, map_score(ranking)


def cmd_linkpred(args, ctx):
    g = read_edge_list(args.graph)
    ctx["inputs"].append(args.graph)
    split, ranking, value = _linkpred(g, args, _train_config(args), args.walk_length)
    ctx["params"]["hidden_edges"] = len(split.hidden_edges)
    ctx["params"]["shortfall"] = split.shortfall
    with open(args.out, "w") as fh:
        for v in ranking.queries:
            items = " ".join(f"{g.labels[u]}:{float(s)!r}"
                             for u, s in zip(ranking.candidates[v], ranking.scores[v]))
            fh.write(f"{g.labels[v]}: {items}\n")
        fh.write(f"MAP {float(value)!r}\n")
    ctx["outputs"].append(args.out)
    print(f"MAP {value}")


def cmd_sweep(args, ctx):
    g = read_edge_list(args.graph)
    ctx["inputs"].append(args.graph)
    truth = None
    if args.task == "communities":
        truth = _read_truth(args.truth, g)
        ctx["inputs"].append(args.truth)
    metric = "f1" if args.task == "communities" else "map"
    rows = []
    for value in args.grid:
        walk_length = value if args.param == "walk-length" else args.walk_length
        cfg = _train_config(args, dim=value) if args.param == "dimension" else _train_config(args)
        if args.task == "communities":
            _, report = _communities_f1(g, truth, args, cfg, walk_length)
            rows.append((value, report.f1))
        else:
            rows.append((value, _linkpred(g, args, cfg, walk_length)[2]))
        log.info("%s=%d %s=%.4f", args.param, value, metric, rows[-1][1])
    with open(args.out, "w") as fh:
        fh.write(f"{args.param}\t{metric}\n")
        for value, m in rows:
            fh.write(f"{value}\t{float(m)!r}\n")
    ctx["outputs"].append(args.out)
    for value, m in rows:
        print(f"{args.param}={value}\t{metric}={m:.4f}")


def linear_r2(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2:
        return float("nan")
    slope, icept = np.polyfit(x, y, 1)
    ss_res = ((y - (slope * x + icept)) ** 2).sum()
    ss_tot = ((y - y.mean()) ** 2).sum()
    return float(1 - ss_res / ss_tot) if ss_tot > 0 else 1.0


def time_ego_embedding(g, centers, hops, cfg, walk_length, r) -> float:
    t0 = time.perf_counter()
    sset = SubgraphSet.ego_nets(g, hops, centers)
    corpus = build_corpus(sset, walk_length, r, cfg.seed, workers=cfg.workers)
    train(corpus, cfg)
    return time.perf_counter() - t0


def cmd_scalability(args, ctx):
    g = read_edge_list(args.graph)
    ctx["inputs"].append(args.graph)
    cfg = _train_config(args)
    rng = np.random.default_rng(args.seed)
    # compile kernels outside the timed region
    time_ego_embedding(g, [0], 1, _train_config(args, epochs=1), 10, 1)
    if args.counts:
        if max(args.counts) > g.n:
            raise DomainError(f"ego-net count {max(args.counts)} exceeds node count {g.n}")
        order = rng.permutation(g.n)
        grid = [("count", c, order[:c], args.hops) for c in args.counts]
    else:
        grid = [("hops", h, np.arange(g.n), h) for h in args.hop_grid]
    rows = []
    for name, value, centers, hops in grid:
        times = [time_ego_embedding(g, centers, hops, cfg, args.walk_length,
                                    args.walks_per_subgraph) for _ in range(args.repeats)]
        rows.append((value, times))
        print(f"{name}={value}\tseconds={np.median(times):.3f}")
    r2 = linear_r2([v for v, _ in rows], [np.median(t) for _, t in rows]) if args.counts else None
    with open(args.out, "w") as fh:
        fh.write(f"{grid[0][0]}\tmedian_seconds\t" + "\t".join(
            f"run{i}" for i in range(args.repeats)) + "\n")
        for value, times in rows:
            runs = "\t".join(repr(t) for t in times)
            fh.write(f"{value}\t{float(np.median(times))!r}\t{runs}\n")
        if r2 is not None:
            fh.write(f"# linear_fit_r2\t{r2!r}\n")
    ctx["outputs"].append(args.out)
    ctx["params"]["linear_fit_r2"] = r2
    if r2 is not None:
        print(f"linear fit R^2 = {r2:.4f}")


def cmd_verify(args, ctx):
    g = read_edge_list(args.graph)
    with open(args.subgraphs) as fh:
        sset = parse_subgraph_set(fh, g)
    ctx["inputs"] += [args.graph, args.subgraphs]
    w = args.window
    if args.corpus == "exhaustive":
        corpus = exhaustive_corpus(sset, w)
    else:
        corpus = build_corpus(sset, args.random_walk_length, args.walks_per_subgraph, args.seed)
    l = args.walk_length if args.walk_length is not None else corpus.walk_length
    ctx["params"]["l"] = l
    reports = verify_pairs(sset, corpus, w, args.negatives, l)
    with open(args.out, "w") as fh:
        fh.write("\t".join(BoundReport.HEADER) + "\n")
        for rep in reports:
            fh.write("\t".join(str(c) for c in rep.row(sset.names)) + "\n")
    ctx["outputs"].append(args.out)
    conclusive = [r for r in reports if r.conclusive]
    held = sum(r.holds_proof for r in conclusive)
    print(f"{len(reports)} pairs, {len(conclusive)} conclusive, proof bound holds in {held}")


COMMANDS = {"embed": cmd_embed, "communities": cmd_communities, "linkpred": cmd_linkpred,
            "sweep": cmd_sweep, "scalability": cmd_scalability, "verify": cmd_verify}


def _replace_out(argv, out):
    argv = list(argv)
    i = argv.index("--out")
    argv[i + 1] = out
    return argv


def run(argv, parser=None) -> int:
    parser = parser or build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "replay":
        with open(args.manifest) as fh:
            manifest = json.load(fh)
        replay_argv = manifest["argv"]
        if args.out:
            replay_argv = _replace_out(replay_argv, args.out)
        if manifest.get("parallel", 1) > 1:
            log.warning("manifest was recorded with --parallel %s; results are only "
                        "statistically reproducible", manifest["parallel"])
        return run(replay_argv, parser)

    _validate(args)
    seed = _resolve_seed(args)
    # the recorded argv pins the seed so a replay does not depend on the environment
    argv = list(argv)
    if seed is not None and not any(a == "--seed" or a.startswith("--seed=") for a in argv):
        argv += ["--seed", str(seed)]
    ctx = {"inputs": [], "outputs": [], "params": {}}
    start = time.time()
    t0 = time.perf_counter()
    COMMANDS[args.command](args, ctx)
    elapsed = time.perf_counter() - t0
    params = {k: v for k, v in vars(args).items() if k not in ("verbose",)}
    params.update(ctx["params"])
    manifest = {
        "command": args.command,
        "argv": argv,
        "params": params,
        "seed": seed,
        "parallel": getattr(args, "parallel", 1),
        "mode": "single-threaded" if getattr(args, "parallel", 1) == 1 else "parallel",
        "inputs": {p: _sha256(p) for p in ctx["inputs"]},
        "outputs": ctx["outputs"],
        "timing": {"started": start, "seconds": elapsed},
        "version": __version__,
    }
    with open(args.out + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        return run(argv, parser)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"subvec: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # argparse
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    except InvariantError as e:
        print(f"subvec: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ParseError, DomainError, OSError, KeyError, json.JSONDecodeError) as e:
        print(f"subvec: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
