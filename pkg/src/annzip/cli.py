"""Command-line front end.

Subcommands: gen-synthetic, build-ivf, build-graph, search, stats, bench,
compress-graph, decompress-graph.  Every run with a fixed --seed is
reproducible; report lines are key=value (timing noise only under time_*
keys).  Equivalence checks exit nonzero on any divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .bench import machine_header, render_table, timed_median
from .container import SEC_METADATA, read_container
from .errors import CodecError
from .datasets import gen_synthetic, load_vectors
from .graph_index import (
    FRIEND_BACKENDS,
    graph_build,
    graph_export_rec,
    graph_import_rec,
    graph_search,
    graph_stats,
    load_graph_index,
    save_graph_index,
    with_friend_backend,
)
from .ivf_index import (
    DEFAULT_K,
    DEFAULT_NPROBE,
    ID_BACKENDS,
    CodeConfig,
    ivf_build,
    ivf_search,
    ivf_search_deferred,
    ivf_stats,
    load_index,
    save_index,
    with_id_backend,
)
from .rec_graph import VertexModel, rec_stream_bits


def _index_type(path: str) -> str:
    meta = json.loads(read_container(path)[SEC_METADATA].decode())
    return meta.get("type", "")


def _thread_clone(index):
    return dataclasses.replace(index, _scratch=None)


def _parallel_search(index, queries, threads, search_fn, **kw):
    if threads <= 1 or len(queries) < 2:
        return search_fn(index, queries, **kw)
    chunks = np.array_split(np.arange(len(queries)), threads)
    clones = [_thread_clone(index) for _ in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(
            lambda ci: search_fn(clones[ci], queries[chunks[ci]], **kw),
            range(len(chunks)),
        ))
    first = parts[0]
    out = dataclasses.replace(
        first,
        ids=np.concatenate([p.ids for p in parts]),
        distances=np.concatenate([p.distances for p in parts]),
    )
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen_synthetic(args) -> int:
    X, labels = gen_synthetic(args.n, args.d, args.clusters, args.spread,
                              args.seed, args.out)
    print(f"wrote {args.out}: n={len(X)} d={X.shape[1]} clusters={args.clusters} "
          f"seed={args.seed}")
    return 0


def cmd_build_ivf(args) -> int:
    X = load_vectors(args.dataset)
    index = ivf_build(
        X, args.k_clusters, args.ids, CodeConfig.parse(args.codes),
        seed=args.seed, kmeans_iters=args.kmeans_iters,
        train_sample=args.train_sample,
    )
    save_index(index, args.out)
    st = ivf_stats(index)
    print(f"built IVF{args.k_clusters} ids={args.ids} codes={args.codes} "
          f"N={index.N} bits_per_id={st['bits_per_id']:.3f} -> {args.out}")
    return 0


def cmd_build_graph(args) -> int:
    X = load_vectors(args.dataset)
    index = graph_build(X, args.degree, seed=args.seed)
    if args.friend_ids != "unc":
        index = with_friend_backend(index, args.friend_ids)
    save_graph_index(index, args.out)
    print(f"built graph R={args.degree} friend-ids={args.friend_ids} "
          f"N={index.N} edges={index.num_edges} -> {args.out}")
    return 0


def _recall(result_ids: np.ndarray, gt: np.ndarray, k: int) -> float:
    hits = 0
    for i in range(len(result_ids)):
        hits += len(set(result_ids[i, :k].tolist()) & set(gt[i, :k].tolist()))
    return hits / (len(result_ids) * k)


def cmd_search(args) -> int:
    queries = load_vectors(args.queries)
    kind = _index_type(args.index)
    if kind == "ivf":
        index = load_index(args.index)
        backends = None
        if args.check:
            backends = ID_BACKENDS if args.check == "all" else args.check.split(",")
        run = (ivf_search_deferred if args.deferred else ivf_search)
        result = _parallel_search(index, queries, args.threads, run,
                                  k=args.k, nprobe=args.nprobe)
        if backends:
            for b in backends:
                other = with_id_backend(index, b)
                fn = ivf_search_deferred if (args.deferred and b in ("wt", "wt1", "ef")) else ivf_search
                r = fn(other, queries, k=args.k, nprobe=args.nprobe)
                if r != result:
                    print(f"CHECK FAILED: backend {b} diverged", file=sys.stderr)
                    return 1
            print(f"check ok: {len(backends)} backends byte-identical")
    elif kind == "graph":
        index = load_graph_index(args.index)
        result = _parallel_search(index, queries, args.threads, graph_search,
                                  k=args.k, beam=args.beam)
        if args.check:
            backends = FRIEND_BACKENDS if args.check == "all" else args.check.split(",")
            for b in backends:
                r = graph_search(with_friend_backend(index, b), queries,
                                 k=args.k, beam=args.beam)
                if r != result:
                    print(f"CHECK FAILED: backend {b} diverged", file=sys.stderr)
                    return 1
            print(f"check ok: {len(backends)} backends byte-identical")
    else:
        print(f"unrecognized index type in {args.index}", file=sys.stderr)
        return 1
    if args.gt:
        gt = load_vectors(args.gt)
        print(f"recall@{args.k}={_recall(result.ids, gt, args.k):.4f}")
    else:
        limit = args.max_print if args.max_print >= 0 else len(queries)
        for i in range(min(len(queries), limit)):
            row = " ".join(
                f"{int(v)}:{d:.6g}" for v, d in zip(result.ids[i], result.distances[i])
            )
            print(f"q{i}: {row}")
    return 0


def cmd_stats(args) -> int:
    kind = _index_type(args.index)
    if kind == "ivf":
        st = ivf_stats(load_index(args.index))
        for key in ("N", "K", "id_backend", "code_backend", "bits_per_id",
                    "theoretical_savings_bits", "theoretical_savings_bits_per_id",
                    "code_bits_per_element", "cluster_size_min", "cluster_size_max"):
            if key in st:
                v = st[key]
                print(f"{key}={v:.4f}" if isinstance(v, float) else f"{key}={v}")
    elif kind == "graph":
        index = load_graph_index(args.index)
        st = graph_stats(index)
        for key in ("N", "edges", "max_degree", "mean_degree",
                    "theoretical_savings_bits"):
            v = st[key]
            print(f"{key}={v:.4f}" if isinstance(v, float) else f"{key}={v}")
        for backend, bits in st["bits_per_id"].items():
            print(f"bits_per_id.{backend}={bits:.4f}")
    else:
        print(f"unrecognized index type in {args.index}", file=sys.stderr)
        return 1
    return 0


def cmd_bench(args) -> int:
    if args.dataset:
        X = load_vectors(args.dataset)
    else:
        n, d, c = (int(v) for v in args.synthetic.split(","))
        X, _ = gen_synthetic(n, d, c, seed=args.seed)
    rng = np.random.default_rng(args.seed + 1)
    queries = X[rng.choice(len(X), min(args.queries, len(X)), replace=False)]
    queries = queries + rng.normal(0, 0.01, queries.shape).astype(np.float32)
    ids_list = list(ID_BACKENDS) if args.ids == "all" else args.ids.split(",")
    codes_list = args.codes.split(",")

    lines = list(machine_header())
    lines.append(f"annzip={__version__}")
    lines.append(f"n={len(X)} d={X.shape[1]} k_clusters={args.k_clusters}")
    lines.append(f"queries={len(queries)} k={args.k} nprobe={args.nprobe} "
                 f"runs={args.runs} seed={args.seed}")
    rows = []
    check_ok = True
    savings = None
    for codes in codes_list:
        reference = None
        base = ivf_build(X, args.k_clusters, "unc", CodeConfig.parse(codes),
                         seed=args.seed, train_sample=args.train_sample)
        if savings is None:
            savings = ivf_stats(base)["theoretical_savings_bits_per_id"]
        for ids in ids_list:
            index = base if ids == "unc" else with_id_backend(base, ids)
            run = lambda: _parallel_search(index, queries, args.threads,
                                           ivf_search, k=args.k,
                                           nprobe=args.nprobe)
            result = run()
            if reference is None:
                reference = result
            elif result != reference:
                check_ok = False
            t = timed_median(run, runs=args.runs)
            st = ivf_stats(index)
            rows.append([codes, ids, f"{st['bits_per_id']:.2f}",
                         f"{st['code_bits_per_element']:.2f}", f"{t:.4f}"])
            lines.append(f"bits_per_id.{codes}.{ids}={st['bits_per_id']:.4f}")
            lines.append(f"time_median_s.{codes}.{ids}={t:.5f}")
    lines.append(f"theoretical_savings_bits_per_id={savings:.4f}")
    lines.append(f"equivalence_check={'ok' if check_ok else 'FAILED'}")
    report = "\n".join(lines) + "\n\n" + render_table(
        ["codes", "ids", "bits/id", "code bpe", "time_median_s"], rows
    )
    print(report)
    if args.out:
        with open(args.out, "w") as f:
            f.write(report + "\n")
    return 0 if check_ok else 1


def cmd_compress_graph(args) -> int:
    index = load_graph_index(args.index)
    model = VertexModel(args.model) if args.model != "polya" else VertexModel("polya", 1)
    blob = graph_export_rec(index, model)
    with open(args.out, "wb") as f:
        f.write(blob)
    bits = rec_stream_bits(blob)
    edges = index.num_edges
    print(f"compressed {edges} edges -> {len(blob)} bytes "
          f"({bits / max(edges, 1):.3f} bits/edge)")
    return 0


def cmd_decompress_graph(args) -> int:
    with open(args.input, "rb") as f:
        blob = f.read()
    X = load_vectors(args.vectors)
    index = graph_import_rec(blob, X, backend=args.friend_ids)
    save_graph_index(index, args.out)
    print(f"decompressed {index.num_edges} edges -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="annzip",
                                 description="compressed ANN index toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="write a synthetic fvecs dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--clusters", type=int, default=64)
    p.add_argument("--spread", type=float, default=0.1)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_gen_synthetic)

    p = sub.add_parser("build-ivf", help="build an IVF index container")
    p.add_argument("--dataset", required=True)
    p.add_argument("--k-clusters", type=int, required=True)
    p.add_argument("--ids", choices=ID_BACKENDS, default="roc")
    p.add_argument("--codes", default="flat",
                   help="flat, pq<M>x<B>, or pq-cond<M>x<B>")
    p.add_argument("--kmeans-iters", type=int, default=25)
    p.add_argument("--train-sample", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_build_ivf)

    p = sub.add_parser("build-graph", help="build a graph index container")
    p.add_argument("--dataset", required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--friend-ids", choices=FRIEND_BACKENDS, default="unc")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_build_graph)

    p = sub.add_parser("search", help="query an index")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--gt", default=None, help="ivecs ground truth for recall")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--nprobe", type=int, default=DEFAULT_NPROBE)
    p.add_argument("--beam", type=int, default=16)
    p.add_argument("--deferred", action="store_true",
                   help="deferred id resolution (wt/wt1/ef backends)")
    p.add_argument("--check", default=None,
                   help="'all' or a comma list of backends to cross-validate")
    p.add_argument("--max-print", type=int, default=20)
    _add_common(p)
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("stats", help="report index storage statistics")
    p.add_argument("--index", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("bench", help="timed backend/code matrix")
    p.add_argument("--dataset", default=None)
    p.add_argument("--synthetic", default=None, metavar="N,D,CLUSTERS")
    p.add_argument("--k-clusters", type=int, default=1024)
    p.add_argument("--ids", default="all")
    p.add_argument("--codes", default="flat")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--nprobe", type=int, default=DEFAULT_NPROBE)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--train-sample", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("compress-graph", help="whole-graph offline stream")
    p.add_argument("--index", required=True)
    p.add_argument("--model", choices=("uniform", "polya"), default="uniform")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_compress_graph)

    p = sub.add_parser("decompress-graph", help="rebuild an index from a stream")
    p.add_argument("--input", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--friend-ids", choices=FRIEND_BACKENDS, default="unc")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_decompress_graph)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, CodecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
