"""Command-line surface: gen-data, train, search, check, bench.

Exit codes: 0 success / 1 usage or I/O error / 2 target not found within
budget / 3 invalid certificate. Every artifact-producing command writes a
JSON run manifest alongside its output.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__, expr as ex, oracle, rewrite, search as searchmod
from .model import Model, ModelConfig, load_model, save_model
from .trainer import TrainConfig, metrics_csv, train


def write_manifest(path, command, config, inputs, outputs, started):
    config = {k: v for k, v in config.items() if not callable(v)}
    manifest = {
        "command": command,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "tool_version": __version__,
        "started_unix": started,
        "wall_clock_s": round(time.time() - started, 3),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def parse_height(text):
    lo, _, hi = text.partition(":")
    return int(lo), int(hi or lo)


def parse_ratios(text):
    parts = [float(v) for v in text.split(":")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three ratios A:B:C")
    return tuple(parts)


def cmd_gen_data(args):
    started = time.time()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = oracle.GenConfig(max_distance=args.max_distance,
                           per_cell=args.per_cell,
                           height_range=parse_height(args.height),
                           seed=args.seed)
    dataset, report = oracle.generate_dataset(cfg)
    if args.audit:
        for e in dataset.examples:
            d = oracle.bfs_distance(e.source, e.target, cfg.max_distance)
            if d != e.distance:
                print(f"audit failure: recorded {e.distance}, exact {d}",
                      file=sys.stderr)
                return 1
        print(f"audit passed on {len(dataset)} examples")
    splits = oracle.split_dataset(dataset, args.split, seed=args.seed)
    outputs = {}
    for split in splits:
        path = out / f"{split.split}.tsv"
        oracle.save_dataset(split, path)
        outputs[split.split] = str(path)
    stats_path = out / "stats.csv"
    stats_path.write_text(oracle.stats_csv(splits))
    outputs["stats"] = str(stats_path)
    if report.shortfall:
        print(f"warning: {len(report.shortfall)} cells under target",
              file=sys.stderr)
    write_manifest(out / "manifest.json", "gen-data", vars(args), {},
                   outputs, started)
    print(f"wrote {sum(len(s) for s in splits)} examples to {out}")
    return 0


def cmd_train(args):
    started = time.time()
    data = Path(args.data)
    train_set = oracle.load_dataset(data / "train.tsv", "train")
    val_set = oracle.load_dataset(data / "validation.tsv", "validation")
    model = Model(ModelConfig(memory_dim=args.memory_dim), seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                      seed=args.seed)
    model, rows = train(train_set, val_set, cfg, model)
    out = Path(args.out)
    save_model(model, out)
    metrics_path = out.with_suffix(out.suffix + ".metrics.csv")
    metrics_path.write_text(metrics_csv(rows))
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "train",
                   vars(args), {"train": str(data / 'train.tsv'),
                                "validation": str(data / 'validation.tsv')},
                   {"model": str(out), "metrics": str(metrics_path)}, started)
    print(f"wrote model to {out}")
    return 0


def _load_expr(text, what):
    try:
        return ex.parse(text)
    except ex.ExprError as err:
        print(f"error: {what}: {err}", file=sys.stderr)
        return None


def cmd_search(args):
    source = _load_expr(args.source, "source")
    target = _load_expr(args.target, "target")
    if source is None or target is None:
        return 1
    if args.algo != "bfs" and not args.model:
        print("error: --model is required unless --algo bfs", file=sys.stderr)
        return 1
    model = load_model(args.model) if args.model else None
    cfg = searchmod.SearchConfig(alpha=args.alpha, batch_size=args.batch_size,
                                 timeout=args.timeout,
                                 max_visited=args.max_visited)
    result = searchmod.run_algorithm(args.algo, source, target, model, cfg)
    stats = result.stats
    print(f"outcome: {result.outcome}")
    print(f"states_expanded: {stats.states_expanded}")
    print(f"states_generated: {stats.states_generated}")
    print(f"nn_batches: {stats.nn_batches}")
    print(f"elapsed_s: {stats.elapsed:.3f}")
    if result.found:
        names = [rewrite.TRANSFORMATION_NAMES[int(t)] for t in result.path]
        print(f"path_length: {len(names)}")
        print("path: " + " ".join(names))
        if args.emit_path:
            Path(args.emit_path).write_text(rewrite.path_to_lines(result.path))
        return 0
    return 2


def cmd_check(args):
    source = _load_expr(args.source, "source")
    target = _load_expr(args.target, "target")
    if source is None or target is None:
        return 1
    try:
        path_text = Path(args.path).read_text()
        path = rewrite.path_from_lines(path_text)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    verdict = rewrite.check_certificate(source, target, path)
    if verdict:
        print("Valid")
        return 0
    print(f"Invalid({verdict.reason})")
    return 3


def load_instances(path):
    """TSV of source/target pairs; dataset rows (4 columns) also accepted."""
    instances = []
    with open(path) as fh:
        for line_no, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) == 2:
                source, target = parts
            elif len(parts) == 4:
                source, target = parts[2], parts[3]
            else:
                raise ValueError(f"{path}:{line_no + 1}: expected 2 or 4 fields")
            instances.append((line_no, ex.parse(source), ex.parse(target)))
    return instances


_BENCH_STATE = {}


def _bench_init(model_path, algorithms, cfg):
    _BENCH_STATE["model"] = load_model(model_path) if model_path else None
    _BENCH_STATE["algorithms"] = algorithms
    _BENCH_STATE["cfg"] = cfg


def _bench_one(instance):
    return searchmod.bench_rows([instance], _BENCH_STATE["algorithms"],
                                _BENCH_STATE["model"], _BENCH_STATE["cfg"])


def cmd_bench(args):
    started = time.time()
    try:
        instances = load_instances(args.instances)
    except (OSError, ValueError, ex.ExprError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    algorithms = args.algos.split(",")
    for algo in algorithms:
        if algo not in searchmod.ALGORITHMS:
            print(f"error: unknown algorithm {algo!r}", file=sys.stderr)
            return 1
    if algorithms != ["bfs"] and not args.model:
        print("error: --model is required for guided algorithms",
              file=sys.stderr)
        return 1
    cfg = searchmod.SearchConfig(alpha=args.alpha, batch_size=args.batch_size,
                                 timeout=args.timeout,
                                 max_visited=args.max_visited)
    if args.jobs > 1:
        import multiprocessing as mp

        with mp.Pool(args.jobs, initializer=_bench_init,
                     initargs=(args.model, algorithms, cfg)) as pool:
            rows = [row for chunk in pool.map(_bench_one, instances)
                    for row in chunk]
    else:
        model = load_model(args.model) if args.model else None
        rows = searchmod.bench_rows(instances, algorithms, model, cfg)
    by_id = {i: (s, t) for i, s, t in instances}
    for row in rows:
        result = row.pop("result", None)
        if result is not None and result.found:
            source, target = by_id[row["instance_id"]]
            if not rewrite.check_certificate(source, target, result.path):
                print(f"error: invalid path for instance {row['instance_id']}",
                      file=sys.stderr)
                return 3
    out = Path(args.out)
    out.write_text(searchmod.bench_csv(rows))
    curve_path = out.with_suffix(out.suffix + ".curve.csv")
    curve_path.write_text(searchmod.solve_curve(rows, algorithms))
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "bench",
                   vars(args), {"instances": args.instances},
                   {"report": str(out), "curve": str(curve_path)}, started)
    solved = sum(1 for r in rows if r["outcome"] == "found")
    print(f"wrote {len(rows)} rows ({solved} found) to {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="eqsearch",
        description="Prove expression equivalence via guided rewrite search")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a balanced oracle dataset")
    p.add_argument("--max-distance", type=int, default=6)
    p.add_argument("--per-cell", type=int, default=10)
    p.add_argument("--height", default="4:5", help="LO:HI source heights")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--split", type=parse_ratios, default=(0.9, 0.05, 0.05))
    p.add_argument("--audit", action="store_true",
                   help="re-certify every emitted distance")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the distance/transformation model")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--memory-dim", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("search", help="search for a transformation path")
    p.add_argument("--model")
    p.add_argument("--algo", choices=searchmod.ALGORITHMS, default="batch-nngs")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--timeout", type=float)
    p.add_argument("--max-visited", type=int, default=1_000_000)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--emit-path")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("check", help="verify a transformation-path certificate")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--path", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="benchmark algorithms on instances")
    p.add_argument("--model")
    p.add_argument("--instances", required=True)
    p.add_argument("--algos", default="bfs,nngs,batch-nngs")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--timeout", type=float)
    p.add_argument("--max-visited", type=int, default=1_000_000)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except (OSError, ValueError, ex.ExprError) as err:
        print(f"error: {err}", file=sys.stderr)
        code = 1
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
