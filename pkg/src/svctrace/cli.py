"""Operator command line.

Subcommands cover the whole pipeline: build the synthetic corpus, train
the toy checkpoint, run conversions, evaluate the metric pool, recompute
projections, and serve the HTTP API. The store root comes from --root or
the SVCTRACE_ROOT environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import orchestrate
from .checkpoint import load_checkpoint
from .config import RuntimeConfig, load_config
from .convert import ConversionJob
from .corpus import build_corpus, load_corpus
from .store import TraceStore
from .training import prepare_parallel_items, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svctrace", description=__doc__)
    parser.add_argument(
        "--root",
        default=os.environ.get("SVCTRACE_ROOT", "svctrace-data"),
        help="store root directory (env: SVCTRACE_ROOT)",
    )
    parser.add_argument("--config", default=None, help="JSON config override file")
    parser.add_argument("--preset", default="toy", help="config preset (toy, full_scale)")
    parser.add_argument("--seed", type=int, default=None, help="global seed override")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus", help="build the synthetic singer/song corpus")
    p.add_argument("--singers", type=int, default=None)
    p.add_argument("--songs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="train the toy checkpoint on the corpus")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("convert", help="run one conversion job")
    p.add_argument("--source", type=int, required=True)
    p.add_argument("--song", type=int, required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--num-steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("metrics", help="evaluate the conversion pool")
    p.add_argument("--pool", default="all", choices=["all"])

    p = sub.add_parser("project", help="recompute projections from stored embeddings")
    p.add_argument("--trace", default=None, help="trace id (default: all)")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--ui", default=None, help="static frontend directory to mount at /ui")
    return parser


def _seed(args, fallback: int) -> int:
    sub_seed = getattr(args, "seed", None)
    if sub_seed is not None:
        return sub_seed
    return fallback


def cmd_corpus(args, cfg: RuntimeConfig, store: TraceStore) -> int:
    from dataclasses import replace

    corpus_cfg = cfg.corpus
    if args.singers is not None:
        corpus_cfg = replace(corpus_cfg, n_singers=args.singers)
    if args.songs is not None:
        corpus_cfg = replace(corpus_cfg, n_songs=args.songs)
    corpus_cfg = replace(corpus_cfg, seed=_seed(args, corpus_cfg.seed))
    manifest = build_corpus(store.corpus_dir, corpus_cfg, cfg.dsp)
    store.register_corpus(manifest)
    print(f"corpus: {len(manifest.singers)} singers x {len(manifest.songs)} songs "
          f"-> {len(manifest.takes)} takes at {store.corpus_dir}")
    print(f"manifest hash: {manifest.content_hash()}")
    return 0


def cmd_train(args, cfg: RuntimeConfig, store: TraceStore) -> int:
    from dataclasses import replace

    manifest = load_corpus(store.corpus_dir)
    items, norm = prepare_parallel_items(
        manifest, cfg.dsp, content_dim=cfg.model.content_dim, n_singers=cfg.model.n_speakers
    )
    train_cfg = cfg.train
    if args.steps is not None:
        train_cfg = replace(train_cfg, total_steps=args.steps)
    seed = _seed(args, 7)

    def report(stats):
        print(f"  step {stats.step:6d}  loss {stats.loss:.4f}  grad {stats.grad_norm:.2f}")

    train(
        items,
        cfg.model,
        cfg.schedule.resolved(),
        train_cfg,
        norm,
        seed=seed,
        checkpoint_dir=store.root / "checkpoints",
        on_stats=report,
    )
    store.register_checkpoint("checkpoints/final.ckpt")
    print(f"checkpoint: {store.root / 'checkpoints' / 'final.ckpt'}")
    return 0


def cmd_convert(args, cfg: RuntimeConfig, store: TraceStore) -> int:
    bundle = load_checkpoint(store.default_checkpoint())
    manifest = load_corpus(store.corpus_dir)
    job = ConversionJob(
        source_singer=args.source,
        song=args.song,
        target_singer=args.target,
        num_steps=args.num_steps or bundle.schedule.num_steps,
        seed=_seed(args, 0),
    )
    trace_id = job.trace_id()
    if store.has_trace(trace_id):
        meta = store.list_traces()[trace_id]
        print(f"trace: {trace_id} (cached)")
        print(f"hash: {meta['content_hash']}")
        return 0
    trace = orchestrate.full_convert(job, bundle, manifest, cfg, store=store)
    print(f"trace: {trace_id}")
    print(f"hash: {trace.content_hash()}")
    return 0


def cmd_metrics(args, cfg: RuntimeConfig, store: TraceStore) -> int:
    doc = orchestrate.evaluate_pool(store)
    print(f"pool: {doc['pool_size']} conversions")
    for kind, mean in doc["means"].items():
        shown = doc["display"][kind]
        print(f"  {kind:7s} mean {mean!s:>12}  display {shown!s:>12}  ({doc['polarity'][kind]})")
    print(f"summary written to {store.root / 'metrics_summary.json'}")
    return 0


def cmd_project(args, cfg: RuntimeConfig, store: TraceStore) -> int:
    ids = [args.trace] if args.trace else sorted(store.list_traces())
    for trace_id in ids:
        embeddings = store.read_embeddings(trace_id)
        steps = store.read_meta(trace_id)["steps"]
        seed = _seed(args, store.read_meta(trace_id)["job"]["seed"])
        projections = orchestrate.compute_projections(
            embeddings, steps, seed=seed, iterations=args.iterations
        )
        store.update_projections(trace_id, projections)
        print(f"projected {trace_id}: {len(projections)} embeddings")
    return 0


def cmd_serve(args, cfg: RuntimeConfig, store: TraceStore) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(store, cfg, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "corpus": cmd_corpus,
    "train": cmd_train,
    "convert": cmd_convert,
    "metrics": cmd_metrics,
    "project": cmd_project,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.preset, args.config)
        store = TraceStore(Path(args.root))
        return _COMMANDS[args.command](args, cfg, store)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
