"""Pipeline glue shared by the CLI and the HTTP service.

A "full" conversion = sample the trace, collect tap embeddings, project
all seven (kind, layer) combinations, evaluate the five metric curves,
and persist everything in one atomic store write.
"""

from __future__ import annotations

from pathlib import Path

from .checkpoint import CheckpointBundle
from .config import RuntimeConfig
from .convert import ConversionJob, DiffusionTrace, capture_embeddings, convert
from .corpus import CorpusManifest
from .metrics import MetricKind, PoolEntry, best_sample, metric_curve, summarize
from .store import TraceStore
from .tsne import EmbeddingSequence, TsneConfig, tsne


def compute_projections(
    embeddings: dict, step_labels: list[int], seed: int = 0, iterations: int = 1000
) -> dict:
    """Project every stored (kind, layer) embedding matrix to 2D.

    Sequences shorter than the projection minimum (5 rows) are skipped:
    a 3-step trace is valid but has no meaningful trajectory to draw.
    """
    if len(step_labels) < 5:
        return {}
    out = {}
    for (kind, layer), matrix in embeddings.items():
        seq = EmbeddingSequence(kind=kind, layer=layer, matrix=matrix, step_labels=step_labels)
        out[(kind, layer)] = tsne(seq, TsneConfig(seed=seed, iterations=iterations))
    return out


def compute_curves(
    trace: DiffusionTrace, manifest: CorpusManifest, cfg: RuntimeConfig
) -> dict:
    source_ref = manifest.load_take(trace.job.source_singer, trace.job.song)
    target_ref = manifest.load_take(trace.job.target_singer, trace.job.song)
    return {
        kind: metric_curve(trace, target_ref, source_ref, kind, cfg.dsp)
        for kind in MetricKind
    }


def full_convert(
    job: ConversionJob,
    bundle: CheckpointBundle,
    manifest: CorpusManifest,
    cfg: RuntimeConfig,
    store: TraceStore | None = None,
    projection_iterations: int = 1000,
) -> DiffusionTrace:
    trace = convert(job, bundle, manifest, cfg.dsp)
    embeddings = capture_embeddings(trace)
    projections = compute_projections(
        embeddings, trace.step_list(), seed=job.seed, iterations=projection_iterations
    )
    curves = compute_curves(trace, manifest, cfg)
    if store is not None:
        store.write_trace(trace, embeddings=embeddings, projections=projections, curves=curves)
    return trace


def evaluate_pool(store: TraceStore) -> dict:
    """Summarize final-step metric values across every stored trace and
    persist the result for the summary/best endpoints."""
    pool = []
    per_trace = {}
    for trace_id in store.list_traces():
        curves = store.read_curves(trace_id)
        values = {kind: curves[kind].values[-1] if kind in curves else None for kind in MetricKind}
        pool.append(PoolEntry(conversion_id=trace_id, values=values))
        per_trace[trace_id] = {k.value: v for k, v in values.items()}
    summary = summarize(pool)
    best = {}
    for kind in MetricKind:
        try:
            best[kind.value] = best_sample(pool, kind)
        except Exception:
            best[kind.value] = None
    doc = {
        "pool_size": summary.pool_size,
        "means": {k.value: v for k, v in summary.means.items()},
        "display": {k.value: v for k, v in summary.display.items()},
        "clamped": {k.value: v for k, v in summary.clamped.items()},
        "polarity": {
            k.value: ("higher_better" if k.higher_is_better else "lower_better")
            for k in MetricKind
        },
        "per_trace": per_trace,
        "best": best,
    }
    store.write_metrics_summary(doc)
    return doc
