"""HTTP API over the trace store for the browser viewer.

Read endpoints serve stored bytes unchanged (matrix payloads travel as a
dims + base64 float32 envelope, so a client-side Float32Array sees exactly
the stored values). POST /convert runs synchronously under a per-job lock;
a duplicate in-flight job is refused with 409, and a finished job is
served from the store.
"""

from __future__ import annotations

import base64
import io
import threading

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import orchestrate
from .config import RuntimeConfig
from .conditions import MelNormalizer
from .convert import ConversionJob
from .corpus import load_corpus
from .checkpoint import load_checkpoint
from .dsp import Waveform, griffin_lim, save_wav
from .metrics import MetricKind
from .store import DISPLAY_MODES, StoreError, TraceStore


def matrix_envelope(array: np.ndarray) -> dict:
    array = np.ascontiguousarray(array, dtype="<f4")
    return {
        "dims": list(array.shape),
        "dtype": "float32",
        "data": base64.b64encode(array.tobytes()).decode("ascii"),
    }


class ConversionLocks:
    """Per-job-key locks; an in-flight duplicate is detected, not queued."""

    def __init__(self):
        self._mutex = threading.Lock()
        self._busy: set[str] = set()

    def acquire(self, key: str) -> bool:
        with self._mutex:
            if key in self._busy:
                return False
            self._busy.add(key)
            return True

    def release(self, key: str) -> None:
        with self._mutex:
            self._busy.discard(key)


def create_app(store: TraceStore, cfg: RuntimeConfig | None = None, ui_dir=None) -> FastAPI:
    cfg = cfg or RuntimeConfig()
    app = FastAPI(title="svctrace", docs_url=None, redoc_url=None)
    locks = ConversionLocks()
    render_locks = ConversionLocks()
    app.state.conversion_locks = locks
    runtime: dict = {}  # lazily loaded checkpoint bundle + corpus manifest

    def get_runtime():
        if "bundle" not in runtime:
            try:
                runtime["bundle"] = load_checkpoint(store.default_checkpoint())
                runtime["manifest"] = load_corpus(store.corpus_dir)
            except (StoreError, FileNotFoundError) as exc:
                raise HTTPException(503, f"conversion runtime unavailable: {exc}")
        return runtime["bundle"], runtime["manifest"]

    def trace_meta_or_404(trace_id: str) -> dict:
        try:
            return store.read_meta(trace_id)
        except KeyError:
            raise HTTPException(404, f"unknown trace {trace_id}")

    @app.get("/catalog")
    def catalog():
        doc = store.catalog()
        doc["display_modes"] = list(DISPLAY_MODES)
        return doc

    @app.get("/trace/{trace_id}/meta")
    def trace_meta(trace_id: str):
        return trace_meta_or_404(trace_id)

    @app.get("/trace/{trace_id}/mel")
    def trace_mel(trace_id: str, step: int = Query(...), kind: str = Query("yt")):
        trace_meta_or_404(trace_id)
        if kind not in ("yt", "x0"):
            raise HTTPException(400, f"mel kind must be yt or x0, got {kind!r}")
        try:
            mel = store.read_mel_step(trace_id, step, which=kind)
        except KeyError as exc:
            raise HTTPException(404, str(exc))
        return matrix_envelope(mel)

    @app.get("/trace/{trace_id}/f0")
    def trace_f0(trace_id: str, step: int = Query(...)):
        trace_meta_or_404(trace_id)
        try:
            contour = store.read_f0_step(trace_id, step)
        except KeyError as exc:
            raise HTTPException(404, str(exc))
        except StoreError as exc:
            raise HTTPException(404, str(exc))
        return matrix_envelope(contour)

    @app.get("/trace/{trace_id}/audio")
    def trace_audio(trace_id: str, step: int = Query(...)):
        meta = trace_meta_or_404(trace_id)
        try:
            cache = store.audio_cache_path(trace_id, step)
        except KeyError as exc:
            raise HTTPException(404, str(exc))
        if not cache.exists():
            key = f"render:{trace_id}:{step}"
            if not render_locks.acquire(key):
                raise HTTPException(409, "render already in flight")
            try:
                if not cache.exists():
                    mel = store.read_mel_step(trace_id, step, which="x0")
                    norm = MelNormalizer(meta["mel_norm"]["lo"], meta["mel_norm"]["hi"])
                    wave = griffin_lim(norm.denormalize_mel(mel, cfg.dsp), cfg.dsp)
                    tmp = cache.with_suffix(".tmp.wav")
                    save_wav(tmp, wave)
                    tmp.replace(cache)
            finally:
                render_locks.release(key)
        return Response(content=cache.read_bytes(), media_type="audio/wav")

    @app.get("/trace/{trace_id}/metrics")
    def trace_metrics(trace_id: str):
        trace_meta_or_404(trace_id)
        try:
            curves = store.read_curves(trace_id)
        except StoreError as exc:
            raise HTTPException(404, str(exc))
        return {
            kind.value: {"steps": c.steps, "values": c.values} for kind, c in curves.items()
        }

    @app.get("/trace/{trace_id}/projection")
    def trace_projection(
        trace_id: str, embedding: str = Query(...), layer: str | None = Query(None)
    ):
        trace_meta_or_404(trace_id)
        if embedding not in ("step", "step_noise", "step_noise_cond"):
            raise HTTPException(400, f"unknown embedding {embedding!r}")
        if embedding != "step" and layer not in ("first", "middle", "last"):
            raise HTTPException(400, "layer must be first|middle|last for combined embeddings")
        key = embedding if embedding == "step" else f"{embedding}:{layer}"
        try:
            doc = store.read_projections(trace_id)
        except StoreError as exc:
            raise HTTPException(404, str(exc))
        if key not in doc:
            raise HTTPException(404, f"projection {key} not stored for {trace_id}")
        return doc[key]

    @app.get("/meldiff")
    def meldiff(a: str = Query(...), b: str = Query(...), kind: str = Query("yt")):
        def parse(ref: str):
            parts = ref.rsplit(":", 1)
            if len(parts) != 2:
                raise HTTPException(400, f"expected id:step, got {ref!r}")
            try:
                return parts[0], int(parts[1])
            except ValueError:
                raise HTTPException(400, f"bad step in {ref!r}")

        (id_a, step_a), (id_b, step_b) = parse(a), parse(b)
        trace_meta_or_404(id_a)
        trace_meta_or_404(id_b)
        try:
            mel_a = store.read_mel_step(id_a, step_a, which=kind)
            mel_b = store.read_mel_step(id_b, step_b, which=kind)
        except KeyError as exc:
            raise HTTPException(404, str(exc))
        except StoreError as exc:
            raise HTTPException(400, str(exc))
        if mel_a.shape != mel_b.shape:
            raise HTTPException(400, f"mel shapes differ: {mel_a.shape} vs {mel_b.shape}")
        envelope = matrix_envelope(np.abs(mel_a - mel_b))
        envelope["color_scale"] = {"large": "warm", "small": "cool"}
        return envelope

    @app.get("/metrics/summary")
    def metrics_summary():
        try:
            return store.read_metrics_summary()
        except StoreError as exc:
            raise HTTPException(404, str(exc))

    @app.get("/metrics/best")
    def metrics_best(kind: str = Query(...)):
        try:
            metric = MetricKind(kind)
        except ValueError:
            raise HTTPException(400, f"unknown metric kind {kind!r}")
        try:
            summary = store.read_metrics_summary()
        except StoreError as exc:
            raise HTTPException(404, str(exc))
        best = summary.get("best", {}).get(metric.value)
        if best is None:
            raise HTTPException(404, f"no best sample recorded for {metric.value}")
        return {"kind": metric.value, "trace_id": best}

    @app.post("/convert")
    def convert_endpoint(body: dict):
        required = {"source_singer", "song", "target_singer"}
        if not required.issubset(body):
            raise HTTPException(400, f"body must contain {sorted(required)}")
        try:
            job = ConversionJob(
                source_singer=int(body["source_singer"]),
                song=int(body["song"]),
                target_singer=int(body["target_singer"]),
                num_steps=int(body.get("num_steps", cfg.schedule.num_steps)),
                seed=int(body.get("seed", 0)),
            )
        except (TypeError, ValueError):
            raise HTTPException(400, "malformed job parameters")
        bundle, manifest = get_runtime()
        n_singers = len(manifest.singers)
        n_songs = len(manifest.songs)
        if not (0 <= job.source_singer < n_singers and 0 <= job.target_singer < n_singers):
            raise HTTPException(404, "unknown singer id")
        if not 0 <= job.song < n_songs:
            raise HTTPException(404, "unknown song id")
        if not 1 <= job.num_steps <= bundle.schedule.num_steps:
            raise HTTPException(400, "num_steps out of range")

        trace_id = job.trace_id()
        if store.has_trace(trace_id):
            return JSONResponse({"trace_id": trace_id, "cached": True})
        if not locks.acquire(trace_id):
            raise HTTPException(409, f"conversion {trace_id} already in flight")
        try:
            orchestrate.full_convert(job, bundle, manifest, cfg, store=store)
        finally:
            locks.release(trace_id)
        return JSONResponse({"trace_id": trace_id, "cached": False})

    if ui_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
