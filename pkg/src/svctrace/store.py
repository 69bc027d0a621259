"""Persistent, append-only trace store.

Layout under the store root:
  catalog.json              singers, songs, trace index, checkpoints
  corpus/                   synthetic corpus (manifest + wavs)
  checkpoints/              versioned binary checkpoints
  traces/<id>/meta.json     job descriptor, steps, dims, normalizer
  traces/<id>/mels_yt.bin   noisy states,  float32 [step][frame][mel]
  traces/<id>/mels_x0.bin   clean-state estimates, same layout
  traces/<id>/f0.bin        per-step pitch, float32 [step][frame]
  traces/<id>/taps.json     (kind, layer) -> base64 embedding matrix
  traces/<id>/projections.json
  traces/<id>/curves.json   metric curves with explicit null gaps
  traces/<id>/audio/        render cache, written on demand

Traces are immutable once written: the write path stages everything in a
temp directory, renames it into place, and only then updates the catalog,
so a crash at any point leaves the catalog consistent.
"""

from __future__ import annotations

import base64
import json
import os
import shutil
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .convert import ConversionJob, DiffusionTrace
from .metrics import MetricCurve, MetricKind
from .tsne import ProjectionMap

MEL_MAGIC = b"MELB"
F0_MAGIC = b"F0CB"
BLOB_VERSION = 1

DISPLAY_MODES = (
    "StepComparison",
    "SourceSingerComparison",
    "SongComparison",
    "TargetSingerComparison",
    "MetricComparison",
)


class StoreError(RuntimeError):
    pass


def tap_key(kind: str, layer: str | None) -> str:
    return kind if layer is None else f"{kind}:{layer}"


def split_tap_key(key: str) -> tuple[str, str | None]:
    if ":" in key:
        kind, layer = key.split(":", 1)
        return kind, layer
    return key, None


# ---------------------------------------------------------------------------
# binary blobs
# ---------------------------------------------------------------------------


def write_array_blob(path: Path, magic: bytes, array: np.ndarray) -> None:
    """Header: magic, version, then one u32 per dimension; payload is
    little-endian float32, row-major."""
    array = np.ascontiguousarray(array, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", BLOB_VERSION))
        fh.write(struct.pack(f"<{array.ndim}I", *array.shape))
        fh.write(array.tobytes())


def read_array_blob(path: Path, magic: bytes, ndim: int) -> np.ndarray:
    with open(path, "rb") as fh:
        got = fh.read(4)
        if got != magic:
            raise StoreError(f"bad blob magic in {path}: {got!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != BLOB_VERSION:
            raise StoreError(f"unsupported blob version {version} in {path}")
        shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        payload = fh.read()
    expected = int(np.prod(shape)) * 4
    if len(payload) != expected:
        raise StoreError(
            f"blob payload mismatch in {path}: {len(payload)} bytes, header implies {expected}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()


# ---------------------------------------------------------------------------
# store
# ---------------------------------------------------------------------------


class TraceStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "traces").mkdir(exist_ok=True)
        (self.root / "checkpoints").mkdir(exist_ok=True)
        if not self.catalog_path.exists():
            self._write_catalog(
                {
                    "version": 1,
                    "display_modes": list(DISPLAY_MODES),
                    "singers": [],
                    "songs": [],
                    "checkpoints": [],
                    "traces": {},
                }
            )

    @property
    def catalog_path(self) -> Path:
        return self.root / "catalog.json"

    @property
    def corpus_dir(self) -> Path:
        return self.root / "corpus"

    def trace_dir(self, trace_id: str) -> Path:
        return self.root / "traces" / trace_id

    def catalog(self) -> dict:
        return json.loads(self.catalog_path.read_text())

    def _write_catalog(self, catalog: dict) -> None:
        tmp = self.catalog_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(catalog, indent=2, sort_keys=True))
        os.replace(tmp, self.catalog_path)

    def register_corpus(self, manifest) -> None:
        catalog = self.catalog()
        catalog["singers"] = [asdict(s) for s in manifest.singers]
        catalog["songs"] = [asdict(s) for s in manifest.songs]
        self._write_catalog(catalog)

    def register_checkpoint(self, rel_path: str) -> None:
        catalog = self.catalog()
        if rel_path not in catalog["checkpoints"]:
            catalog["checkpoints"].append(rel_path)
            self._write_catalog(catalog)

    def default_checkpoint(self) -> Path:
        catalog = self.catalog()
        if not catalog["checkpoints"]:
            raise StoreError("no checkpoint registered in the catalog")
        return self.root / catalog["checkpoints"][-1]

    def list_traces(self) -> dict:
        return self.catalog()["traces"]

    def has_trace(self, trace_id: str) -> bool:
        return trace_id in self.catalog()["traces"]

    # -- writing ------------------------------------------------------------

    def write_trace(
        self,
        trace: DiffusionTrace,
        embeddings: dict | None = None,
        projections: dict | None = None,
        curves: dict | None = None,
    ) -> str:
        """Atomically persist a trace: stage, rename, then index."""
        trace_id = trace.trace_id
        if self.has_trace(trace_id) or self.trace_dir(trace_id).exists():
            raise StoreError(f"trace {trace_id} already exists (store is append-only)")
        staging = self.root / "traces" / f".{trace_id}.partial"
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)
        try:
            self._stage_trace(staging, trace, embeddings, projections, curves)
            os.replace(staging, self.trace_dir(trace_id))
        except Exception:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        catalog = self.catalog()
        catalog["traces"][trace_id] = {
            "job": asdict(trace.job),
            "steps": trace.step_list(),
            "frames": trace.frames,
            "n_mels": trace.n_mels,
            "content_hash": trace.content_hash(),
        }
        self._write_catalog(catalog)
        return trace_id

    def _stage_trace(self, staging: Path, trace, embeddings, projections, curves) -> None:
        yt = np.stack([r.noisy_mel for r in trace.records])
        x0 = np.stack([r.clean_estimate for r in trace.records])
        write_array_blob(staging / "mels_yt.bin", MEL_MAGIC, yt)
        write_array_blob(staging / "mels_x0.bin", MEL_MAGIC, x0)
        if all(r.f0 is not None for r in trace.records):
            f0 = np.stack([r.f0.f0_hz.astype(np.float32) for r in trace.records])
            write_array_blob(staging / "f0.bin", F0_MAGIC, f0)
        meta = {
            "trace_id": trace.trace_id,
            "job": asdict(trace.job),
            "steps": trace.step_list(),
            "frames": trace.frames,
            "n_mels": trace.n_mels,
            "schedule": {
                "num_steps": trace.schedule_params[0],
                "beta_start": trace.schedule_params[1],
                "beta_end": trace.schedule_params[2],
            },
            "mel_norm": {"lo": trace.mel_norm_lo, "hi": trace.mel_norm_hi},
            "sample_rate": trace.sample_rate,
            "content_hash": trace.content_hash(),
        }
        (staging / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
        if embeddings:
            doc = {}
            for (kind, layer), matrix in embeddings.items():
                matrix = np.ascontiguousarray(matrix, dtype="<f4")
                doc[tap_key(kind, layer)] = {
                    "dims": list(matrix.shape),
                    "data": base64.b64encode(matrix.tobytes()).decode("ascii"),
                }
            (staging / "taps.json").write_text(json.dumps(doc, sort_keys=True))
        if projections:
            doc = {}
            for (kind, layer), pmap in projections.items():
                doc[tap_key(kind, layer)] = {
                    "points": [[float(x), float(y)] for x, y in pmap.points],
                    "steps": [int(s) for s in pmap.step_labels],
                    "kl_history": [float(v) for v in pmap.kl_history],
                }
            (staging / "projections.json").write_text(json.dumps(doc, sort_keys=True))
        if curves:
            doc = {}
            for kind, curve in curves.items():
                doc[kind.value] = {"steps": curve.steps, "values": curve.values}
            (staging / "curves.json").write_text(json.dumps(doc, sort_keys=True))
        (staging / "audio").mkdir()

    # -- reading ------------------------------------------------------------

    def _trace_meta_path(self, trace_id: str) -> Path:
        path = self.trace_dir(trace_id) / "meta.json"
        if not self.has_trace(trace_id):
            raise KeyError(f"unknown trace {trace_id}")
        return path

    def read_meta(self, trace_id: str) -> dict:
        return json.loads(self._trace_meta_path(trace_id).read_text())

    def _step_index(self, trace_id: str, step: int) -> int:
        steps = self.read_meta(trace_id)["steps"]
        if step not in steps:
            raise KeyError(f"step {step} not in trace {trace_id}")
        return steps.index(step)

    def read_mels(self, trace_id: str, which: str = "x0") -> np.ndarray:
        if which not in ("x0", "yt"):
            raise StoreError(f"unknown mel kind {which!r}")
        name = "mels_x0.bin" if which == "x0" else "mels_yt.bin"
        self._trace_meta_path(trace_id)
        return read_array_blob(self.trace_dir(trace_id) / name, MEL_MAGIC, 3)

    def read_mel_step(self, trace_id: str, step: int, which: str = "yt") -> np.ndarray:
        return self.read_mels(trace_id, which)[self._step_index(trace_id, step)]

    def read_f0(self, trace_id: str) -> np.ndarray:
        self._trace_meta_path(trace_id)
        return read_array_blob(self.trace_dir(trace_id) / "f0.bin", F0_MAGIC, 2)

    def read_f0_step(self, trace_id: str, step: int) -> np.ndarray:
        return self.read_f0(trace_id)[self._step_index(trace_id, step)]

    def read_embeddings(self, trace_id: str) -> dict[tuple[str, str | None], np.ndarray]:
        self._trace_meta_path(trace_id)
        path = self.trace_dir(trace_id) / "taps.json"
        if not path.exists():
            raise StoreError(f"trace {trace_id} has no stored embeddings")
        doc = json.loads(path.read_text())
        out = {}
        for key, entry in doc.items():
            raw = base64.b64decode(entry["data"])
            out[split_tap_key(key)] = np.frombuffer(raw, dtype="<f4").reshape(entry["dims"]).copy()
        return out

    def read_projections(self, trace_id: str) -> dict:
        self._trace_meta_path(trace_id)
        path = self.trace_dir(trace_id) / "projections.json"
        if not path.exists():
            raise StoreError(f"trace {trace_id} has no stored projections")
        return json.loads(path.read_text())

    def read_curves(self, trace_id: str) -> dict[MetricKind, MetricCurve]:
        self._trace_meta_path(trace_id)
        path = self.trace_dir(trace_id) / "curves.json"
        if not path.exists():
            raise StoreError(f"trace {trace_id} has no stored curves")
        doc = json.loads(path.read_text())
        return {
            MetricKind(key): MetricCurve(
                kind=MetricKind(key), steps=entry["steps"], values=entry["values"]
            )
            for key, entry in doc.items()
        }

    def audio_cache_path(self, trace_id: str, step: int) -> Path:
        self._step_index(trace_id, step)
        return self.trace_dir(trace_id) / "audio" / f"step_{step:04d}.wav"

    def update_projections(self, trace_id: str, projections: dict) -> None:
        """Refresh derived projection data for a trace.

        Projections are derived views over the immutable tap embeddings;
        recomputing them does not touch any trace payload.
        """
        self._trace_meta_path(trace_id)
        doc = {}
        for (kind, layer), pmap in projections.items():
            doc[tap_key(kind, layer)] = {
                "points": [[float(x), float(y)] for x, y in pmap.points],
                "steps": [int(s) for s in pmap.step_labels],
                "kl_history": [float(v) for v in pmap.kl_history],
            }
        tmp = self.trace_dir(trace_id) / "projections.json.tmp"
        tmp.write_text(json.dumps(doc, sort_keys=True))
        os.replace(tmp, self.trace_dir(trace_id) / "projections.json")

    # -- metric pool ---------------------------------------------------------

    def write_metrics_summary(self, doc: dict) -> None:
        tmp = self.root / "metrics_summary.json.tmp"
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True))
        os.replace(tmp, self.root / "metrics_summary.json")

    def read_metrics_summary(self) -> dict:
        path = self.root / "metrics_summary.json"
        if not path.exists():
            raise StoreError("no metrics summary has been computed")
        return json.loads(path.read_text())
