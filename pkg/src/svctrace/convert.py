"""End-to-end conversion producing fully instrumented traces.

A conversion builds conditions from the source take and the target singer,
runs the reverse sampler with capture callbacks, renders every clean-state
estimate to audio for pitch tracking, and assembles the result into an
immutable, fully reproducible trace.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import torch

from .checkpoint import CheckpointBundle
from .conditions import ConditionSet, build_conditions
from .config import DspConfig
from .corpus import CorpusManifest
from .dsp import PitchContour, extract_f0, griffin_lim
from .sampler import ddim_sample


class ConversionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConversionJob:
    source_singer: int
    song: int
    target_singer: int
    num_steps: int = 100
    seed: int = 0

    def trace_id(self) -> str:
        return (
            f"s{self.source_singer}-g{self.song}-t{self.target_singer}"
            f"-n{self.num_steps}-r{self.seed}"
        )


@dataclass(frozen=True)
class StepRecord:
    step: int
    noisy_mel: np.ndarray  # y_t, normalized mel space, float32
    clean_estimate: np.ndarray  # x0 prediction, normalized mel space, float32
    f0: PitchContour | None
    taps: dict | None


@dataclass(frozen=True)
class DiffusionTrace:
    trace_id: str
    job: ConversionJob
    records: list[StepRecord]  # visit order, steps strictly decreasing to 0
    final_mel: np.ndarray  # normalized space, float32
    schedule_params: tuple[int, float, float]
    mel_norm_lo: float
    mel_norm_hi: float
    sample_rate: int
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        steps = self.step_list()
        if any(a <= b for a, b in zip(steps, steps[1:])):
            raise ConversionError(f"trace steps must strictly decrease, got {steps[:5]}...")
        if steps and steps[-1] != 0:
            raise ConversionError("trace must end at step 0")
        for rec in self.records:
            if not np.all(np.isfinite(rec.noisy_mel)) or not np.all(
                np.isfinite(rec.clean_estimate)
            ):
                raise ConversionError(f"non-finite mel at step {rec.step}")

    def step_list(self) -> list[int]:
        return [r.step for r in self.records]

    @property
    def frames(self) -> int:
        return self.final_mel.shape[0]

    @property
    def n_mels(self) -> int:
        return self.final_mel.shape[1]

    def record_at(self, step: int) -> StepRecord:
        for rec in self.records:
            if rec.step == step:
                return rec
        raise KeyError(f"step {step} not in trace {self.trace_id}")

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for rec in self.records:
            h.update(rec.noisy_mel.tobytes())
            h.update(rec.clean_estimate.tobytes())
            if rec.f0 is not None:
                h.update(rec.f0.f0_hz.astype(np.float32).tobytes())
        h.update(self.final_mel.tobytes())
        return h.hexdigest()


def convert(
    job: ConversionJob,
    bundle: CheckpointBundle,
    manifest: CorpusManifest,
    dsp_cfg: DspConfig,
    capture_taps: bool = True,
    track_pitch: bool = True,
    single_thread: bool = True,
) -> DiffusionTrace:
    """Run one conversion job against a trained checkpoint.

    ``single_thread`` pins torch to one thread for bit-reproducible traces
    (the determinism contract only holds in single-threaded arithmetic).
    """
    n_singers = len(manifest.singers)
    if not (0 <= job.source_singer < n_singers and 0 <= job.target_singer < n_singers):
        raise ConversionError(f"job {job} references unknown singers (catalog {n_singers})")
    if job.target_singer >= bundle.model_cfg.n_speakers:
        raise ConversionError(
            f"target singer {job.target_singer} exceeds checkpoint speaker table "
            f"({bundle.model_cfg.n_speakers})"
        )
    if single_thread:
        torch.set_num_threads(1)

    source = manifest.load_take(job.source_singer, job.song)
    cond = build_conditions(
        source,
        job.target_singer,
        dsp_cfg,
        n_singers=max(n_singers, bundle.model_cfg.n_speakers),
        content_dim=bundle.model_cfg.content_dim,
    )

    records: list[StepRecord] = []

    def capture(t: int, y_t: np.ndarray, x0: np.ndarray, taps: dict | None):
        records.append(
            StepRecord(step=t, noisy_mel=y_t, clean_estimate=x0, f0=None, taps=taps)
        )

    try:
        final = ddim_sample(
            bundle.net,
            cond,
            bundle.schedule,
            num_steps=job.num_steps,
            seed=job.seed,
            n_mels=bundle.model_cfg.n_mels,
            on_step=capture,
            capture_taps=capture_taps,
        )
    except Exception as exc:
        raise ConversionError(f"sampling failed for job {job.trace_id()}: {exc}") from exc

    if track_pitch:
        records = [
            StepRecord(
                step=r.step,
                noisy_mel=r.noisy_mel,
                clean_estimate=r.clean_estimate,
                f0=_step_pitch(r.clean_estimate, bundle, dsp_cfg),
                taps=r.taps,
            )
            for r in records
        ]

    return DiffusionTrace(
        trace_id=job.trace_id(),
        job=job,
        records=records,
        final_mel=final,
        schedule_params=bundle.schedule_params,
        mel_norm_lo=bundle.mel_norm.lo,
        mel_norm_hi=bundle.mel_norm.hi,
        sample_rate=dsp_cfg.sample_rate,
    )


def _step_pitch(clean_estimate: np.ndarray, bundle: CheckpointBundle, dsp_cfg: DspConfig):
    """Pitch of the clean-state estimate via a mel-inverted render.

    The raw noisy state at high step indices has no meaningful pitch, so
    instrumentation always reads F0 from the denoised estimate.
    """
    mel = bundle.mel_norm.denormalize_mel(clean_estimate, dsp_cfg)
    render = griffin_lim(mel, dsp_cfg)
    return extract_f0(render, dsp_cfg)


def render_step(trace: DiffusionTrace, step: int, dsp_cfg: DspConfig):
    """Waveform render of a step's clean-state estimate."""
    from .conditions import MelNormalizer

    norm = MelNormalizer(trace.mel_norm_lo, trace.mel_norm_hi)
    rec = trace.record_at(step)
    mel = norm.denormalize_mel(rec.clean_estimate, dsp_cfg)
    return griffin_lim(mel, dsp_cfg)


def capture_embeddings(trace: DiffusionTrace) -> dict[tuple[str, str | None], np.ndarray]:
    """Per-(kind, layer) matrices of tap vectors, rows in sampler visit order.

    The plain step encoding collapses the layer axis; the other two kinds
    appear for the first, middle, and last residual layers.
    """
    if not trace.records or trace.records[0].taps is None:
        raise ConversionError("trace was produced without tap capture")
    keys = sorted(trace.records[0].taps.keys(), key=str)
    out = {}
    for key in keys:
        out[key] = np.stack([rec.taps[key] for rec in trace.records]).astype(np.float32)
    return out
