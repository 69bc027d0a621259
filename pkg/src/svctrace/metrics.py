"""Objective conversion metrics and per-step metric curves.

Five metrics, two polarities: timbre similarity and F0 correlation improve
upward, Frechet distance, F0 RMSE and mel-cepstral distortion improve
downward. Per-step curves evaluate the clean-state estimate at every
visited sampler step: timbre-oriented metrics compare against the target
singer's reference, melody/content-oriented ones against the source.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .conditions import MelNormalizer
from .config import DspConfig
from .convert import DiffusionTrace
from .dsp import (
    CepstralSequence,
    MelSpectrogram,
    PitchContour,
    Waveform,
    mel_cepstrum,
    mel_spectrogram,
)

MCD_CONST = (10.0 / math.log(10.0)) * math.sqrt(2.0)


class MetricError(ValueError):
    pass


class MetricKind(enum.Enum):
    DEMBED = "Dembed"
    F0CORR = "F0CORR"
    FAD = "FAD"
    F0RMSE = "F0RMSE"
    MCD = "MCD"

    @property
    def higher_is_better(self) -> bool:
        return self in (MetricKind.DEMBED, MetricKind.F0CORR)


# ---------------------------------------------------------------------------
# timbre embedding and cosine similarity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimbreEmbedding:
    """Per-channel mean and standard deviation of log-mel over frames."""

    vector: np.ndarray  # (2 * n_mels,) float64

    def __post_init__(self):
        vec = np.ascontiguousarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(vec)):
            raise MetricError("timbre embedding must be finite")
        half = vec.size // 2
        if np.any(vec[half:] < 0):
            raise MetricError("std half of timbre embedding must be non-negative")
        object.__setattr__(self, "vector", vec)


def timbre_embed(mel: MelSpectrogram) -> TimbreEmbedding:
    if mel.frames < 2:
        raise MetricError(f"timbre embedding needs >= 2 frames, got {mel.frames}")
    values = mel.values.astype(np.float64)
    return TimbreEmbedding(np.concatenate([values.mean(axis=0), values.std(axis=0)]))


def dembed(a, b) -> float:
    """Cosine similarity between two timbre vectors (TimbreEmbedding or raw)."""
    va = a.vector if isinstance(a, TimbreEmbedding) else np.asarray(a, dtype=np.float64)
    vb = b.vector if isinstance(b, TimbreEmbedding) else np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise MetricError("embedding dimensions differ")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise MetricError("cosine similarity undefined for a zero vector")
    return float(np.dot(va, vb) / (na * nb))


# ---------------------------------------------------------------------------
# F0 agreement
# ---------------------------------------------------------------------------


def _joint_voiced(f: PitchContour, g: PitchContour) -> np.ndarray:
    if len(f) != len(g):
        raise MetricError(f"contour lengths differ: {len(f)} vs {len(g)}")
    return f.voiced_mask & g.voiced_mask


def f0corr(f: PitchContour, g: PitchContour) -> float:
    """Pearson correlation over frames voiced in both contours."""
    joint = _joint_voiced(f, g)
    if joint.sum() < 2:
        raise MetricError("need at least 2 jointly voiced frames")
    x, y = f.f0_hz[joint], g.f0_hz[joint]
    if x.std() == 0.0 or y.std() == 0.0:
        raise MetricError("correlation undefined for constant contour")
    return float(np.corrcoef(x, y)[0, 1])


def f0rmse(f: PitchContour, g: PitchContour) -> float:
    joint = _joint_voiced(f, g)
    if joint.sum() < 1:
        raise MetricError("no jointly voiced frames")
    d = f.f0_hz[joint] - g.f0_hz[joint]
    return float(np.sqrt(np.mean(d * d)))


# ---------------------------------------------------------------------------
# mel-cepstral distortion with DTW alignment
# ---------------------------------------------------------------------------


def dtw_align(dist: np.ndarray) -> tuple[float, list[tuple[int, int]]]:
    """Minimal-cost monotone alignment through a frame-pair distance matrix.

    Returns (total cost, path) for steps (i-1,j), (i,j-1), (i-1,j-1).
    """
    n, m = dist.shape
    if n == 0 or m == 0:
        raise MetricError("empty distance matrix")
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        row = dist[i - 1]
        prev = acc[i - 1]
        cur = acc[i]
        for j in range(1, m + 1):
            cur[j] = row[j - 1] + min(prev[j], prev[j - 1], cur[j - 1])
    path = []
    i, j = n, m
    while i > 0 or j > 0:
        path.append((i - 1, j - 1))
        moves = []
        if i > 0 and j > 0:
            moves.append((acc[i - 1, j - 1], i - 1, j - 1))
        if i > 0:
            moves.append((acc[i - 1, j], i - 1, j))
        if j > 0:
            moves.append((acc[i, j - 1], i, j - 1))
        _, i, j = min(moves)
    path.reverse()
    return float(acc[n, m]), path


def mcd(a: CepstralSequence, b: CepstralSequence) -> float:
    """Mean of (10/ln10) * sqrt(2) * ||delta c_(1..K)|| along the DTW path."""
    ca, cb = a.without_c0(), b.without_c0()
    if ca.shape[0] == 0 or cb.shape[0] == 0:
        raise MetricError("empty cepstral sequence")
    if ca.shape[1] != cb.shape[1]:
        raise MetricError("cepstral orders differ")
    diff = ca[:, None, :] - cb[None, :, :]
    dist = MCD_CONST * np.sqrt(np.sum(diff * diff, axis=2))
    total, path = dtw_align(dist)
    return total / len(path)


# ---------------------------------------------------------------------------
# Frechet distance between embedding sets
# ---------------------------------------------------------------------------


def _sym_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root; negative eigenvalues clamp to zero."""
    eigvals, eigvecs = np.linalg.eigh((matrix + matrix.T) / 2.0)
    eigvals = np.maximum(eigvals, 0.0)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def fad(a: np.ndarray, b: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two embedding sets (n, d)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise MetricError("embedding sets must be (n, d) with matching d")
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise MetricError("need at least 2 samples per set")
    dim = a.shape[1]
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.cov(a, rowvar=False)
    cov_b = np.cov(b, rowvar=False)
    if a.shape[0] <= dim:
        cov_a = cov_a + 1e-6 * np.eye(dim)
    if b.shape[0] <= dim:
        cov_b = cov_b + 1e-6 * np.eye(dim)
    root_a = _sym_sqrt(cov_a)
    cross = _sym_sqrt(root_a @ cov_b @ root_a)
    mean_term = float(np.sum((mu_a - mu_b) ** 2))
    value = mean_term + float(np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross))
    return max(value, 0.0)


def window_embeddings(mel: MelSpectrogram, cfg: DspConfig, window_s: float = 1.0) -> np.ndarray:
    """Timbre embeddings over sliding windows (50% overlap) for FAD."""
    win = max(2, int(window_s * cfg.sample_rate / cfg.hop_length))
    hop = max(1, win // 2)
    values = mel.values
    if values.shape[0] < win:
        raise MetricError(f"mel too short for {window_s} s windows")
    rows = []
    for start in range(0, values.shape[0] - win + 1, hop):
        chunk = values[start : start + win].astype(np.float64)
        rows.append(np.concatenate([chunk.mean(axis=0), chunk.std(axis=0)]))
    return np.stack(rows)


# ---------------------------------------------------------------------------
# per-step curves, pool summaries, best-sample selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricCurve:
    kind: MetricKind
    steps: list[int]
    values: list[float | None]  # None marks an undefined point (gap)

    def __post_init__(self):
        if len(self.steps) != len(self.values):
            raise MetricError("curve steps/values length mismatch")
        for v in self.values:
            if v is not None and not np.isfinite(v):
                raise MetricError("curve values must be finite or explicit gaps")

    def finite(self) -> list[tuple[int, float]]:
        return [(s, v) for s, v in zip(self.steps, self.values) if v is not None]

    def value_at(self, step: int) -> float | None:
        return self.values[self.steps.index(step)]


def metric_curve(
    trace: DiffusionTrace,
    target_ref: Waveform,
    source_ref: Waveform,
    kind: MetricKind,
    cfg: DspConfig,
) -> MetricCurve:
    """Evaluate one metric at every visited step of a trace.

    Timbre metrics (Dembed, FAD) compare the step's clean-state estimate
    against the target reference; melody/content metrics (F0CORR, F0RMSE,
    MCD) compare against the source. Undefined points become gaps.
    """
    norm = MelNormalizer(trace.mel_norm_lo, trace.mel_norm_hi)
    target_mel = mel_spectrogram(target_ref, cfg)
    source_mel = mel_spectrogram(source_ref, cfg)
    from .dsp import extract_f0  # local import keeps module load light

    source_f0 = extract_f0(source_ref, cfg)
    target_embed = timbre_embed(target_mel)
    target_windows = window_embeddings(target_mel, cfg)
    source_cep = mel_cepstrum(source_mel, order=cfg.cepstral_order)

    steps, values = [], []
    for rec in trace.records:
        step_mel = norm.denormalize_mel(rec.clean_estimate, cfg)
        try:
            if kind is MetricKind.DEMBED:
                value = dembed(timbre_embed(step_mel), target_embed)
            elif kind is MetricKind.FAD:
                value = fad(window_embeddings(step_mel, cfg), target_windows)
            elif kind is MetricKind.MCD:
                value = mcd(mel_cepstrum(step_mel, order=cfg.cepstral_order), source_cep)
            elif kind is MetricKind.F0CORR:
                if rec.f0 is None:
                    raise MetricError("trace lacks per-step pitch")
                value = f0corr(rec.f0, source_f0)
            else:  # F0RMSE
                if rec.f0 is None:
                    raise MetricError("trace lacks per-step pitch")
                value = f0rmse(rec.f0, source_f0)
        except MetricError:
            value = None
        steps.append(rec.step)
        values.append(value)
    return MetricCurve(kind=kind, steps=steps, values=values)


def tail_relative_change(curve: MetricCurve, fraction: float = 0.1) -> float:
    """Relative spread of the curve over its final ``fraction`` of steps.

    (max - min) over the tail divided by |final value|; gauges whether the
    curve has converged by the end of the reverse process.
    """
    finite = curve.finite()
    if not finite:
        raise MetricError("curve has no finite values")
    k = max(2, int(math.ceil(len(finite) * fraction)))
    tail = [v for _, v in finite[-k:]]
    final = finite[-1][1]
    denom = max(abs(final), 1e-9)
    return (max(tail) - min(tail)) / denom


@dataclass(frozen=True)
class PoolEntry:
    """Final-step metric values for one evaluated conversion."""

    conversion_id: str
    values: dict[MetricKind, float | None]


@dataclass(frozen=True)
class MetricSummary:
    means: dict[MetricKind, float | None]
    display: dict[MetricKind, float | None]  # raw or log10 per polarity
    clamped: dict[MetricKind, bool] = field(default_factory=dict)
    pool_size: int = 0


def summarize(pool: list[PoolEntry]) -> MetricSummary:
    """Per-kind mean of final-step values with the display transform:
    raw for higher-is-better metrics, log10 for lower-is-better ones
    (non-positive means clamp to 1e-6 with a flag)."""
    if not pool:
        raise MetricError("empty evaluation pool")
    means: dict[MetricKind, float | None] = {}
    display: dict[MetricKind, float | None] = {}
    clamped: dict[MetricKind, bool] = {}
    for kind in MetricKind:
        vals = [e.values.get(kind) for e in pool]
        vals = [v for v in vals if v is not None]
        if not vals:
            means[kind], display[kind], clamped[kind] = None, None, False
            continue
        mean = float(np.mean(vals))
        means[kind] = mean
        if kind.higher_is_better:
            display[kind], clamped[kind] = mean, False
        else:
            clamped[kind] = mean <= 0.0
            display[kind] = float(np.log10(max(mean, 1e-6)))
    return MetricSummary(means=means, display=display, clamped=clamped, pool_size=len(pool))


def best_sample(pool: list[PoolEntry], kind: MetricKind) -> str:
    """Extremal conversion for a metric; ties break to the lowest id."""
    if not pool:
        raise MetricError("empty evaluation pool")
    scored = [(e.values.get(kind), e.conversion_id) for e in pool if e.values.get(kind) is not None]
    if not scored:
        raise MetricError(f"no finite values for {kind.value}")
    if kind.higher_is_better:
        best_value = max(v for v, _ in scored)
    else:
        best_value = min(v for v, _ in scored)
    return min(cid for v, cid in scored if v == best_value)
