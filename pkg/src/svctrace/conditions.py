"""Condition features steering the denoiser, plus mel normalization.

The three streams (content, melody, speaker) share the mel frame grid.
Content uses per-utterance normalized cepstra as a crude speaker-removed
representation; melody is z-normalized log-F0 over voiced frames plus a
voicing flag; the speaker stream is an id resolved through the model's
embedding table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DspConfig
from .dsp import DspError, MelSpectrogram, PitchContour, Waveform, extract_f0, mel_cepstrum, mel_spectrogram


@dataclass(frozen=True)
class ConditionSet:
    content: np.ndarray  # (frames, content_dim) float32
    melody: np.ndarray  # (frames, 2) float32: normalized log-F0, voicing flag
    speaker_id: int

    def __post_init__(self):
        content = np.ascontiguousarray(self.content, dtype=np.float32)
        melody = np.ascontiguousarray(self.melody, dtype=np.float32)
        if content.ndim != 2 or melody.ndim != 2 or melody.shape[1] != 2:
            raise ValueError("condition streams must be (frames, dim) with melody dim 2")
        if content.shape[0] != melody.shape[0]:
            raise ValueError(
                f"condition frame mismatch: content {content.shape[0]} vs melody {melody.shape[0]}"
            )
        object.__setattr__(self, "content", content)
        object.__setattr__(self, "melody", melody)

    @property
    def frames(self) -> int:
        return self.content.shape[0]


@dataclass(frozen=True)
class MelNormalizer:
    """Affine map of log-mel values into [-1, 1] fitted on a corpus."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"degenerate mel range [{self.lo}, {self.hi}]")

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return (2.0 * (values - self.lo) / (self.hi - self.lo) - 1.0).astype(np.float32)

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return ((np.asarray(values, dtype=np.float64) + 1.0) / 2.0) * (self.hi - self.lo) + self.lo

    def denormalize_mel(self, values: np.ndarray, cfg: DspConfig) -> MelSpectrogram:
        raw = self.denormalize(values)
        raw = np.maximum(raw, np.log(cfg.log_floor))
        return MelSpectrogram(
            values=raw.astype(np.float32),
            hop_length=cfg.hop_length,
            win_length=cfg.win_length,
            sample_rate=cfg.sample_rate,
            log_floor=cfg.log_floor,
        )

    @classmethod
    def fit(cls, mels: list[MelSpectrogram]) -> "MelNormalizer":
        if not mels:
            raise ValueError("cannot fit normalizer on an empty corpus")
        lo = min(float(m.values.min()) for m in mels)
        hi = max(float(m.values.max()) for m in mels)
        return cls(lo=lo, hi=hi)


def content_features(mel: MelSpectrogram, n_coeff: int = 20) -> np.ndarray:
    """First ``n_coeff`` cepstral coefficients (c0 excluded), normalized to
    zero mean / unit variance per coefficient over the utterance."""
    cep = mel_cepstrum(mel, order=n_coeff).without_c0()
    mean = cep.mean(axis=0)
    std = cep.std(axis=0)
    safe = np.where(std > 1e-8, std, 1.0)
    out = (cep - mean) / safe
    out[:, std <= 1e-8] = 0.0
    return out.astype(np.float32)


def melody_features(f0: PitchContour) -> np.ndarray:
    """Voiced log-F0 z-normalized over voiced frames, zeros elsewhere,
    stacked with the voicing flag."""
    voiced = f0.voiced_mask
    stream = np.zeros(len(f0))
    if voiced.sum() >= 2:
        logf0 = np.log(f0.f0_hz[voiced])
        std = logf0.std()
        stream[voiced] = (logf0 - logf0.mean()) / (std if std > 1e-8 else 1.0)
    return np.stack([stream, voiced.astype(np.float64)], axis=1).astype(np.float32)


def build_conditions(
    source: Waveform,
    target_singer: int,
    cfg: DspConfig,
    n_singers: int,
    content_dim: int = 20,
) -> ConditionSet:
    """Assemble the condition streams for converting ``source`` into the
    voice of ``target_singer``."""
    if not 0 <= target_singer < n_singers:
        raise KeyError(f"unknown singer id {target_singer} (catalog has {n_singers})")
    mel = mel_spectrogram(source, cfg)
    f0 = extract_f0(source, cfg)
    if mel.frames != len(f0):
        raise DspError("mel and F0 frame grids diverged")  # internal invariant
    return ConditionSet(
        content=content_features(mel, n_coeff=content_dim),
        melody=melody_features(f0),
        speaker_id=int(target_singer),
    )
