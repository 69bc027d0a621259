"""Configuration objects shared across the pipeline.

Two presets are provided: ``toy`` is the desk-scale configuration every
test runs against, ``full_scale`` records the full-size hyperparameters
for reference (nothing in the test suite requires training it).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path


@dataclass(frozen=True)
class DspConfig:
    sample_rate: int = 16000
    n_fft: int = 1024
    win_length: int = 1024
    hop_length: int = 256
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float | None = None  # None = Nyquist
    log_floor: float = 1e-10
    f0_min: float = 55.0
    f0_max: float = 1400.0
    yin_threshold: float = 0.15
    griffin_lim_iters: int = 32
    cepstral_order: int = 13  # c1..c13 enter distances, c0 is kept but excluded

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    @property
    def effective_fmax(self) -> float:
        return self.nyquist if self.fmax is None else self.fmax


@dataclass(frozen=True)
class ModelConfig:
    n_mels: int = 80
    n_layers: int = 4
    channels: int = 64
    dilation_cycle: tuple[int, ...] = (1, 2, 4, 8)
    kernel_size: int = 3
    step_embed_dim: int = 128
    content_dim: int = 20
    melody_dim: int = 2  # normalized log-F0 + voicing flag
    speaker_embed_dim: int = 16
    n_speakers: int = 8

    @property
    def condition_dim(self) -> int:
        return self.content_dim + self.melody_dim + self.speaker_embed_dim

    @property
    def tap_layers(self) -> tuple[int, int, int]:
        """1-indexed residual layers tapped for embeddings: first, middle, last."""
        n = self.n_layers
        return (1, (n + 1) // 2, n)


@dataclass(frozen=True)
class ScheduleConfig:
    """Linear beta ramp; endpoints scale with 1000/T so the terminal
    signal-to-noise ratio stays comparable across step counts.

    The scaled default only stays below 1 for T >= 21; pass explicit
    endpoints for smaller schedules."""

    num_steps: int = 100
    beta_start: float | None = None
    beta_end: float | None = None

    def resolved(self) -> tuple[int, float, float]:
        ratio = 1000.0 / self.num_steps
        start = 1e-4 * ratio if self.beta_start is None else self.beta_start
        end = 0.02 * ratio if self.beta_end is None else self.beta_end
        return self.num_steps, start, end


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 4000
    batch_size: int = 8
    crop_frames: int = 128
    learning_rate: float = 2e-3
    adam_betas: tuple[float, float] = (0.9, 0.999)
    log_every: int = 50
    checkpoint_every: int = 1000
    num_threads: int | None = 2  # set 1 for bit-deterministic training
    loss_smooth_window: int = 50


@dataclass(frozen=True)
class CorpusConfig:
    n_singers: int = 4
    n_songs: int = 4
    max_duration_s: float = 6.0
    seed: int = 1234


@dataclass(frozen=True)
class RuntimeConfig:
    dsp: DspConfig = field(default_factory=DspConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)


def toy_config() -> RuntimeConfig:
    return RuntimeConfig()


def full_scale_config() -> RuntimeConfig:
    """Full-scale hyperparameters recorded for reference: 20 residual layers,
    1000 diffusion steps. Not exercised by the acceptance suite."""
    return RuntimeConfig(
        model=ModelConfig(n_layers=20, channels=256, n_speakers=16),
        schedule=ScheduleConfig(num_steps=1000),
        train=TrainConfig(total_steps=200_000),
    )


_PRESETS = {"toy": toy_config, "full_scale": full_scale_config}


def load_config(preset: str = "toy", overrides_path: str | Path | None = None) -> RuntimeConfig:
    """Resolve a preset plus optional JSON overrides.

    The override file may contain any subset of the section names
    (dsp, model, schedule, train, corpus) mapping to field overrides.
    """
    if preset not in _PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(_PRESETS)}")
    cfg = _PRESETS[preset]()
    if overrides_path is None:
        return cfg
    raw = json.loads(Path(overrides_path).read_text())
    for section, values in raw.items():
        if section not in ("dsp", "model", "schedule", "train", "corpus"):
            raise ValueError(f"unknown config section {section!r}")
        current = getattr(cfg, section)
        fixed = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
        cfg = replace(cfg, **{section: replace(current, **fixed)})
    return cfg


def config_to_dict(cfg: RuntimeConfig) -> dict:
    return asdict(cfg)
