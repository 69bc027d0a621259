"""Self-reconstruction training of the denoiser.

Each optimization step draws a batch of utterance crops, a uniform step
index in 1..T per sample, and fresh Gaussian noise; the network is trained
to predict that noise with an MSE objective under Adam. Conditions come
from the same utterance as the target mel, so the model learns to
reconstruct a singer from content + melody + its own speaker id.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .conditions import ConditionSet, MelNormalizer, build_conditions
from .config import DspConfig, ModelConfig, TrainConfig
from .denoiser import DenoiserNet
from .dsp import Waveform, mel_spectrogram
from .checkpoint import CheckpointBundle, save_checkpoint
from .schedule import NoiseSchedule, forward_noise, make_schedule


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainStats:
    step: int
    loss: float
    grad_norm: float

    def __post_init__(self):
        if not (np.isfinite(self.loss) and self.loss >= 0.0):
            raise ValueError(f"loss must be finite and non-negative, got {self.loss}")


@dataclass(frozen=True)
class TrainingItem:
    mel_norm: np.ndarray  # (frames, n_mels) float32 in [-1, 1]
    cond: ConditionSet

    @property
    def frames(self) -> int:
        return self.mel_norm.shape[0]


def prepare_training_items(
    takes: Sequence[tuple[Waveform, int]],
    dsp_cfg: DspConfig,
    content_dim: int = 20,
    n_singers: int | None = None,
) -> tuple[list[TrainingItem], MelNormalizer]:
    """Extract mels and self-reconstruction conditions for (waveform, singer)
    pairs, fitting the corpus mel normalizer along the way."""
    if not takes:
        raise ValueError("empty training corpus")
    singers = 1 + max(s for _, s in takes) if n_singers is None else n_singers
    mels = [mel_spectrogram(w, dsp_cfg) for w, _ in takes]
    norm = MelNormalizer.fit(mels)
    items = []
    for (wave, singer), mel in zip(takes, mels):
        cond = build_conditions(wave, singer, dsp_cfg, n_singers=singers, content_dim=content_dim)
        items.append(TrainingItem(mel_norm=norm.normalize(mel.values), cond=cond))
    return items, norm


def prepare_parallel_items(
    manifest,
    dsp_cfg: DspConfig,
    content_dim: int = 20,
    n_singers: int | None = None,
) -> tuple[list[TrainingItem], MelNormalizer]:
    """Self-reconstruction pairs plus same-song cross-singer supervision.

    The synthetic corpus is parallel (every singer renders every song with
    identical note timing), so conditions extracted from singer a's take
    can supervise singer b's mel of the same song. That teaches the
    combination conversion actually runs, source content with a different
    target speaker, which self-reconstruction alone never exercises.
    """
    singer_ids = sorted({s.singer_id for s in manifest.singers})
    singers = (1 + max(singer_ids)) if n_singers is None else n_singers
    song_ids = sorted({g.song_id for g in manifest.songs})
    takes = {(i, j): manifest.load_take(i, j) for i in singer_ids for j in song_ids}
    mels = {key: mel_spectrogram(w, dsp_cfg) for key, w in takes.items()}
    norm = MelNormalizer.fit(list(mels.values()))

    base_conditions = {
        (a, j): build_conditions(
            takes[(a, j)], a, dsp_cfg, n_singers=singers, content_dim=content_dim
        )
        for a in singer_ids
        for j in song_ids
    }
    items = []
    for j in song_ids:
        for a in singer_ids:
            src_cond = base_conditions[(a, j)]
            for b in singer_ids:
                target = norm.normalize(mels[(b, j)].values)
                if target.shape[0] != src_cond.frames:
                    raise ValueError(
                        f"parallel corpus misaligned: song {j} frames differ "
                        f"between singers {a} and {b}"
                    )
                cond = ConditionSet(
                    content=src_cond.content, melody=src_cond.melody, speaker_id=b
                )
                items.append(TrainingItem(mel_norm=target, cond=cond))
    return items, norm


def _batch(items, rng: np.random.Generator, batch_size: int, crop: int):
    picks = [items[int(i)] for i in rng.integers(0, len(items), size=batch_size)]
    length = min(crop, min(p.frames for p in picks))
    mels, contents, melodies, speakers = [], [], [], []
    for p in picks:
        start = int(rng.integers(0, p.frames - length + 1))
        mels.append(p.mel_norm[start : start + length])
        contents.append(p.cond.content[start : start + length])
        melodies.append(p.cond.melody[start : start + length])
        speakers.append(p.cond.speaker_id)
    return (
        torch.as_tensor(np.stack(mels)),
        torch.as_tensor(np.stack(contents)),
        torch.as_tensor(np.stack(melodies)),
        torch.as_tensor(np.asarray(speakers, dtype=np.int64)),
    )


def _condition_batch(net: DenoiserNet, content, melody, speakers) -> torch.Tensor:
    spk = net.speaker_table(speakers)  # (B, spk_dim), trained jointly
    frames = content.shape[1]
    cond = torch.cat([content, melody, spk[:, None, :].expand(-1, frames, -1)], dim=2)
    return cond.transpose(1, 2)


def train(
    items: Sequence[TrainingItem],
    model_cfg: ModelConfig,
    schedule_params: tuple[int, float, float],
    train_cfg: TrainConfig,
    mel_norm: MelNormalizer,
    seed: int,
    checkpoint_dir: str | Path | None = None,
    on_stats: Callable[[TrainStats], None] | None = None,
) -> CheckpointBundle:
    """Optimize the denoiser; returns the final checkpoint bundle.

    Fully reproducible under a fixed seed when ``train_cfg.num_threads``
    is 1. A non-finite loss aborts immediately with a diagnostic.
    """
    if not items:
        raise ValueError("empty training dataset")
    if train_cfg.num_threads is not None:
        torch.set_num_threads(train_cfg.num_threads)
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    schedule = make_schedule(*schedule_params)
    net = DenoiserNet(model_cfg)
    net.train()
    opt = torch.optim.Adam(net.parameters(), lr=train_cfg.learning_rate, betas=train_cfg.adam_betas)
    noise_gen = torch.Generator().manual_seed(seed + 1)

    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    last_loss = None
    for step in range(1, train_cfg.total_steps + 1):
        y0, content, melody, speakers = _batch(
            items, rng, train_cfg.batch_size, train_cfg.crop_frames
        )
        t = torch.as_tensor(
            rng.integers(1, schedule.num_steps + 1, size=y0.shape[0]), dtype=torch.long
        )
        eps = torch.randn(y0.shape, generator=noise_gen)
        y_t = forward_noise(y0, t.numpy(), eps, schedule)

        cond_tensor = _condition_batch(net, content, melody, speakers)
        eps_hat, _ = net(y_t, t, cond_tensor)
        loss = torch.mean((eps_hat - eps) ** 2)

        loss_val = float(loss.detach())
        if not np.isfinite(loss_val):
            raise TrainingDiverged(
                f"non-finite loss at step {step} (last finite loss: {last_loss})"
            )
        last_loss = loss_val

        opt.zero_grad()
        loss.backward()
        grad_norm = float(
            torch.sqrt(sum(p.grad.pow(2).sum() for p in net.parameters() if p.grad is not None))
        )
        opt.step()

        if on_stats is not None and (step % train_cfg.log_every == 0 or step == 1):
            on_stats(TrainStats(step=step, loss=loss_val, grad_norm=grad_norm))
        if ckpt_dir is not None and step % train_cfg.checkpoint_every == 0:
            save_checkpoint(ckpt_dir / f"step_{step:06d}.ckpt", net, schedule_params, mel_norm, step)

    net.eval()
    if ckpt_dir is not None:
        save_checkpoint(ckpt_dir / "final.ckpt", net, schedule_params, mel_norm, train_cfg.total_steps)
    return CheckpointBundle(
        net=net,
        model_cfg=model_cfg,
        schedule=schedule,
        schedule_params=schedule_params,
        mel_norm=mel_norm,
        train_step=train_cfg.total_steps,
    )
