import numpy as np
import pytest
import torch

from svctrace.conditions import ConditionSet, MelNormalizer
from svctrace.config import ModelConfig, ScheduleConfig, TrainConfig
from svctrace.training import (
    TrainingDiverged,
    TrainingItem,
    TrainStats,
    prepare_parallel_items,
    prepare_training_items,
    train,
)

TOY_SCHEDULE = ScheduleConfig(100).resolved()


def synthetic_item(frames=120, seed=0, speaker=0):
    rng = np.random.default_rng(seed)
    return TrainingItem(
        mel_norm=rng.uniform(-1, 1, (frames, 80)).astype(np.float32),
        cond=ConditionSet(
            content=rng.standard_normal((frames, 20)).astype(np.float32),
            melody=rng.standard_normal((frames, 2)).astype(np.float32),
            speaker_id=speaker,
        ),
    )


NORM = MelNormalizer(lo=-21.0, hi=7.0)


class TestTrainStats:
    def test_rejects_negative_loss(self):
        with pytest.raises(ValueError):
            TrainStats(step=1, loss=-0.1, grad_norm=0.0)

    def test_rejects_nan_loss(self):
        with pytest.raises(ValueError):
            TrainStats(step=1, loss=float("nan"), grad_norm=0.0)


class TestPrepareItems:
    def test_self_reconstruction_items(self, corpus_manifest, dsp_cfg):
        takes = [(corpus_manifest.load_take(0, 0), 0), (corpus_manifest.load_take(1, 0), 1)]
        items, norm = prepare_training_items(takes, dsp_cfg)
        assert len(items) == 2
        for item in items:
            assert item.mel_norm.shape[0] == item.cond.frames
            assert item.mel_norm.min() >= -1.0 - 1e-6
            assert item.mel_norm.max() <= 1.0 + 1e-6
        assert norm.hi > norm.lo

    def test_parallel_items_cover_all_pairs(self, corpus_manifest, dsp_cfg):
        items, _ = prepare_parallel_items(corpus_manifest, dsp_cfg)
        # 4 singers x 4 songs x 4 target speakers
        assert len(items) == 64
        speakers = {it.cond.speaker_id for it in items}
        assert speakers == {0, 1, 2, 3}

    def test_empty_corpus_rejected(self, dsp_cfg):
        with pytest.raises(ValueError):
            prepare_training_items([], dsp_cfg)


class TestTrainLoop:
    def test_initial_loss_near_one(self):
        # zero-init output projection predicts 0, so the first losses are
        # E||eps||^2 / dim = 1 within sampling error
        stats = []
        train(
            [synthetic_item()],
            ModelConfig(n_layers=2, channels=16, n_speakers=2),
            TOY_SCHEDULE,
            TrainConfig(total_steps=3, batch_size=16, log_every=1, num_threads=1),
            NORM,
            seed=0,
            on_stats=stats.append,
        )
        assert abs(stats[0].loss - 1.0) <= 0.1

    def test_same_seed_identical_loss_trajectory(self):
        def run():
            stats = []
            train(
                [synthetic_item()],
                ModelConfig(n_layers=2, channels=16, n_speakers=2),
                TOY_SCHEDULE,
                TrainConfig(total_steps=100, batch_size=2, log_every=100, num_threads=1),
                NORM,
                seed=123,
                on_stats=stats.append,
            )
            return stats[-1].loss

        a, b = run(), run()
        assert abs(a - b) <= 1e-6

    def test_divergence_aborts_with_diagnostic(self):
        with pytest.raises(TrainingDiverged, match="step"):
            train(
                [synthetic_item()],
                ModelConfig(n_layers=2, channels=16, n_speakers=2),
                TOY_SCHEDULE,
                TrainConfig(
                    total_steps=200, batch_size=4, learning_rate=1e6, num_threads=1
                ),
                NORM,
                seed=0,
            )

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train(
                [],
                ModelConfig(),
                TOY_SCHEDULE,
                TrainConfig(total_steps=1),
                NORM,
                seed=0,
            )

    def test_stats_stream_and_checkpoints(self, tmp_path):
        stats = []
        train(
            [synthetic_item()],
            ModelConfig(n_layers=2, channels=16, n_speakers=2),
            TOY_SCHEDULE,
            TrainConfig(
                total_steps=40,
                batch_size=2,
                log_every=10,
                checkpoint_every=20,
                num_threads=1,
            ),
            NORM,
            seed=4,
            checkpoint_dir=tmp_path,
            on_stats=stats.append,
        )
        assert [s.step for s in stats] == [1, 10, 20, 30, 40]
        assert all(s.grad_norm >= 0 for s in stats)
        assert (tmp_path / "step_000020.ckpt").exists()
        assert (tmp_path / "step_000040.ckpt").exists()
        assert (tmp_path / "final.ckpt").exists()


class TestSingleSampleLearning:
    def test_loss_halves_in_500_steps(self, corpus_manifest, dsp_cfg):
        # threshold frozen from toy-config runs: smoothed loss falls from
        # ~1.0 to well under 0.1 within 500 steps
        takes = [(corpus_manifest.load_take(0, 0), 0)]
        items, norm = prepare_training_items(takes, dsp_cfg)
        losses = []
        train(
            items,
            ModelConfig(),
            TOY_SCHEDULE,
            TrainConfig(total_steps=500, batch_size=4, log_every=10, num_threads=2),
            norm,
            seed=11,
            on_stats=lambda s: losses.append(s.loss),
        )
        initial = np.mean(losses[:3])
        final = np.mean(losses[-3:])
        assert final < 0.5 * initial
