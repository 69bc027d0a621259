import struct

import numpy as np
import pytest
import torch

from svctrace.checkpoint import (
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
)
from svctrace.conditions import MelNormalizer
from svctrace.config import ModelConfig
from svctrace.denoiser import DenoiserNet


@pytest.fixture
def net():
    torch.manual_seed(7)
    return DenoiserNet(ModelConfig(n_layers=3, channels=24, n_speakers=5))


NORM = MelNormalizer(lo=-20.5, hi=6.25)
SCHED = (100, 1e-3, 0.2)


class TestRoundTrip:
    def test_parameters_bit_exact(self, net, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, net, SCHED, NORM, train_step=123)
        bundle = load_checkpoint(path)
        original = net.state_dict()
        restored = bundle.net.state_dict()
        assert set(original) == set(restored)
        for name in original:
            assert np.array_equal(
                original[name].numpy().astype(np.float32), restored[name].numpy()
            ), name

    def test_metadata_round_trip(self, net, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, net, SCHED, NORM, train_step=123)
        bundle = load_checkpoint(path)
        assert bundle.model_cfg == net.cfg
        assert bundle.schedule_params == SCHED
        assert bundle.mel_norm == NORM
        assert bundle.train_step == 123
        assert bundle.schedule.num_steps == 100

    def test_restored_net_predicts_identically(self, net, tmp_path):
        from svctrace.conditions import ConditionSet

        path = tmp_path / "model.ckpt"
        save_checkpoint(path, net, SCHED, NORM, train_step=1)
        bundle = load_checkpoint(path)
        rng = np.random.default_rng(0)
        y = rng.standard_normal((31, 80)).astype(np.float32)
        cond = ConditionSet(
            content=rng.standard_normal((31, 20)).astype(np.float32),
            melody=rng.standard_normal((31, 2)).astype(np.float32),
            speaker_id=2,
        )
        a, _ = net.predict(y, 5, cond)
        b, _ = bundle.net.predict(y, 5, cond)
        assert np.array_equal(a, b)


class TestFormatErrors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"XXXX" + b"\x00" * 64)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_bad_version(self, net, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, net, SCHED, NORM, train_step=1)
        blob = bytearray(path.read_bytes())
        blob[4:8] = struct.pack("<I", 999)
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_truncated_payload(self, net, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, net, SCHED, NORM, train_step=1)
        blob = path.read_bytes()
        path.write_bytes(blob[:-100])
        with pytest.raises(Exception):
            load_checkpoint(path)
