"""Versioned binary checkpoint files.

Layout (all integers little-endian):
  bytes 0..3   magic ``SVCK``
  bytes 4..7   format version (u32)
  bytes 8..11  JSON header length (u32)
  ...          UTF-8 JSON header
  ...          raw float32 parameter payload, concatenated in header order

The header carries everything needed to rebuild the runtime: model
hyperparameters, schedule parameters, the corpus mel normalizer, and the
ordered parameter manifest (name + shape).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .conditions import MelNormalizer
from .config import ModelConfig
from .denoiser import DenoiserNet
from .schedule import NoiseSchedule, make_schedule

MAGIC = b"SVCK"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class CheckpointBundle:
    net: DenoiserNet
    model_cfg: ModelConfig
    schedule: NoiseSchedule
    schedule_params: tuple[int, float, float]  # (T, beta_start, beta_end)
    mel_norm: MelNormalizer
    train_step: int


def save_checkpoint(
    path,
    net: DenoiserNet,
    schedule_params: tuple[int, float, float],
    mel_norm: MelNormalizer,
    train_step: int,
) -> None:
    params = [(name, tensor) for name, tensor in net.state_dict().items()]
    header = {
        "model": asdict(net.cfg),
        "schedule": {
            "num_steps": schedule_params[0],
            "beta_start": schedule_params[1],
            "beta_end": schedule_params[2],
        },
        "mel_norm": {"lo": mel_norm.lo, "hi": mel_norm.hi},
        "train_step": train_step,
        "params": [[name, list(t.shape)] for name, t in params],
    }
    blob = json.dumps(header).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, tensor in params:
            fh.write(tensor.detach().numpy().astype("<f4").tobytes())


def load_checkpoint(path) -> CheckpointBundle:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        payload = fh.read()

    model_kwargs = dict(header["model"])
    model_kwargs["dilation_cycle"] = tuple(model_kwargs["dilation_cycle"])
    model_cfg = ModelConfig(**model_kwargs)
    net = DenoiserNet(model_cfg)

    state = {}
    offset = 0
    for name, shape in header["params"]:
        n = int(np.prod(shape)) if shape else 1
        chunk = np.frombuffer(payload, dtype="<f4", count=n, offset=offset)
        offset += 4 * n
        state[name] = torch.as_tensor(chunk.copy()).reshape(shape)
    if offset != len(payload):
        raise CheckpointError(
            f"payload size mismatch: consumed {offset} of {len(payload)} bytes"
        )
    net.load_state_dict(state)
    net.eval()

    sched = header["schedule"]
    params = (int(sched["num_steps"]), float(sched["beta_start"]), float(sched["beta_end"]))
    return CheckpointBundle(
        net=net,
        model_cfg=model_cfg,
        schedule=make_schedule(*params),
        schedule_params=params,
        mel_norm=MelNormalizer(**header["mel_norm"]),
        train_step=int(header["train_step"]),
    )
