"""Conditional noise-prediction network over log-mel frames.

A stack of residual layers with bidirectional (non-causal) dilated 1-D
convolutions along the frame axis, gated activations, and per-layer
injection of the step embedding and the condition streams. The final
output projection is zero-initialized so the network predicts zero noise
at the start of training.

Internal activations can be tapped for the trajectory projection:
  - ``step``: the 128-dim sinusoidal step encoding (content-independent),
  - ``step_noise``: layer input after the step embedding is added,
  - ``step_noise_cond``: the same point after condition injection,
captured at the first, middle, and last residual layers and mean-pooled
over frames.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .conditions import ConditionSet
from .config import ModelConfig

TAP_KINDS = ("step", "step_noise", "step_noise_cond")
TAP_LAYERS = ("first", "middle", "last")


def step_encoding(t, dim: int = 128) -> np.ndarray:
    """Sinusoidal encoding of an integer diffusion step (numpy reference)."""
    t = np.asarray(t, dtype=np.float64)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half - 1, 1))
    angles = t[..., None] * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1).astype(np.float32)


def _step_encoding_torch(t: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64) / max(half - 1, 1)
    ).to(t.device)
    angles = t.double()[:, None] * freqs[None, :]
    return torch.cat([torch.sin(angles), torch.cos(angles)], dim=1)


class ResidualLayer(nn.Module):
    def __init__(self, cfg: ModelConfig, dilation: int):
        super().__init__()
        c = cfg.channels
        pad = (cfg.kernel_size - 1) // 2 * dilation
        self.step_proj = nn.Linear(c, c)
        self.cond_proj = nn.Conv1d(cfg.condition_dim, c, kernel_size=1)
        self.dilated_conv = nn.Conv1d(
            c, 2 * c, kernel_size=cfg.kernel_size, dilation=dilation, padding=pad
        )
        self.out_proj = nn.Conv1d(c, 2 * c, kernel_size=1)

    def forward(self, x, step_emb, cond):
        # x: (B, C, L); step_emb: (B, C); cond: (B, Dcond, L)
        with_step = x + self.step_proj(step_emb)[:, :, None]
        with_cond = with_step + self.cond_proj(cond)
        gate = self.dilated_conv(with_cond)
        c = x.shape[1]
        z = torch.tanh(gate[:, :c]) * torch.sigmoid(gate[:, c:])
        out = self.out_proj(z)
        residual, skip = out[:, :c], out[:, c:]
        return (x + residual) / math.sqrt(2.0), skip, with_step, with_cond


class DenoiserNet(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        c = cfg.channels
        self.input_proj = nn.Conv1d(cfg.n_mels, c, kernel_size=1)
        self.step_fc1 = nn.Linear(cfg.step_embed_dim, c)
        self.step_fc2 = nn.Linear(c, c)
        self.speaker_table = nn.Embedding(cfg.n_speakers, cfg.speaker_embed_dim)
        dilations = [cfg.dilation_cycle[i % len(cfg.dilation_cycle)] for i in range(cfg.n_layers)]
        self.layers = nn.ModuleList(ResidualLayer(cfg, d) for d in dilations)
        self.skip_proj = nn.Conv1d(c, c, kernel_size=1)
        self.output_proj = nn.Conv1d(c, cfg.n_mels, kernel_size=1)
        nn.init.zeros_(self.output_proj.weight)
        nn.init.zeros_(self.output_proj.bias)
        # step-gated input shortcut: at every noise level the best linear
        # noise estimate is a scalar multiple of the input, and the gate
        # learns that scalar from the step embedding; zero-init keeps the
        # whole network's output exactly zero at construction
        self.shortcut_gate = nn.Linear(c, 1)
        nn.init.zeros_(self.shortcut_gate.weight)
        nn.init.zeros_(self.shortcut_gate.bias)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def _tap_positions(self) -> set[int]:
        return {layer - 1 for layer in self.cfg.tap_layers}

    def condition_tensor(self, cond: ConditionSet, batch: int, frames: int) -> torch.Tensor:
        content = torch.as_tensor(cond.content, dtype=torch.float32)
        melody = torch.as_tensor(cond.melody, dtype=torch.float32)
        spk = self.speaker_table(torch.tensor([cond.speaker_id]))[0]
        stacked = torch.cat(
            [content, melody, spk[None, :].expand(content.shape[0], -1)], dim=1
        )  # (L, Dcond)
        return stacked.T[None].expand(batch, -1, -1)

    def forward(self, noisy, step, cond_tensor, capture_taps: bool = False):
        """noisy: (B, L, n_mels); step: (B,) long; cond_tensor: (B, Dcond, L).

        Returns (eps_hat (B, L, n_mels), taps or None).
        """
        if cond_tensor.shape[2] != noisy.shape[1]:
            raise ValueError(
                f"condition frames {cond_tensor.shape[2]} != input frames {noisy.shape[1]}"
            )
        enc = _step_encoding_torch(step, self.cfg.step_embed_dim).to(noisy.dtype)
        s = F.silu(self.step_fc1(enc))
        s = F.silu(self.step_fc2(s))

        x = F.relu(self.input_proj(noisy.transpose(1, 2)))
        taps = {("step", None): enc.detach()} if capture_taps else None
        tap_at = self._tap_positions() if capture_taps else set()
        pooled = {}
        skip_sum = torch.zeros_like(x)
        for i, layer in enumerate(self.layers):
            x, skip, with_step, with_cond = layer(x, s, cond_tensor)
            skip_sum = skip_sum + skip
            if i in tap_at:
                pooled[i] = (with_step.mean(dim=2).detach(), with_cond.mean(dim=2).detach())
        if capture_taps:
            # tiny layer counts can alias tap positions; every name stays present
            for name, layer_no in zip(TAP_LAYERS, self.cfg.tap_layers):
                with_step_vec, with_cond_vec = pooled[layer_no - 1]
                taps[("step_noise", name)] = with_step_vec
                taps[("step_noise_cond", name)] = with_cond_vec
        h = F.relu(skip_sum / math.sqrt(len(self.layers)))
        h = F.relu(self.skip_proj(h))
        gate = self.shortcut_gate(s)[:, :, None]  # (B, 1, 1)
        eps_hat = (self.output_proj(h) + gate * noisy.transpose(1, 2)).transpose(1, 2)
        return eps_hat, taps

    @torch.no_grad()
    def predict(self, noisy: np.ndarray, t: int, cond: ConditionSet, capture_taps: bool = False):
        """Single-item numpy adapter used by the sampler.

        Returns (eps_hat (frames, n_mels) float32, taps dict mapping
        (kind, layer) to 1-D float32 vectors, or None).
        """
        noisy_t = torch.as_tensor(np.asarray(noisy, dtype=np.float32))[None]
        step_t = torch.tensor([int(t)], dtype=torch.long)
        cond_t = self.condition_tensor(cond, batch=1, frames=noisy_t.shape[1])
        eps_hat, taps = self.forward(noisy_t, step_t, cond_t, capture_taps=capture_taps)
        eps = eps_hat[0].numpy().astype(np.float32)
        if taps is None:
            return eps, None
        flat = {key: vec[0].float().numpy().astype(np.float32) for key, vec in taps.items()}
        return eps, flat
