"""Noise schedule and the forward noising process.

``alpha_bar[t]`` holds the cumulative signal-retention weight at step t,
with ``alpha_bar[0] = 1`` (the clean state) and a strictly decreasing tail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray  # (T,) per-step noise increments
    alpha_bar: np.ndarray  # (T + 1,) cumulative products, alpha_bar[0] = 1

    def __post_init__(self):
        object.__setattr__(self, "betas", np.ascontiguousarray(self.betas, dtype=np.float64))
        object.__setattr__(
            self, "alpha_bar", np.ascontiguousarray(self.alpha_bar, dtype=np.float64)
        )

    @property
    def num_steps(self) -> int:
        return int(self.betas.size)


def make_schedule(num_steps: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linear beta ramp over steps 1..T with cumulative products."""
    if num_steps < 1:
        raise ScheduleError(f"num_steps must be >= 1, got {num_steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ScheduleError(
            f"betas must satisfy 0 < start <= end < 1, got ({beta_start}, {beta_end})"
        )
    betas = np.linspace(beta_start, beta_end, num_steps, dtype=np.float64)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    return NoiseSchedule(betas=betas, alpha_bar=alpha_bar)


def forward_noise(y0, t, eps, schedule: NoiseSchedule):
    """Noisy state at step t: sqrt(abar_t) * y0 + sqrt(1 - abar_t) * eps.

    ``t`` may be a scalar (one step for the whole tensor) or a per-sample
    vector matching the leading axis of ``y0``. Works on numpy arrays and
    torch tensors alike.
    """
    if tuple(y0.shape) != tuple(eps.shape):
        raise ScheduleError(f"shape mismatch: y0 {tuple(y0.shape)} vs eps {tuple(eps.shape)}")
    t_arr = np.asarray(t)
    if np.any(t_arr < 0) or np.any(t_arr > schedule.num_steps):
        raise ScheduleError(f"step {t} out of range [0, {schedule.num_steps}]")
    abar = schedule.alpha_bar[t_arr]
    signal_w = np.sqrt(abar)
    noise_w = np.sqrt(1.0 - abar)
    if t_arr.ndim > 0:
        # per-sample weights broadcast over trailing axes
        expand = (slice(None),) + (None,) * (y0.ndim - 1)
        signal_w = signal_w[expand]
        noise_w = noise_w[expand]
    if type(y0).__module__.startswith("torch"):
        import torch

        signal_w = torch.as_tensor(np.asarray(signal_w), dtype=y0.dtype, device=y0.device)
        noise_w = torch.as_tensor(np.asarray(noise_w), dtype=y0.dtype, device=y0.device)
    return signal_w * y0 + noise_w * eps
