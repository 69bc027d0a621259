"""Deterministic reverse-diffusion sampler with full state capture.

Implements the eta = 0 implicit update over a decreasing step subsequence:
predict the clean-state estimate from the current noise prediction, then
re-noise it to the next (smaller) step level. Every visited step is handed
to the caller's callback, so nothing about the reverse process is lost.
"""

from __future__ import annotations

from typing import Callable, Protocol

import numpy as np

from .conditions import ConditionSet
from .schedule import NoiseSchedule


class SamplerError(RuntimeError):
    pass


class NoisePredictor(Protocol):
    def predict(
        self, noisy: np.ndarray, t: int, cond: ConditionSet, capture_taps: bool = False
    ) -> tuple[np.ndarray, dict | None]: ...


StepCallback = Callable[[int, np.ndarray, np.ndarray, dict | None], None]


def step_sequence(num_train_steps: int, num_steps: int) -> list[int]:
    """Evenly spaced visited steps from T-1 down to 0 (inclusive)."""
    if not 1 <= num_steps <= num_train_steps:
        raise SamplerError(
            f"num_steps must be in [1, {num_train_steps}], got {num_steps}"
        )
    raw = np.linspace(num_train_steps - 1, 0, num_steps)
    steps = [int(round(v)) for v in raw]
    if len(set(steps)) != len(steps):  # spacing >= 1 makes this unreachable
        raise SamplerError("step subsequence collapsed; reduce num_steps")
    return steps


def ddim_sample(
    net: NoisePredictor,
    cond: ConditionSet,
    schedule: NoiseSchedule,
    num_steps: int,
    seed: int,
    n_mels: int,
    on_step: StepCallback | None = None,
    capture_taps: bool = True,
) -> np.ndarray:
    """Run the reverse process and return the final clean-state estimate.

    State arithmetic runs in float64; the network sees float32 copies.
    The callback receives (t, y_t, x0_hat, taps) as float32 arrays at every
    visited step. Fully determined by (seed, net parameters, cond).
    """
    steps = step_sequence(schedule.num_steps, num_steps)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((cond.frames, n_mels))

    abar = schedule.alpha_bar
    x0 = y
    for i, t in enumerate(steps):
        eps_hat, taps = net.predict(y.astype(np.float32), t, cond, capture_taps=capture_taps)
        eps = eps_hat.astype(np.float64)
        a_t = abar[t]
        noise_w = np.sqrt(1.0 - a_t)
        # at abar = 1 the state is already the clean estimate; the general
        # formula would multiply a vanishing weight into an unconstrained eps
        x0 = (y - noise_w * eps) / np.sqrt(a_t) if noise_w > 0.0 else y.copy()
        if not np.all(np.isfinite(x0)):
            raise SamplerError(f"non-finite state at step t={t} (index {i})")
        if on_step is not None:
            on_step(t, y.astype(np.float32), x0.astype(np.float32), taps)
        t_next = steps[i + 1] if i + 1 < len(steps) else 0
        a_next = abar[t_next]
        next_noise_w = np.sqrt(1.0 - a_next)
        y = np.sqrt(a_next) * x0
        if next_noise_w > 0.0:
            y = y + next_noise_w * eps
    return x0.astype(np.float32)
