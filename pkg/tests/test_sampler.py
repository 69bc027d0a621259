import numpy as np
import pytest
import torch

from svctrace.conditions import ConditionSet
from svctrace.config import ModelConfig, ScheduleConfig
from svctrace.denoiser import DenoiserNet
from svctrace.sampler import SamplerError, ddim_sample, step_sequence
from svctrace.schedule import make_schedule


def make_cond(frames, seed=0):
    rng = np.random.default_rng(seed)
    return ConditionSet(
        content=rng.standard_normal((frames, 20)).astype(np.float32),
        melody=rng.standard_normal((frames, 2)).astype(np.float32),
        speaker_id=0,
    )


class PerfectDenoiser:
    """Closed-form noise oracle for a known clean state: recovers it exactly."""

    def __init__(self, y0, schedule):
        self.y0 = np.asarray(y0, dtype=np.float64)
        self.schedule = schedule

    def predict(self, noisy, t, cond, capture_taps=False):
        abar = self.schedule.alpha_bar[t]
        if abar >= 1.0:
            return np.zeros_like(noisy, dtype=np.float32), None
        eps = (noisy.astype(np.float64) - np.sqrt(abar) * self.y0) / np.sqrt(1.0 - abar)
        return eps.astype(np.float32), None


class ExplodingDenoiser:
    def predict(self, noisy, t, cond, capture_taps=False):
        return np.full_like(noisy, np.inf, dtype=np.float32), None


class TestStepSequence:
    def test_full_schedule(self):
        assert step_sequence(100, 100) == list(range(99, -1, -1))

    def test_single_step(self):
        assert step_sequence(100, 1) == [99]

    def test_subsequence_strictly_decreasing_ends_at_zero(self):
        for s in (2, 7, 10, 50, 99):
            seq = step_sequence(100, s)
            assert len(seq) == s
            assert seq[0] == 99 and seq[-1] == 0
            assert all(a > b for a, b in zip(seq, seq[1:]))

    def test_rejects_bad_counts(self):
        with pytest.raises(SamplerError):
            step_sequence(100, 0)
        with pytest.raises(SamplerError):
            step_sequence(100, 101)


class TestPerfectDenoiserRecovery:
    def test_recovery_across_step_counts(self):
        schedule = make_schedule(*ScheduleConfig(100).resolved())
        rng = np.random.default_rng(0)
        y0 = rng.uniform(-1.0, 1.0, size=(57, 80))
        cond = make_cond(57)
        for num_steps in (1, 10, 50, 100):
            out = ddim_sample(
                PerfectDenoiser(y0, schedule),
                cond,
                schedule,
                num_steps,
                seed=3,
                n_mels=80,
                capture_taps=False,
            )
            assert np.max(np.abs(out - y0)) <= 1e-4, f"num_steps={num_steps}"


@pytest.fixture(scope="module")
def net():
    torch.manual_seed(1)
    torch.set_num_threads(1)
    return DenoiserNet(ModelConfig(n_layers=2, channels=16, n_speakers=2))


@pytest.fixture(scope="module")
def schedule():
    return make_schedule(*ScheduleConfig(50).resolved())


class TestSamplerContract:
    def test_callback_sees_every_step_once(self, net, schedule):
        seen = []
        cond = make_cond(23)
        ddim_sample(
            net,
            cond,
            schedule,
            num_steps=50,
            seed=5,
            n_mels=80,
            on_step=lambda t, y, x0, taps: seen.append(t),
        )
        assert seen == list(range(49, -1, -1))

    def test_single_jump_equals_x0_prediction(self, net, schedule):
        captured = {}

        def grab(t, y, x0, taps):
            captured["t"] = t
            captured["x0"] = x0

        cond = make_cond(23)
        out = ddim_sample(
            net, cond, schedule, num_steps=1, seed=5, n_mels=80, on_step=grab
        )
        assert captured["t"] == 49
        assert np.allclose(out, captured["x0"], atol=1e-5)

    def test_bit_identical_across_runs(self, net, schedule):
        cond = make_cond(23)
        runs = []
        for _ in range(2):
            states = []
            out = ddim_sample(
                net,
                cond,
                schedule,
                num_steps=20,
                seed=9,
                n_mels=80,
                on_step=lambda t, y, x0, taps: states.append((y.tobytes(), x0.tobytes())),
            )
            runs.append((out.tobytes(), states))
        assert runs[0][0] == runs[1][0]
        assert runs[0][1] == runs[1][1]

    def test_different_seed_changes_trace(self, net, schedule):
        cond = make_cond(23)
        a = ddim_sample(net, cond, schedule, num_steps=10, seed=1, n_mels=80)
        b = ddim_sample(net, cond, schedule, num_steps=10, seed=2, n_mels=80)
        assert not np.array_equal(a, b)

    def test_non_finite_aborts_with_step_index(self, schedule):
        cond = make_cond(10)
        with pytest.raises(SamplerError, match="t=49"):
            ddim_sample(
                ExplodingDenoiser(), cond, schedule, num_steps=50, seed=0, n_mels=80
            )
