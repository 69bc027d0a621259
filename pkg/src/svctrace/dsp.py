"""Waveform I/O and spectral/pitch feature extraction.

Everything in this module is a pure function over immutable inputs and is
deterministic: identical input bytes give bit-identical outputs. All other
modules consume audio exclusively through these types.

Conventions:
  - frames are centered on ``k * hop_length`` via reflect padding of
    ``win_length // 2`` samples on each side, so a signal of length L yields
    ``1 + L // hop_length`` frames,
  - mel values are natural-log power with a floor of ``log_floor``,
  - F0 contours share the mel frame grid, 0.0 marks unvoiced frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.io.wavfile
import scipy.signal

from .config import DspConfig


class DspError(ValueError):
    """Raised on malformed audio input or contract violations."""


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Waveform:
    """Mono float32 samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 1 or samples.size == 0:
            raise DspError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise DspError("waveform contains non-finite samples")
        if np.max(np.abs(samples)) > 1.0 + 1e-6:
            raise DspError("waveform samples exceed [-1, 1]")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class MelSpectrogram:
    """frames x n_mels log-power mel matrix."""

    values: np.ndarray  # (frames, n_mels) float32
    hop_length: int
    win_length: int
    sample_rate: int
    log_floor: float = 1e-10

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim != 2:
            raise DspError("mel values must be 2-D (frames, n_mels)")
        if not np.all(np.isfinite(values)):
            raise DspError("mel values must be finite")
        floor = float(np.log(self.log_floor))
        if np.min(values) < floor - 1e-4:
            raise DspError("mel values fall below the log floor")
        object.__setattr__(self, "values", values)

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_mels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PitchContour:
    """Per-frame fundamental frequency in Hz; 0.0 marks unvoiced frames."""

    f0_hz: np.ndarray  # (frames,) float64

    def __post_init__(self):
        f0 = np.ascontiguousarray(self.f0_hz, dtype=np.float64)
        if f0.ndim != 1:
            raise DspError("pitch contour must be 1-D")
        if not np.all(np.isfinite(f0)) or np.any(f0 < 0):
            raise DspError("pitch contour must be finite and non-negative")
        object.__setattr__(self, "f0_hz", f0)

    def __len__(self) -> int:
        return int(self.f0_hz.size)

    @property
    def voiced_mask(self) -> np.ndarray:
        return self.f0_hz > 0.0


@dataclass(frozen=True)
class MelDiffMap:
    """Element-wise absolute mel difference, with the display color scale
    riding along (warm = large difference, cool = small)."""

    values: np.ndarray
    warm_means_large: bool = True
    color_scale: tuple[str, str] = ("cool", "warm")

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if np.any(values < 0):
            raise DspError("difference map must be non-negative")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class CepstralSequence:
    """frames x (order+1) mel-cepstral coefficients (orthonormal DCT-II of the
    log-mel rows). c0 is stored but excluded from distance computations."""

    coefficients: np.ndarray  # (frames, order + 1) float64
    order: int = 13

    def __post_init__(self):
        coeff = np.ascontiguousarray(self.coefficients, dtype=np.float64)
        if coeff.ndim != 2 or coeff.shape[1] != self.order + 1:
            raise DspError("cepstral matrix must be (frames, order + 1)")
        if not np.all(np.isfinite(coeff)):
            raise DspError("cepstral coefficients must be finite")
        object.__setattr__(self, "coefficients", coeff)

    @property
    def frames(self) -> int:
        return self.coefficients.shape[0]

    def without_c0(self) -> np.ndarray:
        return self.coefficients[:, 1:]


# ---------------------------------------------------------------------------
# WAV I/O (RIFF PCM-16 and IEEE float-32, little-endian)
# ---------------------------------------------------------------------------


def load_wav(path, expected_sample_rate: int = 16000) -> Waveform:
    """Read a PCM-16 or float-32 WAV file, averaging stereo to mono.

    No resampling is performed: a file whose rate differs from
    ``expected_sample_rate`` is rejected.
    """
    try:
        rate, data = scipy.io.wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:  # scipy raises bare ValueError on bad headers
        raise DspError(f"malformed WAV file {path}: {exc}") from exc
    if rate != expected_sample_rate:
        raise DspError(
            f"sample rate mismatch: file is {rate} Hz, configured rate is "
            f"{expected_sample_rate} Hz (resampling is not supported)"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float32)
    else:
        raise DspError(f"unsupported WAV sample format {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    samples = np.clip(samples, -1.0, 1.0)
    return Waveform(samples=samples, sample_rate=expected_sample_rate)


def save_wav(path, waveform: Waveform, pcm16: bool = True) -> None:
    if pcm16:
        clipped = np.clip(waveform.samples, -1.0, 1.0)
        data = (clipped * 32767.0).round().astype(np.int16)
    else:
        data = waveform.samples.astype(np.float32)
    scipy.io.wavfile.write(path, waveform.sample_rate, data)


# ---------------------------------------------------------------------------
# STFT and mel filterbank
# ---------------------------------------------------------------------------


def frame_count(n_samples: int, cfg: DspConfig) -> int:
    """Frames produced for a signal of ``n_samples`` after reflect padding by
    win_length // 2 per side: 1 + floor((padded - win) / hop) = 1 + n // hop."""
    return 1 + n_samples // cfg.hop_length


def hz_to_mel(freq_hz):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    freq_hz = np.asarray(freq_hz, dtype=np.float64)
    mels = freq_hz / (200.0 / 3.0)
    log_region = freq_hz >= 1000.0
    log_step = np.log(6.4) / 27.0
    mels = np.where(log_region, 15.0 + np.log(np.maximum(freq_hz, 1e-12) / 1000.0) / log_step, mels)
    return mels


def mel_to_hz(mels):
    mels = np.asarray(mels, dtype=np.float64)
    freq = mels * (200.0 / 3.0)
    log_region = mels >= 15.0
    log_step = np.log(6.4) / 27.0
    freq = np.where(log_region, 1000.0 * np.exp(log_step * (mels - 15.0)), freq)
    return freq


def mel_filterbank(cfg: DspConfig) -> np.ndarray:
    """Slaney-style triangular filters spanning fmin..fmax, area-normalized.

    Returns (n_mels, 1 + n_fft // 2).
    """
    n_bins = 1 + cfg.n_fft // 2
    fft_freqs = np.linspace(0.0, cfg.nyquist, n_bins)
    mel_edges = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.effective_fmax), cfg.n_mels + 2)
    hz_edges = mel_to_hz(mel_edges)

    weights = np.zeros((cfg.n_mels, n_bins), dtype=np.float64)
    fdiff = np.diff(hz_edges)
    ramps = hz_edges[:, None] - fft_freqs[None, :]
    for m in range(cfg.n_mels):
        lower = -ramps[m] / fdiff[m]
        upper = ramps[m + 2] / fdiff[m + 1]
        weights[m] = np.maximum(0.0, np.minimum(lower, upper))
    # Slaney area normalization: each filter integrates to ~constant energy
    enorm = 2.0 / (hz_edges[2:] - hz_edges[:-2])
    weights *= enorm[:, None]
    return weights


def filterbank_center_frequencies(cfg: DspConfig) -> np.ndarray:
    mel_edges = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.effective_fmax), cfg.n_mels + 2)
    return mel_to_hz(mel_edges)[1:-1]


def stft(samples: np.ndarray, cfg: DspConfig) -> np.ndarray:
    """Centered STFT with a periodic Hann window and reflect padding.

    Returns complex (frames, 1 + n_fft // 2).
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < cfg.win_length:
        raise DspError(
            f"signal of {samples.size} samples is shorter than one window ({cfg.win_length})"
        )
    pad = cfg.win_length // 2
    padded = np.pad(samples, (pad, pad), mode="reflect")
    n_frames = 1 + (padded.size - cfg.win_length) // cfg.hop_length
    window = scipy.signal.windows.hann(cfg.win_length, sym=False)

    shape = (n_frames, cfg.win_length)
    strides = (cfg.hop_length * padded.strides[0], padded.strides[0])
    frames = np.lib.stride_tricks.as_strided(padded, shape=shape, strides=strides)
    return scipy.fft.rfft(frames * window, n=cfg.n_fft, axis=1)


def istft(spectrum: np.ndarray, cfg: DspConfig) -> np.ndarray:
    """Overlap-add inverse of :func:`stft`; returns (frames - 1) * hop samples."""
    window = scipy.signal.windows.hann(cfg.win_length, sym=False)
    frames = scipy.fft.irfft(spectrum, n=cfg.n_fft, axis=1)[:, : cfg.win_length]
    n_frames = frames.shape[0]
    pad = cfg.win_length // 2
    total = (n_frames - 1) * cfg.hop_length + cfg.win_length
    signal = np.zeros(total)
    norm = np.zeros(total)
    wsq = window**2
    for k in range(n_frames):
        start = k * cfg.hop_length
        signal[start : start + cfg.win_length] += frames[k] * window
        norm[start : start + cfg.win_length] += wsq
    signal = signal / np.maximum(norm, 1e-10)
    return signal[pad : total - pad]


def mel_spectrogram(waveform: Waveform, cfg: DspConfig) -> MelSpectrogram:
    """Log-power mel spectrogram: log(max(filterbank @ |STFT|^2, log_floor))."""
    spectrum = stft(waveform.samples, cfg)
    power = np.abs(spectrum) ** 2
    mel_power = power @ mel_filterbank(cfg).T
    values = np.log(np.maximum(mel_power, cfg.log_floor))
    return MelSpectrogram(
        values=values.astype(np.float32),
        hop_length=cfg.hop_length,
        win_length=cfg.win_length,
        sample_rate=cfg.sample_rate,
        log_floor=cfg.log_floor,
    )


# ---------------------------------------------------------------------------
# F0 extraction (YIN-style cumulative-mean-normalized difference function)
# ---------------------------------------------------------------------------


def extract_f0(waveform: Waveform, cfg: DspConfig) -> PitchContour:
    """Per-frame F0 on the mel frame grid.

    For each frame a difference function d(tau) over a win_length window is
    computed for lags up to sample_rate / f0_min, normalized to the
    cumulative-mean form, thresholded at ``yin_threshold`` and refined by
    parabolic interpolation. Frames with no dip below the threshold (or with
    negligible energy) are unvoiced.
    """
    x = waveform.samples.astype(np.float64)
    if waveform.sample_rate != cfg.sample_rate:
        raise DspError("waveform sample rate does not match config")
    win = cfg.win_length
    max_lag = int(np.ceil(cfg.sample_rate / cfg.f0_min))
    min_lag = max(2, int(np.floor(cfg.sample_rate / cfg.f0_max)))
    if x.size < win:
        raise DspError("signal shorter than one analysis window")

    n_frames = frame_count(x.size, cfg)
    seg_len = win + max_lag
    pad_left = win // 2
    pad_right = seg_len  # generous tail so the last frame always fits
    padded = np.pad(x, (pad_left, pad_right), mode="reflect")

    starts = np.arange(n_frames) * cfg.hop_length
    shape = (n_frames, seg_len)
    strides = (padded.strides[0] * cfg.hop_length, padded.strides[0])
    segs = np.lib.stride_tricks.as_strided(padded, shape=shape, strides=strides)

    # d(tau) = sum_{j<win} (s_j - s_{j+tau})^2
    #        = E(0) + E(tau) - 2 * corr(tau)
    sq = segs**2
    prefix = np.concatenate([np.zeros((n_frames, 1)), np.cumsum(sq, axis=1)], axis=1)
    lags = np.arange(max_lag + 1)
    energy = prefix[:, lags + win] - prefix[:, lags]  # E(tau), (frames, lags)

    n_fft = int(2 ** np.ceil(np.log2(seg_len + win)))
    spec_full = scipy.fft.rfft(segs, n=n_fft, axis=1)
    spec_head = scipy.fft.rfft(segs[:, :win], n=n_fft, axis=1)
    corr = scipy.fft.irfft(np.conj(spec_head) * spec_full, n=n_fft, axis=1)[:, : max_lag + 1]

    diff = energy[:, [0]] + energy - 2.0 * corr
    diff = np.maximum(diff, 0.0)

    # cumulative mean normalization: d'(0) = 1, d'(tau) = d(tau) * tau / cumsum(d)
    cumsum = np.cumsum(diff[:, 1:], axis=1)
    cmndf = np.ones_like(diff)
    with np.errstate(divide="ignore", invalid="ignore"):
        cmndf[:, 1:] = diff[:, 1:] * lags[1:] / np.where(cumsum > 0, cumsum, np.inf)

    f0 = np.zeros(n_frames)
    frame_energy = energy[:, 0]
    for k in range(n_frames):
        if frame_energy[k] < 1e-10:
            continue
        row = cmndf[k]
        below = np.nonzero(row[min_lag : max_lag + 1] < cfg.yin_threshold)[0]
        if below.size == 0:
            continue
        tau = min_lag + below[0]
        while tau + 1 <= max_lag and row[tau + 1] < row[tau]:
            tau += 1
        # parabolic refinement around the selected dip
        if 0 < tau < max_lag:
            a, b, c = row[tau - 1], row[tau], row[tau + 1]
            denom = a - 2.0 * b + c
            shift = 0.5 * (a - c) / denom if abs(denom) > 1e-12 else 0.0
            tau_refined = tau + float(np.clip(shift, -0.5, 0.5))
        else:
            tau_refined = float(tau)
        f0[k] = float(np.clip(cfg.sample_rate / tau_refined, cfg.f0_min, cfg.f0_max))
    return PitchContour(f0_hz=f0)


# ---------------------------------------------------------------------------
# Griffin-Lim mel inversion
# ---------------------------------------------------------------------------


def griffin_lim(mel: MelSpectrogram, cfg: DspConfig, iters: int | None = None) -> Waveform:
    """Invert a log-mel spectrogram to a waveform.

    Linear magnitudes come from the filterbank pseudo-inverse (clamped at 0),
    phase is recovered by iterative STFT projection starting from zero phase.
    Output is peak-normalized to 0.95; an all-floor input yields silence.
    """
    n_iter = cfg.griffin_lim_iters if iters is None else int(iters)
    if n_iter < 1:
        raise DspError("griffin_lim requires at least one iteration")
    # cap the log-power: early-step clean-state estimates can carry wildly
    # out-of-range values, and the output is peak-normalized regardless
    mel_power = np.exp(np.minimum(mel.values.astype(np.float64), 60.0))
    fb = mel_filterbank(cfg)
    linear_power = np.maximum(mel_power @ np.linalg.pinv(fb).T, 0.0)
    magnitude = np.sqrt(linear_power)

    angles = np.zeros_like(magnitude, dtype=np.complex128)
    angles[:] = 1.0
    signal = istft(magnitude * angles, cfg)
    for _ in range(n_iter):
        spectrum = stft(signal, cfg)
        phase = spectrum / np.maximum(np.abs(spectrum), 1e-10)
        signal = istft(magnitude * phase, cfg)

    # degenerate (all-floor) inputs stay near-silent instead of being
    # amplified to full scale
    peak = float(np.max(np.abs(signal)))
    if peak > 1e-3:
        signal = signal * (0.95 / peak)
    return Waveform(samples=signal.astype(np.float32), sample_rate=cfg.sample_rate)


# ---------------------------------------------------------------------------
# cepstra and mel differences
# ---------------------------------------------------------------------------


def mel_cepstrum(mel: MelSpectrogram, order: int = 13) -> CepstralSequence:
    """Orthonormal DCT-II of each log-mel row, first order+1 coefficients."""
    coeff = scipy.fft.dct(mel.values.astype(np.float64), type=2, norm="ortho", axis=1)
    return CepstralSequence(coefficients=coeff[:, : order + 1], order=order)


def mel_diff(a: MelSpectrogram, b: MelSpectrogram) -> MelDiffMap:
    if a.values.shape != b.values.shape:
        raise DspError(
            f"mel dimensions differ: {a.values.shape} vs {b.values.shape}"
        )
    return MelDiffMap(values=np.abs(a.values - b.values))
