"""Synthetic singer/song corpus.

Singers are source-filter voices: a glottal pulse train at the song's note
frequencies (scaled by the singer's register multiplier, modulated by
vibrato) drives a cascade of three formant resonators plus a spectral
tilt. Formant placement is what separates singer timbres; the register
multiplier separates low and high voices.

Everything is deterministic given the corpus seed, so a rebuilt corpus is
bit-identical, manifest included.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.signal

from .config import CorpusConfig, DspConfig
from .dsp import Waveform, load_wav, save_wav


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class SingerSpec:
    singer_id: int
    base_f0_multiplier: float  # gender-analog register, in [0.5, 2.0]
    formant_freqs: tuple[float, float, float]
    formant_bandwidths: tuple[float, float, float]
    spectral_tilt_db_per_octave: float
    vibrato_rate_hz: float
    vibrato_depth_semitones: float
    breathiness: float = 0.01  # aspiration noise level relative to pulse height

    def __post_init__(self):
        if not 0.5 <= self.base_f0_multiplier <= 2.0:
            raise CorpusError(f"register multiplier {self.base_f0_multiplier} out of [0.5, 2]")
        f = self.formant_freqs
        if not (f[0] < f[1] < f[2]):
            raise CorpusError(f"formants must be strictly increasing, got {f}")


@dataclass(frozen=True)
class SongSpec:
    song_id: int
    notes: tuple[tuple[int, int], ...]  # (midi pitch, duration ms)

    def __post_init__(self):
        if not self.notes:
            raise CorpusError("song has no notes")
        for midi, dur in self.notes:
            if not 36 <= midi <= 84:
                raise CorpusError(f"midi pitch {midi} out of [36, 84]")
            if dur < 80:
                raise CorpusError(f"note duration {dur} ms below the 80 ms minimum")
        if self.total_duration_ms > 6000:
            raise CorpusError(f"song exceeds 6 s ({self.total_duration_ms} ms)")

    @property
    def total_duration_ms(self) -> int:
        return sum(d for _, d in self.notes)


def midi_to_hz(midi) -> np.ndarray:
    return 440.0 * 2.0 ** ((np.asarray(midi, dtype=np.float64) - 69.0) / 12.0)


def _resonator_coeffs(fc: float, bw: float, sr: int):
    r = np.exp(-np.pi * bw / sr)
    theta = 2.0 * np.pi * fc / sr
    a = [1.0, -2.0 * r * np.cos(theta), r * r]
    b = [(1.0 - r) * np.sqrt(1.0 - 2.0 * r * np.cos(2.0 * theta) + r * r)]
    return b, a


def synth_singer(
    singer: SingerSpec, song: SongSpec, seed: int, sample_rate: int = 16000
) -> Waveform:
    """Render a song in a singer's voice; bit-identical per (specs, seed)."""
    sr = sample_rate
    n_total = int(round(song.total_duration_ms / 1000.0 * sr))
    t = np.arange(n_total) / sr

    # per-sample target F0 with short glides at note boundaries
    log_f0 = np.zeros(n_total)
    envelope = np.ones(n_total)
    pos = 0
    for midi, dur_ms in song.notes:
        n = int(round(dur_ms / 1000.0 * sr))
        n = min(n, n_total - pos)
        log_f0[pos : pos + n] = np.log(midi_to_hz(midi) * singer.base_f0_multiplier)
        edge = min(int(0.03 * sr), n // 4)
        if edge > 0:  # gentle per-note swell, phonation never stops
            ramp = 0.6 + 0.4 * np.sin(np.linspace(0, np.pi / 2, edge))
            envelope[pos : pos + edge] *= ramp
            envelope[pos + n - edge : pos + n] *= ramp[::-1]
        pos += n
    glide = max(1, int(0.012 * sr))
    kernel = np.ones(glide) / glide
    log_f0 = np.convolve(np.pad(log_f0, (glide, glide), mode="edge"), kernel, mode="same")[
        glide:-glide
    ]

    rng = np.random.default_rng(seed)
    vibrato_phase = rng.uniform(0, 2 * np.pi)
    vibrato = singer.vibrato_depth_semitones * np.sin(
        2 * np.pi * singer.vibrato_rate_hz * t + vibrato_phase
    )
    f0 = np.exp(log_f0) * 2.0 ** (vibrato / 12.0)

    # glottal pulse train via phase accumulation
    phase = np.cumsum(f0 / sr)
    pulses = np.zeros(n_total)
    wraps = np.nonzero(np.diff(np.floor(phase)) > 0)[0] + 1
    pulses[wraps] = 1.0
    # breath noise rides through the same formant/tilt chain, keeping every
    # mel channel off the log floor with singer-shaped energy
    source = pulses + singer.breathiness * rng.standard_normal(n_total)

    signal = source
    for fc, bw in zip(singer.formant_freqs, singer.formant_bandwidths):
        b, a = _resonator_coeffs(fc, bw, sr)
        signal = scipy.signal.lfilter(b, a, signal)

    # spectral tilt applied in the frequency domain, hinged at 250 Hz
    spectrum = np.fft.rfft(signal)
    freqs = np.fft.rfftfreq(n_total, 1.0 / sr)
    octaves = np.log2(np.maximum(freqs, 250.0) / 250.0)
    spectrum *= 10.0 ** (singer.spectral_tilt_db_per_octave * octaves / 20.0)
    signal = np.fft.irfft(spectrum, n=n_total)

    signal *= envelope
    peak = np.max(np.abs(signal))
    if peak > 0:
        signal = signal * (0.85 / peak)
    return Waveform(samples=signal.astype(np.float32), sample_rate=sr)


# ---------------------------------------------------------------------------
# corpus construction
# ---------------------------------------------------------------------------


def make_singer_specs(n_singers: int, seed: int) -> list[SingerSpec]:
    """Deterministic singer catalog with alternating low/high registers."""
    rng = np.random.default_rng(seed)
    # formant templates and tilts are cycled, not drawn, so singer timbres
    # stay well separated however many singers are requested
    f1_grid = (350.0, 720.0, 480.0, 620.0)
    f2_grid = (1150.0, 1650.0, 2050.0, 1400.0)
    f3_grid = (2450.0, 3050.0, 2700.0, 3250.0)
    tilt_grid = (-4.5, -12.5, -8.5, -15.0)
    breath_grid = (0.004, 0.012, 0.016, 0.007)
    specs = []
    for i in range(n_singers):
        # both registers sit above ~220 Hz: mel-inverted renders lose pitch
        # trackability below that, and per-step F0 instrumentation needs it
        high_register = i % 2 == 1
        mult = rng.uniform(1.32, 1.5) if high_register else rng.uniform(0.95, 1.1)
        k = i % 4
        jitter = rng.uniform(-25.0, 25.0, size=3)
        f1 = f1_grid[k] + jitter[0]
        f2 = f2_grid[k] + jitter[1]
        f3 = f3_grid[k] + jitter[2]
        specs.append(
            SingerSpec(
                singer_id=i,
                base_f0_multiplier=round(float(mult), 4),
                formant_freqs=(round(float(f1), 1), round(float(f2), 1), round(float(f3), 1)),
                formant_bandwidths=(
                    round(float(rng.uniform(70.0, 110.0)), 1),
                    round(float(rng.uniform(90.0, 140.0)), 1),
                    round(float(rng.uniform(120.0, 180.0)), 1),
                ),
                spectral_tilt_db_per_octave=tilt_grid[k] + round(float(rng.uniform(-0.5, 0.5)), 2),
                vibrato_rate_hz=round(float(rng.uniform(4.5, 6.5)), 2),
                vibrato_depth_semitones=round(float(rng.uniform(0.15, 0.45)), 3),
                breathiness=breath_grid[k],
            )
        )
    return specs


def make_song_specs(n_songs: int, seed: int, max_duration_s: float = 6.0) -> list[SongSpec]:
    """Deterministic songs: random walks over a pentatonic scale."""
    rng = np.random.default_rng(seed)
    scale = np.array([0, 2, 4, 7, 9])  # pentatonic degrees
    durations = [200, 250, 300, 350, 450]
    songs = []
    base = 62
    pool = [base + int(d) for d in np.concatenate([scale, scale])]
    for j in range(n_songs):
        target_ms = min(rng.uniform(3200, 4500), max_duration_s * 1000 - 100)
        # every song draws the same note multiset in a shuffled order, so
        # melodies differ in contour and rhythm while the pitch histogram
        # (hence the timbre embedding) stays song-independent
        order = [pool[k] for k in rng.permutation(len(pool))]
        notes, total, k = [], 0, 0
        while total < target_ms:
            dur = int(rng.choice(durations))
            notes.append((order[k % len(order)], dur))
            total += dur
            k += 1
        songs.append(SongSpec(song_id=j, notes=tuple(notes)))
    return songs


@dataclass(frozen=True)
class CorpusManifest:
    root: Path
    seed: int
    sample_rate: int
    singers: list[SingerSpec]
    songs: list[SongSpec]
    takes: dict[tuple[int, int], str]  # (singer, song) -> relative wav path

    def take_path(self, singer_id: int, song_id: int) -> Path:
        key = (singer_id, song_id)
        if key not in self.takes:
            raise CorpusError(f"no take for singer {singer_id}, song {song_id}")
        return self.root / self.takes[key]

    def load_take(self, singer_id: int, song_id: int) -> Waveform:
        return load_wav(self.take_path(singer_id, song_id), self.sample_rate)

    def to_json(self) -> str:
        doc = {
            "version": 1,
            "seed": self.seed,
            "sample_rate": self.sample_rate,
            "singers": [asdict(s) for s in self.singers],
            "songs": [asdict(s) for s in self.songs],
            "takes": [
                {"singer": s, "song": g, "path": p} for (s, g), p in sorted(self.takes.items())
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def build_corpus(root, cfg: CorpusConfig, dsp_cfg: DspConfig) -> CorpusManifest:
    """Render every singer x song take and write the manifest."""
    if cfg.n_singers < 2 or cfg.n_songs < 2:
        raise CorpusError("corpus needs at least 2 singers and 2 songs")
    root = Path(root)
    (root / "wavs").mkdir(parents=True, exist_ok=True)
    singers = make_singer_specs(cfg.n_singers, cfg.seed)
    songs = make_song_specs(cfg.n_songs, cfg.seed + 1, cfg.max_duration_s)
    takes = {}
    for singer in singers:
        for song in songs:
            take_seed = cfg.seed * 10_000 + singer.singer_id * 100 + song.song_id
            wave = synth_singer(singer, song, take_seed, dsp_cfg.sample_rate)
            rel = f"wavs/singer{singer.singer_id}_song{song.song_id}.wav"
            save_wav(root / rel, wave)
            takes[(singer.singer_id, song.song_id)] = rel
    manifest = CorpusManifest(
        root=root,
        seed=cfg.seed,
        sample_rate=dsp_cfg.sample_rate,
        singers=singers,
        songs=songs,
        takes=takes,
    )
    (root / "manifest.json").write_text(manifest.to_json())
    return manifest


def load_corpus(root) -> CorpusManifest:
    root = Path(root)
    doc = json.loads((root / "manifest.json").read_text())
    singers = [
        SingerSpec(
            singer_id=s["singer_id"],
            base_f0_multiplier=s["base_f0_multiplier"],
            formant_freqs=tuple(s["formant_freqs"]),
            formant_bandwidths=tuple(s["formant_bandwidths"]),
            spectral_tilt_db_per_octave=s["spectral_tilt_db_per_octave"],
            vibrato_rate_hz=s["vibrato_rate_hz"],
            vibrato_depth_semitones=s["vibrato_depth_semitones"],
            breathiness=s.get("breathiness", 0.01),
        )
        for s in doc["singers"]
    ]
    songs = [
        SongSpec(song_id=g["song_id"], notes=tuple(tuple(n) for n in g["notes"]))
        for g in doc["songs"]
    ]
    takes = {(tk["singer"], tk["song"]): tk["path"] for tk in doc["takes"]}
    return CorpusManifest(
        root=root,
        seed=doc["seed"],
        sample_rate=doc["sample_rate"],
        singers=singers,
        songs=songs,
        takes=takes,
    )
