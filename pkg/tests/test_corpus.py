import numpy as np
import pytest

from svctrace.config import CorpusConfig
from svctrace.corpus import (
    CorpusError,
    SingerSpec,
    SongSpec,
    build_corpus,
    load_corpus,
    make_singer_specs,
    make_song_specs,
    midi_to_hz,
    synth_singer,
)
from svctrace.dsp import extract_f0, mel_spectrogram
from svctrace.metrics import dembed, timbre_embed


class TestSpecs:
    def test_singer_formants_must_increase(self):
        with pytest.raises(CorpusError, match="increasing"):
            SingerSpec(0, 1.0, (900.0, 800.0, 2500.0), (90.0, 110.0, 150.0), -8.0, 5.0, 0.3)

    def test_singer_register_range(self):
        with pytest.raises(CorpusError, match="register"):
            SingerSpec(0, 2.5, (500.0, 1500.0, 2500.0), (90.0, 110.0, 150.0), -8.0, 5.0, 0.3)

    def test_song_pitch_range(self):
        with pytest.raises(CorpusError, match="midi"):
            SongSpec(0, ((20, 500),))

    def test_song_duration_floor(self):
        with pytest.raises(CorpusError, match="80 ms"):
            SongSpec(0, ((60, 50),))

    def test_song_total_cap(self):
        with pytest.raises(CorpusError, match="6 s"):
            SongSpec(0, tuple((60, 500) for _ in range(20)))

    def test_midi_reference_pitch(self):
        assert midi_to_hz(69) == pytest.approx(440.0)
        assert midi_to_hz(57) == pytest.approx(220.0)


class TestSynth:
    SINGER = SingerSpec(0, 1.0, (500.0, 1500.0, 2500.0), (90.0, 110.0, 150.0), -8.0, 5.0, 0.3)
    SONG = SongSpec(0, ((57, 600), (60, 600), (62, 600)))

    def test_deterministic(self):
        a = synth_singer(self.SINGER, self.SONG, seed=42)
        b = synth_singer(self.SINGER, self.SONG, seed=42)
        assert np.array_equal(a.samples, b.samples)

    def test_seed_changes_output(self):
        a = synth_singer(self.SINGER, self.SONG, seed=1)
        b = synth_singer(self.SINGER, self.SONG, seed=2)
        assert not np.array_equal(a.samples, b.samples)

    def test_a3_note_tracks_220(self, dsp_cfg):
        song = SongSpec(0, ((57, 1500),))
        singer = SingerSpec(
            0, 1.0, (500.0, 1500.0, 2500.0), (90.0, 110.0, 150.0), -8.0, 5.0, 0.1
        )
        wave = synth_singer(singer, song, seed=3)
        f0 = extract_f0(wave, dsp_cfg)
        med = np.median(f0.f0_hz[f0.voiced_mask])
        assert 220.0 * 0.98 <= med <= 220.0 * 1.02

    def test_formants_shift_timbre(self, dsp_cfg):
        bright = SingerSpec(
            1, 1.0, (700.0, 2000.0, 3100.0), (90.0, 110.0, 150.0), -8.0, 5.0, 0.3
        )
        song_b = SongSpec(1, ((60, 600), (57, 600), (62, 600)))
        take_a1 = synth_singer(self.SINGER, self.SONG, seed=5)
        take_a2 = synth_singer(self.SINGER, song_b, seed=6)
        take_b1 = synth_singer(bright, self.SONG, seed=5)
        embed = lambda w: timbre_embed(mel_spectrogram(w, dsp_cfg))
        self_sim = dembed(embed(take_a1), embed(take_a2))
        cross_sim = dembed(embed(take_a1), embed(take_b1))
        assert cross_sim < self_sim


class TestBuildCorpus:
    def test_cartesian_count(self, corpus_manifest):
        assert len(corpus_manifest.takes) == 4 * 4
        assert len(corpus_manifest.singers) == 4
        assert len(corpus_manifest.songs) == 4

    def test_same_seed_same_manifest_hash(self, tmp_path, dsp_cfg, corpus_manifest):
        rebuilt = build_corpus(tmp_path / "again", CorpusConfig(), dsp_cfg)
        assert rebuilt.content_hash() == corpus_manifest.content_hash()

    def test_registers_alternate(self, corpus_manifest, dsp_cfg):
        def median_f0(i):
            f0 = extract_f0(corpus_manifest.load_take(i, 0), dsp_cfg)
            return np.median(f0.f0_hz[f0.voiced_mask])

        assert median_f0(1) > median_f0(0)
        assert median_f0(3) > median_f0(2)

    def test_manifest_round_trip(self, corpus_manifest):
        loaded = load_corpus(corpus_manifest.root)
        assert loaded.content_hash() == corpus_manifest.content_hash()
        assert loaded.singers == corpus_manifest.singers
        assert loaded.songs == corpus_manifest.songs

    def test_minimum_size_enforced(self, tmp_path, dsp_cfg):
        with pytest.raises(CorpusError):
            build_corpus(tmp_path / "tiny", CorpusConfig(n_singers=1, n_songs=4), dsp_cfg)

    def test_self_similarity_exceeds_cross(self, corpus_manifest, dsp_cfg):
        # separability frozen from corpus measurement: same singer across
        # songs >= 0.99 cosine, different singers stay below that
        embeds = {
            (i, j): timbre_embed(mel_spectrogram(corpus_manifest.load_take(i, j), dsp_cfg))
            for (i, j) in corpus_manifest.takes
        }
        self_sims = [
            dembed(embeds[(i, a)], embeds[(i, b)])
            for i in range(4)
            for a in range(4)
            for b in range(a + 1, 4)
        ]
        cross_sims = [
            dembed(embeds[(a, j)], embeds[(b, j)])
            for j in range(4)
            for a in range(4)
            for b in range(4)
            if a != b
        ]
        assert min(self_sims) >= 0.99
        assert max(cross_sims) < min(self_sims)

    def test_song_walks_are_deterministic(self):
        a = make_song_specs(4, seed=1235)
        b = make_song_specs(4, seed=1235)
        assert a == b
        singers_a = make_singer_specs(4, seed=1234)
        singers_b = make_singer_specs(4, seed=1234)
        assert singers_a == singers_b
