import numpy as np
import pytest

from svctrace.convert import (
    ConversionError,
    ConversionJob,
    DiffusionTrace,
    StepRecord,
    capture_embeddings,
    convert,
    render_step,
)


@pytest.fixture(scope="module")
def fast_trace(tiny_bundle, corpus_manifest, dsp_cfg):
    """Structural trace from the untrained tiny checkpoint; cheap to build."""
    job = ConversionJob(source_singer=0, song=0, target_singer=1, num_steps=20, seed=5)
    return convert(job, tiny_bundle, corpus_manifest, dsp_cfg)


class TestJob:
    def test_trace_id_is_deterministic_slug(self):
        job = ConversionJob(1, 2, 3, 50, 7)
        assert job.trace_id() == "s1-g2-t3-n50-r7"


class TestConvert:
    def test_step_list_full_schedule(self, fast_trace):
        assert fast_trace.step_list() == list(range(19, -1, -1))

    def test_every_record_is_finite_and_shaped(self, fast_trace):
        frames = fast_trace.frames
        for rec in fast_trace.records:
            assert rec.noisy_mel.shape == (frames, 80)
            assert rec.clean_estimate.shape == (frames, 80)
            assert rec.f0 is not None and len(rec.f0) == frames

    def test_identical_jobs_identical_hashes(self, tiny_bundle, corpus_manifest, dsp_cfg):
        job = ConversionJob(source_singer=2, song=1, target_singer=0, num_steps=5, seed=9)
        a = convert(job, tiny_bundle, corpus_manifest, dsp_cfg, track_pitch=False)
        b = convert(job, tiny_bundle, corpus_manifest, dsp_cfg, track_pitch=False)
        assert a.content_hash() == b.content_hash()

    def test_final_mel_equals_last_clean_estimate(self, fast_trace):
        assert np.allclose(
            fast_trace.final_mel, fast_trace.records[-1].clean_estimate, atol=1e-6
        )

    def test_unknown_singer_rejected(self, tiny_bundle, corpus_manifest, dsp_cfg):
        job = ConversionJob(source_singer=0, song=0, target_singer=17, num_steps=5, seed=0)
        with pytest.raises(ConversionError):
            convert(job, tiny_bundle, corpus_manifest, dsp_cfg)

    def test_render_step_zero_equals_final_render(self, fast_trace, dsp_cfg):
        final_render = render_step(fast_trace, 0, dsp_cfg)
        rec = fast_trace.record_at(0)
        assert np.allclose(rec.clean_estimate, fast_trace.final_mel, atol=1e-6)
        assert len(final_render) > 0


class TestTraceInvariants:
    def test_steps_must_strictly_decrease(self, fast_trace):
        records = [fast_trace.records[0], fast_trace.records[0]]
        with pytest.raises(ConversionError, match="decrease"):
            DiffusionTrace(
                trace_id="bad",
                job=fast_trace.job,
                records=records,
                final_mel=fast_trace.final_mel,
                schedule_params=fast_trace.schedule_params,
                mel_norm_lo=fast_trace.mel_norm_lo,
                mel_norm_hi=fast_trace.mel_norm_hi,
                sample_rate=fast_trace.sample_rate,
            )

    def test_non_finite_mel_rejected(self, fast_trace):
        bad = StepRecord(
            step=0,
            noisy_mel=np.full((4, 80), np.nan, dtype=np.float32),
            clean_estimate=np.zeros((4, 80), dtype=np.float32),
            f0=None,
            taps=None,
        )
        with pytest.raises(ConversionError, match="non-finite"):
            DiffusionTrace(
                trace_id="bad",
                job=fast_trace.job,
                records=[bad],
                final_mel=fast_trace.final_mel,
                schedule_params=fast_trace.schedule_params,
                mel_norm_lo=fast_trace.mel_norm_lo,
                mel_norm_hi=fast_trace.mel_norm_hi,
                sample_rate=fast_trace.sample_rate,
            )

    def test_record_lookup(self, fast_trace):
        rec = fast_trace.record_at(10)
        assert rec.step == 10
        with pytest.raises(KeyError):
            fast_trace.record_at(99)


class TestCaptureEmbeddings:
    def test_seven_sequences_with_row_per_step(self, fast_trace):
        embeds = capture_embeddings(fast_trace)
        assert len(embeds) == 7
        for (kind, layer), matrix in embeds.items():
            assert matrix.shape[0] == len(fast_trace.records)
            expected_dim = 128 if kind == "step" else 16
            assert matrix.shape[1] == expected_dim

    def test_step_rows_match_encoding(self, fast_trace):
        from svctrace.denoiser import step_encoding

        embeds = capture_embeddings(fast_trace)
        rows = embeds[("step", None)]
        for row, step in zip(rows, fast_trace.step_list()):
            assert np.allclose(row, step_encoding(step), atol=1e-5)

    def test_identical_jobs_identical_cond_embeddings(
        self, tiny_bundle, corpus_manifest, dsp_cfg
    ):
        job = ConversionJob(source_singer=1, song=1, target_singer=2, num_steps=6, seed=3)
        a = convert(job, tiny_bundle, corpus_manifest, dsp_cfg, track_pitch=False)
        b = convert(job, tiny_bundle, corpus_manifest, dsp_cfg, track_pitch=False)
        ea = capture_embeddings(a)[("step_noise_cond", "last")]
        eb = capture_embeddings(b)[("step_noise_cond", "last")]
        assert np.array_equal(ea, eb)

    def test_trace_without_taps_rejected(self, tiny_bundle, corpus_manifest, dsp_cfg):
        job = ConversionJob(source_singer=0, song=1, target_singer=1, num_steps=4, seed=1)
        trace = convert(
            job, tiny_bundle, corpus_manifest, dsp_cfg, capture_taps=False, track_pitch=False
        )
        with pytest.raises(ConversionError, match="tap"):
            capture_embeddings(trace)
