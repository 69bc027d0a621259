import os

import numpy as np
import pytest

from svctrace.convert import ConversionJob, capture_embeddings, convert
from svctrace.metrics import MetricCurve, MetricKind
from svctrace.store import (
    F0_MAGIC,
    MEL_MAGIC,
    StoreError,
    TraceStore,
    read_array_blob,
    split_tap_key,
    tap_key,
    write_array_blob,
)
from svctrace.tsne import ProjectionMap


@pytest.fixture(scope="module")
def trace(tiny_bundle, corpus_manifest, dsp_cfg):
    job = ConversionJob(source_singer=0, song=0, target_singer=1, num_steps=8, seed=2)
    return convert(job, tiny_bundle, corpus_manifest, dsp_cfg)


@pytest.fixture
def store(tmp_path):
    return TraceStore(tmp_path / "store")


def fake_projections(trace):
    n = len(trace.records)
    return {
        ("step", None): ProjectionMap(
            points=np.arange(2 * n, dtype=float).reshape(n, 2) - n,
            step_labels=trace.step_list(),
            kl_history=[1.0, 0.5],
        )
    }


def fake_curves(trace):
    steps = trace.step_list()
    return {
        MetricKind.MCD: MetricCurve(
            kind=MetricKind.MCD,
            steps=steps,
            values=[None] + [float(i) for i in range(len(steps) - 1)],
        )
    }


class TestBlobs:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((5, 7, 11)).astype(np.float32)
        write_array_blob(tmp_path / "a.bin", MEL_MAGIC, arr)
        back = read_array_blob(tmp_path / "a.bin", MEL_MAGIC, 3)
        assert np.array_equal(arr, back)

    def test_header_size_law(self, tmp_path):
        arr = np.zeros((3, 4, 5), dtype=np.float32)
        write_array_blob(tmp_path / "a.bin", MEL_MAGIC, arr)
        size = os.path.getsize(tmp_path / "a.bin")
        header = 4 + 4 + 3 * 4  # magic + version + dims
        assert size == header + 3 * 4 * 5 * 4

    def test_magic_mismatch(self, tmp_path):
        arr = np.zeros((2, 2), dtype=np.float32)
        write_array_blob(tmp_path / "a.bin", F0_MAGIC, arr)
        with pytest.raises(StoreError, match="magic"):
            read_array_blob(tmp_path / "a.bin", MEL_MAGIC, 2)

    def test_truncation_detected(self, tmp_path):
        arr = np.zeros((4, 4), dtype=np.float32)
        write_array_blob(tmp_path / "a.bin", MEL_MAGIC, arr)
        blob = (tmp_path / "a.bin").read_bytes()
        (tmp_path / "a.bin").write_bytes(blob[:-8])
        with pytest.raises(StoreError, match="mismatch"):
            read_array_blob(tmp_path / "a.bin", MEL_MAGIC, 2)


class TestTapKeys:
    def test_round_trip(self):
        assert split_tap_key(tap_key("step", None)) == ("step", None)
        assert split_tap_key(tap_key("step_noise", "middle")) == ("step_noise", "middle")


class TestWriteRead:
    def test_mel_payload_bit_exact(self, store, trace):
        store.write_trace(trace, embeddings=capture_embeddings(trace))
        yt = store.read_mels(trace.trace_id, "yt")
        x0 = store.read_mels(trace.trace_id, "x0")
        for i, rec in enumerate(trace.records):
            assert np.array_equal(yt[i], rec.noisy_mel)
            assert np.array_equal(x0[i], rec.clean_estimate)

    def test_f0_round_trip(self, store, trace):
        store.write_trace(trace)
        f0 = store.read_f0(trace.trace_id)
        for i, rec in enumerate(trace.records):
            assert np.array_equal(f0[i], rec.f0.f0_hz.astype(np.float32))

    def test_step_slice_bit_equal(self, store, trace):
        store.write_trace(trace)
        step = trace.step_list()[3]
        got = store.read_mel_step(trace.trace_id, step, "yt")
        assert np.array_equal(got, trace.records[3].noisy_mel)

    def test_embeddings_round_trip(self, store, trace):
        embeds = capture_embeddings(trace)
        store.write_trace(trace, embeddings=embeds)
        back = store.read_embeddings(trace.trace_id)
        assert set(back) == set(embeds)
        for key in embeds:
            assert np.array_equal(back[key], embeds[key].astype(np.float32))

    def test_projections_and_curves_round_trip(self, store, trace):
        store.write_trace(
            trace, projections=fake_projections(trace), curves=fake_curves(trace)
        )
        proj = store.read_projections(trace.trace_id)["step"]
        assert proj["steps"] == trace.step_list()
        curves = store.read_curves(trace.trace_id)
        assert curves[MetricKind.MCD].values[0] is None
        assert curves[MetricKind.MCD].values[1] == 0.0

    def test_catalog_updated(self, store, trace):
        store.write_trace(trace)
        entry = store.list_traces()[trace.trace_id]
        assert entry["steps"] == trace.step_list()
        assert entry["content_hash"] == trace.content_hash()

    def test_duplicate_id_rejected(self, store, trace):
        store.write_trace(trace)
        with pytest.raises(StoreError, match="already exists"):
            store.write_trace(trace)

    def test_unknown_trace_raises_keyerror(self, store):
        with pytest.raises(KeyError):
            store.read_meta("nope")

    def test_update_projections_only_touches_derived_file(self, store, trace):
        store.write_trace(trace, projections=fake_projections(trace))
        before = store.read_mels(trace.trace_id, "x0")
        newproj = fake_projections(trace)
        store.update_projections(trace.trace_id, newproj)
        after = store.read_mels(trace.trace_id, "x0")
        assert np.array_equal(before, after)


class TestFaultInjection:
    def test_interrupted_write_leaves_catalog_consistent(self, store, trace, monkeypatch):
        import svctrace.store as store_mod

        calls = {"n": 0}
        real_replace = os.replace

        def failing_replace(src, dst):
            calls["n"] += 1
            raise OSError("simulated disk failure")

        monkeypatch.setattr(store_mod.os, "replace", failing_replace)
        with pytest.raises(OSError):
            store.write_trace(trace)
        monkeypatch.setattr(store_mod.os, "replace", real_replace)

        assert calls["n"] == 1
        assert store.list_traces() == {}
        assert not store.trace_dir(trace.trace_id).exists()
        leftovers = [p for p in (store.root / "traces").iterdir()]
        assert leftovers == []
        # the store still works afterwards
        store.write_trace(trace)
        assert store.has_trace(trace.trace_id)

    def test_staging_failure_cleans_up(self, store, trace, monkeypatch):
        import svctrace.store as store_mod

        def failing_blob(path, magic, array):
            raise OSError("disk full")

        monkeypatch.setattr(store_mod, "write_array_blob", failing_blob)
        with pytest.raises(OSError):
            store.write_trace(trace)
        assert store.list_traces() == {}
        assert list((store.root / "traces").iterdir()) == []
