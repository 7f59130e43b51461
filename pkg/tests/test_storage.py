import numpy as np
import pytest

from eegsev import storage
from eegsev.errors import FormatError
from eegsev.features import BDI, PHQ9, RawRecording
from eegsev.synth import SynthConfig, generate


def make_recording(seed=0, score=7, scale=PHQ9):
    rng = np.random.default_rng(seed)
    return RawRecording(
        subject_id=f"sub-{seed:03d}",
        sample_rate_hz=250.0,
        signal=rng.normal(size=(4, 1500)),
        score=score,
        scale=scale,
    )


class TestRawRecordingIO:
    def test_round_trip(self, tmp_path):
        rec = make_recording()
        path = tmp_path / "sub-000.eegr"
        storage.write_raw_recording(rec, path)
        back = storage.read_raw_recording(path)
        assert back.subject_id == "sub-000"
        assert back.sample_rate_hz == rec.sample_rate_hz
        assert back.score == rec.score
        assert back.scale == rec.scale
        # f32 payload: exact after one round trip through float32
        np.testing.assert_array_equal(back.signal,
                                      rec.signal.astype(np.float32))

    def test_missing_score(self, tmp_path):
        rec = make_recording(score=None)
        path = tmp_path / "r.eegr"
        storage.write_raw_recording(rec, path)
        assert storage.read_raw_recording(path).score is None

    def test_bdi_scale(self, tmp_path):
        rec = make_recording(score=30, scale=BDI)
        path = tmp_path / "r.eegr"
        storage.write_raw_recording(rec, path)
        assert storage.read_raw_recording(path).scale == BDI

    def test_subject_id_from_filename(self, tmp_path):
        rec = make_recording()
        path = tmp_path / "patient-42.eegr"
        storage.write_raw_recording(rec, path)
        assert storage.read_raw_recording(path).subject_id == "patient-42"

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "r.eegr"
        path.write_bytes(b"JUNK" + b"\x00" * 40)
        with pytest.raises(FormatError):
            storage.read_raw_recording(path)

    def test_truncated_signal(self, tmp_path):
        rec = make_recording()
        path = tmp_path / "r.eegr"
        storage.write_raw_recording(rec, path)
        data = path.read_bytes()
        path.write_bytes(data[:-100])
        with pytest.raises(FormatError):
            storage.read_raw_recording(path)

    def test_write_deterministic(self, tmp_path):
        rec = make_recording()
        a, b = tmp_path / "a.eegr", tmp_path / "b.eegr"
        storage.write_raw_recording(rec, a)
        storage.write_raw_recording(rec, b)
        assert a.read_bytes() == b.read_bytes()


class TestFeatureStoreIO:
    def _subject(self):
        cfg = SynthConfig(channels=4, epochs_per_subject=6,
                          counts_per_class=(2, 2), seed=3)
        subjects, _ = generate(cfg)
        return subjects[0]

    def test_round_trip(self, tmp_path):
        ds = self._subject()
        path = tmp_path / "s.defs"
        storage.write_feature_store(ds, path)
        back = storage.read_feature_store(path)
        assert back.subject_id == ds.subject_id
        assert back.label == ds.label
        np.testing.assert_array_equal(
            back.feature_array(),
            ds.feature_array().astype(np.float32).astype(np.float64))

    def test_unicode_subject_id(self, tmp_path):
        ds = self._subject()
        renamed = type(ds)(
            "sujet-é", ds.label,
            [type(s)("sujet-é", s.epoch_index, s.features, s.label)
             for s in ds.samples])
        path = tmp_path / "u.defs"
        storage.write_feature_store(renamed, path)
        assert storage.read_feature_store(path).subject_id == "sujet-é"

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "s.defs"
        path.write_bytes(b"EEGR" + b"\x00" * 40)
        with pytest.raises(FormatError):
            storage.read_feature_store(path)

    def test_truncated(self, tmp_path):
        ds = self._subject()
        path = tmp_path / "s.defs"
        storage.write_feature_store(ds, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            storage.read_feature_store(path)


class TestLoadFeatureDir:
    def test_sorted_by_filename(self, tmp_path):
        cfg = SynthConfig(channels=4, epochs_per_subject=4,
                          counts_per_class=(2, 2), seed=4)
        subjects, _ = generate(cfg)
        for ds in subjects:
            storage.write_feature_store(ds, tmp_path / f"{ds.subject_id}.defs")
        loaded = storage.load_feature_dir(tmp_path)
        ids = [s.subject_id for s in loaded]
        assert ids == sorted(ids)
        assert len(loaded) == len(subjects)

    def test_empty_dir(self, tmp_path):
        with pytest.raises(FormatError):
            storage.load_feature_dir(tmp_path)
