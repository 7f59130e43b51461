import numpy as np
import pytest

from eegsev.errors import ConfigError
from eegsev.synth import (SynthConfig, flip_report, generate, read_truth,
                          simplex_means, write_truth)


def nearest_centroid_accuracy(subjects, truth, means):
    correct = 0
    for s in subjects:
        mean_vec = s.feature_array().mean(axis=0).ravel()
        pred = int(np.argmin(((means - mean_vec) ** 2).sum(axis=1)))
        correct += pred == truth.per_subject[s.subject_id].true_class
    return correct / len(subjects)


class TestSimplex:
    @pytest.mark.parametrize("n,sep", [(2, 1.0), (3, 6.0), (5, 2.5)])
    def test_equal_pairwise_distances(self, n, sep):
        means = simplex_means(n, 30, sep)
        for i in range(n):
            for j in range(i + 1, n):
                d = np.linalg.norm(means[i] - means[j])
                assert d == pytest.approx(sep, abs=1e-9)


class TestGenerate:
    def test_counts_and_no_flips(self):
        cfg = SynthConfig(counts_per_class=(8, 1), flip_fraction=0.0, seed=3)
        subjects, truth = generate(cfg)
        assert len(subjects) == 9
        assert sum(1 for s in subjects if s.label == 0) == 8
        assert not any(t.flipped for t in truth.per_subject.values())

    def test_flip_consistency(self):
        cfg = SynthConfig(counts_per_class=(6, 6, 6), flip_fraction=0.3, seed=1)
        subjects, truth = generate(cfg)
        by_id = {s.subject_id: s for s in subjects}
        n_flipped = 0
        for sid, t in truth.per_subject.items():
            assert t.flipped == (t.stored_label != t.true_class)
            assert by_id[sid].label == t.stored_label
            n_flipped += t.flipped
        assert n_flipped == int(np.floor(0.3 * 18))

    def test_flipped_subjects_keep_true_class_features(self):
        cfg = SynthConfig(counts_per_class=(6, 6), class_sep=10.0,
                          subject_sd=0.1, epoch_sd=0.1, flip_fraction=0.4,
                          seed=2)
        subjects, truth = generate(cfg)
        means = simplex_means(2, cfg.channels * cfg.bands, cfg.class_sep)
        assert nearest_centroid_accuracy(subjects, truth, means) == 1.0

    def test_single_class_cannot_flip(self):
        cfg = SynthConfig(counts_per_class=(10,), flip_fraction=0.5, seed=0)
        with pytest.raises(ConfigError):
            generate(cfg)

    def test_at_least_one_clean_per_class(self):
        cfg = SynthConfig(counts_per_class=(3, 3, 3), flip_fraction=0.6, seed=5)
        subjects, truth = generate(cfg)
        for c in range(3):
            clean = [t for t in truth.per_subject.values()
                     if t.true_class == c and not t.flipped]
            assert clean

    def test_determinism(self):
        cfg = SynthConfig(counts_per_class=(4, 4), flip_fraction=0.25, seed=9)
        a, ta = generate(cfg)
        b, tb = generate(cfg)
        for sa, sb in zip(a, b):
            np.testing.assert_array_equal(sa.feature_array(),
                                          sb.feature_array())
            assert sa.label == sb.label
        assert ta.per_subject == tb.per_subject

    def test_separability_dial(self):
        accs = []
        for sep in (0.5, 3.0, 10.0):
            cfg = SynthConfig(counts_per_class=(6, 6, 6), class_sep=sep,
                              subject_sd=0.5, epoch_sd=1.0, seed=11)
            subjects, truth = generate(cfg)
            means = simplex_means(3, cfg.channels * cfg.bands, sep)
            accs.append(nearest_centroid_accuracy(subjects, truth, means))
        assert accs[0] <= accs[1] <= accs[2]
        assert accs[2] == 1.0


class TestFlipReport:
    def test_no_flips(self):
        _, truth = generate(SynthConfig(counts_per_class=(3, 3), seed=0))
        rep = flip_report(truth)
        assert rep["flipped_total"] == 0

    def test_partition(self):
        _, truth = generate(
            SynthConfig(counts_per_class=(5, 5), flip_fraction=0.2, seed=4))
        rep = flip_report(truth)
        assert rep["flipped_total"] == 2
        for row in rep["per_class"].values():
            assert row["flipped"] + row["clean"] == row["total"]


class TestTruthIO:
    def test_round_trip(self, tmp_path):
        _, truth = generate(
            SynthConfig(counts_per_class=(4, 4), flip_fraction=0.25, seed=8))
        path = tmp_path / "truth.json"
        write_truth(truth, path)
        loaded = read_truth(path)
        assert loaded.per_subject == truth.per_subject
