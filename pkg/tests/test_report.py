import json

import numpy as np
import pytest

from eegsev import report as rep
from eegsev.errors import FormatError
from eegsev.model import ModelConfig
from eegsev.synth import SynthConfig, generate
from eegsev.training import TrainConfig, fit, loso


@pytest.fixture(scope="module")
def loso_report():
    cfg = SynthConfig(channels=4, epochs_per_subject=5,
                      counts_per_class=(2, 2, 2), class_sep=6.0,
                      subject_sd=0.3, seed=0)
    subjects, _ = generate(cfg)
    tcfg = TrainConfig(model=ModelConfig(channels=4, classes=3, hidden=4,
                                         domains=2, seed=0),
                       total_epochs=4, seed=0)
    folds, cm, metrics = loso(subjects, tcfg)
    return rep.build_loso_report(tcfg, folds, cm, metrics)


class TestClassLabels:
    def test_five_maps_to_phq9_names(self):
        names = rep.class_labels(5)
        assert names[0] == "Normal" and names[4] == "Major"

    def test_four_maps_to_bdi_names(self):
        assert len(rep.class_labels(4)) == 4

    def test_other_generic(self):
        assert rep.class_labels(3) == ["Class0", "Class1", "Class2"]


class TestBuildReports:
    def test_loso_report_fields(self, loso_report):
        assert loso_report["report_version"] == rep.REPORT_VERSION
        assert loso_report["command"] == "loso"
        assert len(loso_report["folds"]) == 6
        assert np.asarray(loso_report["confusion_matrix"]).sum() == 6
        assert "accuracy" in loso_report["metrics"]
        assert loso_report["ledger_violations"] == 0
        assert "history" not in loso_report

    def test_fit_report_fields(self):
        cfg = SynthConfig(channels=4, epochs_per_subject=5,
                          counts_per_class=(2, 2, 2), seed=0)
        subjects, _ = generate(cfg)
        tcfg = TrainConfig(model=ModelConfig(channels=4, classes=3, hidden=4,
                                             domains=2, seed=0),
                           total_epochs=3, seed=0)
        _, history = fit(subjects, tcfg)
        out = rep.build_fit_report(tcfg, history)
        assert out["command"] == "train"
        assert len(out["history"]) == 3

    def test_report_is_json_serializable_and_deterministic(self, tmp_path,
                                                           loso_report):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        rep.write_report(loso_report, a)
        rep.write_report(loso_report, b)
        assert a.read_bytes() == b.read_bytes()
        assert rep.load_report(a) == json.loads(a.read_text())

    def test_load_rejects_other_versions(self, tmp_path):
        p = tmp_path / "r.json"
        p.write_text(json.dumps({"report_version": 2}))
        with pytest.raises(FormatError):
            rep.load_report(p)


class TestRenderText:
    def test_percentages_two_decimals(self, loso_report):
        text = rep.render_text(loso_report)
        assert text.startswith("Accuracy: ")
        assert "Macro Average" in text
        assert "Micro precision" in text
        acc = loso_report["metrics"]["accuracy"]
        assert f"{100 * acc:.2f}" in text

    def test_regression_report(self):
        report = {"metrics": {"regression": {"mae": 1.234, "rmse": 2.345}}}
        text = rep.render_text(report)
        assert "MAE:  1.23" in text
        assert "RMSE: 2.35" in text


class TestFigures:
    def test_confusion_figure_written(self, tmp_path, loso_report):
        path = tmp_path / "cm.png"
        assert rep.render_confusion_figure(loso_report, path) is True
        assert path.stat().st_size > 0

    def test_confusion_skipped_without_matrix(self, tmp_path):
        assert rep.render_confusion_figure({"confusion_matrix": None},
                                           tmp_path / "cm.png") is False

    def test_history_figure(self, tmp_path):
        report = {"history": [
            {"epoch": 0, "total_loss": 2.0, "train_accuracy": 0.4},
            {"epoch": 1, "total_loss": 1.0, "train_accuracy": 0.8},
        ]}
        path = tmp_path / "h.png"
        assert rep.render_history_figure(report, path) is True
        assert path.stat().st_size > 0

    def test_history_skipped_when_absent(self, tmp_path):
        assert rep.render_history_figure({}, tmp_path / "h.png") is False

    def test_sweep_figure(self, tmp_path):
        rows = [{"param": "u_rate", "value": 0.3, "accuracy": 0.5,
                 "macro_f1": 0.4},
                {"param": "u_rate", "value": 0.6, "accuracy": 0.7,
                 "macro_f1": 0.6}]
        path = tmp_path / "s.png"
        rep.render_sweep_figure(rows, path)
        assert path.stat().st_size > 0
