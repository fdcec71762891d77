import sys
import os

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import json

import numpy as np
import pytest

from main import main
from src.hinf_synth import Controller, controller_to_json
from src.lti import static_gain
from tests.conftest import CONFIG_DIR


def write_config(tmp_path, name: str, **overrides):
    doc = json.loads((CONFIG_DIR / f"{name}.json").read_text())
    doc.update(overrides)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(doc))
    return str(path)


def read_table(path):
    return np.loadtxt(path, delimiter=",", skiprows=1)


class TestDesignCommand:

    def test_writes_controller_and_report(self, tmp_path):
        config = write_config(tmp_path, "feedforward")
        out = tmp_path / "run"

        assert main(["design", config, "--out", str(out)]) == 0

        report = json.loads((out / "report.json").read_text())
        assert report["order"] == 18
        assert report["closed_loop_radius"] < 1.0
        assert report["gamma"] < 0.625
        assert report["config"]["window"] == [4.0, 40.0]

        first = (out / "K.json").read_bytes()
        assert main(["design", config, "--out", str(out)]) == 0
        assert (out / "K.json").read_bytes() == first

    def test_non_representable_delay(self, tmp_path, capsys):
        config = write_config(tmp_path, "feedforward", L=0.3)
        assert main(["design", config, "--out", str(tmp_path)]) == 1
        assert "ERROR NonRepresentableDelay" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        config = write_config(tmp_path, "feedback", plant_gain=3)
        assert main(["design", config, "--out", str(tmp_path)]) == 1
        assert "ERROR ConfigError" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["design", str(tmp_path / "absent.json")]) == 1
        assert "ERROR ConfigError" in capsys.readouterr().err


class TestSimulateCommand:

    @pytest.fixture
    def ff_controller_file(self, tmp_path, ff_design):
        _, controller, _ = ff_design
        path = tmp_path / "K.json"
        path.write_text(controller_to_json(controller))
        return str(path)

    def test_feedback_without_canceler_diverges(self, tmp_path):
        config = write_config(tmp_path, "feedback")
        assert main(["simulate", config, "--none", "--out", str(tmp_path)]) == 0

        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert metrics["diverged"] is True
        assert metrics["rms_ratio_vs_none"] is None

    def test_feedforward_canceler_reduces_coupling(self, tmp_path, ff_controller_file, baseline):
        config = write_config(tmp_path, "feedforward")
        out = tmp_path / "sim"
        code = main(["simulate", config, "--controller", ff_controller_file, "--out", str(out)])
        assert code == 0

        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["diverged"] is False
        ratio = metrics["rms_ratio_vs_none"]
        assert ratio < 1.0
        assert ratio == pytest.approx(baseline("feedforward_rms_ratio", ratio), rel=1e-6)
        assert metrics["l2_error"] == pytest.approx(1.1811, rel=1e-3)
        header = (out / "trace.csv").read_text().splitlines()[0]
        assert header == "t,v,y,u,e"

    def test_shaped_input_reports_bound(self, tmp_path, ff_controller_file):
        config = write_config(
            tmp_path, "feedforward", input={"kind": "UnitNormPulse", "start": 1.0, "width": 2.0}
        )
        argv = ["simulate", config, "--controller", ff_controller_file, "--out", str(tmp_path)]
        code = main(argv)
        assert code == 0

        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert metrics["bound_check"]["passed"] is True

    def test_period_mismatch(self, tmp_path, capsys):
        controller = Controller(K=static_gain([[0.0]], dt=2.0), gamma_achieved=0.0)
        path = tmp_path / "K.json"
        path.write_text(controller_to_json(controller))
        config = write_config(tmp_path, "feedforward")

        assert main(["simulate", config, "--controller", str(path), "--out", str(tmp_path)]) == 1
        assert "ERROR PeriodMismatch" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "block",
        [
            {"kind": "rect_wave", "period": "8"},
            {"kind": "rect_wave", "amplitude": None},
            {"kind": "filtered_noise", "seed": 1.5},
            {"kind": "unit_norm_pulse", "start": "1", "width": 2.0},
            {"kind": 3},
            {"kind": "square"},
            {"kind": "rect_wave", "period": -8.0},
            {"kind": "rect_wave", "phase": 0.5},
            ["rect_wave"],
        ],
    )
    def test_malformed_input_block(self, tmp_path, capsys, block):
        config = write_config(tmp_path, "feedforward", input=block)
        assert main(["simulate", config, "--none", "--out", str(tmp_path)]) == 1
        assert "ERROR ConfigError" in capsys.readouterr().err
        assert not (tmp_path / "metrics.json").exists()

    def test_malformed_input_block_rejected_by_design(self, tmp_path, capsys):
        config = write_config(tmp_path, "feedback", input={"period": float("inf")})
        assert main(["design", config, "--out", str(tmp_path)]) == 1
        assert "ERROR ConfigError" in capsys.readouterr().err

    def test_controller_and_none_are_exclusive(self, tmp_path):
        config = write_config(tmp_path, "feedforward")
        with pytest.raises(SystemExit):
            main(["simulate", config, "--none", "--controller", "K.json"])


class TestFreqrespCommand:

    def test_writes_tables(self, tmp_path):
        config = write_config(tmp_path, "feedforward")
        assert main(["freqresp", config, "--out", str(tmp_path)]) == 0

        for name in ("P", "GP", "weight", "error_system"):
            table = read_table(tmp_path / f"freq_{name}.csv")
            assert table.shape == (512, 2)
            assert np.all(np.diff(table[:, 0]) > 0)

        assert read_table(tmp_path / "freq_P.csv")[0, 1] == pytest.approx(0.25, rel=1e-5)
        assert read_table(tmp_path / "freq_GP.csv")[0, 1] == pytest.approx(0.625, rel=1e-5)
        # no canceler: the error system is the coupling path itself
        error = read_table(tmp_path / "freq_error_system.csv")
        assert error[0, 1] == pytest.approx(0.625, rel=1e-3)
