import os
import sys

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import json
from pathlib import Path

import pytest

from src.hinf_synth import synthesize
from src.plant_builder import build_plant
from src.run_config import RunConfig

CONFIG_DIR = Path(__file__).parent.parent / "data" / "configs"


def load_reference_config(name: str, **overrides) -> RunConfig:
    """Reference configuration from data/configs with selected keys replaced."""
    doc = json.loads((CONFIG_DIR / f"{name}.json").read_text())
    doc.update(overrides)
    return RunConfig.from_dict(doc)


@pytest.fixture(scope="session")
def ff_config():
    return load_reference_config("feedforward")


@pytest.fixture(scope="session")
def fb_config():
    return load_reference_config("feedback")


@pytest.fixture(scope="session")
def ff_design(ff_config):
    """(plant, controller, report) for the feedforward experiment."""
    plant = build_plant(ff_config.problem())
    controller, report = synthesize(plant, gamma_tol=1e-3, stable_controller=True)
    return plant, controller, report


@pytest.fixture(scope="session")
def fb_design(fb_config):
    """(plant, controller, report) for the feedback experiment, G = 1000."""
    plant = build_plant(fb_config.problem())
    controller, report = synthesize(plant, gamma_tol=1e-3)
    return plant, controller, report


BASELINE_FILE = Path(__file__).parent / "baselines.json"


@pytest.fixture(scope="session")
def baseline():
    """
    Regression values keyed by name. A name with no recorded value is
    written to tests/baselines.json on first use and returned as is.
    """
    recorded = json.loads(BASELINE_FILE.read_text()) if BASELINE_FILE.exists() else {}

    def lookup(name: str, measured: float) -> float:
        if name not in recorded:
            recorded[name] = measured
            BASELINE_FILE.write_text(json.dumps(recorded, indent=2, sort_keys=True) + "\n")
        return recorded[name]

    return lookup
