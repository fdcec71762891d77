import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from src.errors import ConfigError
from src.hinf_synth import (
    Controller,
    close_lft,
    controller_from_json,
    controller_to_json,
    synthesize,
)
from src.lti import StateSpace, freq_response, series, sigma_max, static_gain
from src.plant_builder import CancelerMode, build_plant
from src.run_config import RunConfig
from src.simulate import check_bound, l2_norm, rms_reduction, run

logger = logging.getLogger(__name__)

FREQ_POINTS = 512


class CancelerService:
    def __init__(self, run_config: RunConfig, out_dir: Optional[str] = None):
        """Resolve the design problem once; outputs go to ``out_dir``."""
        self.config = run_config
        self.problem = run_config.problem()
        self.out_dir = Path(out_dir or run_config.out_dir)

    def design(self) -> Dict[str, Any]:
        """
        Synthesize the canceler and write K.json and report.json.

        Returns:
            The report dictionary (also written to disk)
        """
        plant = build_plant(self.problem)
        feedforward = self.problem.mode is CancelerMode.FEEDFORWARD
        controller, report = synthesize(
            plant, gamma_tol=self.config.gamma_tol, stable_controller=feedforward
        )

        summary = report.to_dict()
        summary["gamma"] = controller.gamma_achieved
        summary["config"] = self.config.to_dict()

        self._write_text("K.json", controller_to_json(controller))
        self._write_json("report.json", summary)
        return summary

    def simulate(self, controller_path: Optional[str] = None) -> Dict[str, Any]:
        """
        Run the loop with the given controller (or none) and write trace.csv
        and metrics.json. With a controller, a paired no-canceler run
        provides the RMS reduction ratio.
        """
        controller = self.load_controller(controller_path) if controller_path else None
        trace = run(self.config.sim_config(controller, self.problem))

        self._ensure_out_dir()
        trace_path = self.out_dir / "trace.csv"
        trace.to_csv(trace_path)
        logger.info(f"Wrote {trace_path}")

        metrics = {
            "l2_error": l2_norm(trace.e, trace.rate, trace.h),
            "diverged": trace.diverged,
            "rms_ratio_vs_none": None,
        }

        if controller is not None:
            baseline = run(self.config.sim_config(None, self.problem))
            if not (baseline.diverged or trace.diverged):
                metrics["rms_ratio_vs_none"] = rms_reduction(
                    trace, baseline, self.config.resolved_window()
                )
            if self.config.input_spec().drives_w:
                bound = check_bound(trace, controller.gamma_achieved, 1.0)
                metrics["bound_check"] = bound.to_dict()

        metrics["config"] = self.config.to_dict()
        self._write_json("metrics.json", metrics)
        return metrics

    def freqresp(self, controller_path: Optional[str] = None) -> Dict[str, Path]:
        """Write freq,mag tables for P, G·P, the weight and the lifted error system."""
        prob = self.problem
        controller = self.load_controller(controller_path) if controller_path else None

        plant = build_plant(prob)
        K = controller.K if controller else static_gain(np.zeros((1, 1)), prob.h)
        systems = {
            "P": prob.P,
            "GP": series(prob.G, prob.P),
            "weight": prob.weight,
            "error_system": close_lft(plant, K),
        }

        written = {}
        for name, sys in systems.items():
            written[name] = self._write_freq_table(f"freq_{name}.csv", sys)
        return written

    def load_controller(self, path) -> Controller:
        path = Path(path)
        try:
            return controller_from_json(path.read_text())
        except OSError as e:
            raise ConfigError(f"Cannot read controller {path}: {e}") from e

    # ================================================================================= #
    # PRIVATE METHODS #

    def _ensure_out_dir(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def _write_text(self, name: str, text: str) -> Path:
        self._ensure_out_dir()
        path = self.out_dir / name
        path.write_text(text)
        logger.info(f"Wrote {path}")
        return path

    def _write_json(self, name: str, doc: Dict[str, Any]) -> Path:
        return self._write_text(name, json.dumps(doc, indent=2) + "\n")

    def _write_freq_table(self, name: str, sys: StateSpace) -> Path:
        if sys.is_discrete:
            theta = np.geomspace(1e-4, np.pi, FREQ_POINTS)
            mags = sigma_max(freq_response(sys, theta))
            freqs = theta / sys.dt
        else:
            freqs = np.geomspace(1e-3, 1e3, FREQ_POINTS) / self.problem.h
            mags = sigma_max(freq_response(sys, freqs))

        self._ensure_out_dir()
        path = self.out_dir / name
        np.savetxt(
            path,
            np.column_stack([freqs, mags]),
            delimiter=",",
            fmt="%.15g",
            header="freq,mag",
            comments="",
        )
        logger.info(f"Wrote {path}")
        return path
