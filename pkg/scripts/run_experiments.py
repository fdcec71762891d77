#!/usr/bin/env python3
"""
Reproduce the two canceler experiments.

Runs the feedforward (G = 2.5) and feedback (G = 1000) configurations from
data/configs/: design, simulation with and without the canceler, and a
frequency-response dump. Prints a short summary of each.
"""

import sys
from pathlib import Path
from typing import Any, Dict, Optional

# Add project root to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from config import init_app
from services.canceler_service import CancelerService
from src.errors import RelayCancelError
from src.run_config import RunConfig

# Initialize logging and environment
init_app()

import logging

logger = logging.getLogger(__name__)

EXPERIMENTS = ("feedforward", "feedback")


class ExperimentRunner:
    def __init__(self, config_dir: Path = Path("data/configs")):
        """Runner over the experiment configurations in ``config_dir``."""
        self.config_dir = config_dir

    def run_experiment(self, name: str) -> Optional[Dict[str, Any]]:
        """Design, simulate (with and without canceler) and dump frequency data."""
        config_path = self.config_dir / f"{name}.json"
        logger.info(f"Running experiment: {name}")

        try:
            run_config = RunConfig.load(config_path)
            service = CancelerService(run_config)
            report = service.design()
            canceled = service.simulate(str(service.out_dir / "K.json"))
            uncanceled = CancelerService(
                run_config, out_dir=str(service.out_dir / "no_canceler")
            ).simulate(None)
            service.freqresp(str(service.out_dir / "K.json"))
        except RelayCancelError as e:
            logger.error(f"{name} failed: {e.code}: {e}")
            return None

        return {
            "name": name,
            "gamma": report["gamma"],
            "order": report["order"],
            "closed_loop_radius": report["closed_loop_radius"],
            "diverged_without_canceler": uncanceled["diverged"],
            "diverged_with_canceler": canceled["diverged"],
            "rms_ratio_vs_none": canceled["rms_ratio_vs_none"],
            "out_dir": str(service.out_dir),
        }

    def run_all(self) -> Dict[str, Any]:
        results = {}
        for name in EXPERIMENTS:
            results[name] = self.run_experiment(name)

        succeeded = sum(1 for r in results.values() if r is not None)
        logger.info(f"Experiments complete: {succeeded}/{len(EXPERIMENTS)} successful")
        return results


def main():
    """Main entry point for the reproduction run."""
    results = ExperimentRunner().run_all()

    failed = [name for name, result in results.items() if result is None]
    for result in results.values():
        if result is None:
            continue
        print(f"\n{result['name']}:")
        print(f"  gamma = {result['gamma']:.6g}, controller order = {result['order']}")
        print(f"  closed-loop spectral radius = {result['closed_loop_radius']:.6g}")
        print(f"  diverges without canceler: {result['diverged_without_canceler']}")
        print(f"  diverges with canceler: {result['diverged_with_canceler']}")
        if result["rms_ratio_vs_none"] is not None:
            print(f"  rms ratio vs no canceler = {result['rms_ratio_vs_none']:.6g}")
        print(f"  outputs in {result['out_dir']}")

    if failed:
        print(f"\nFailed experiments: {', '.join(failed)}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
