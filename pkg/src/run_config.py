"""JSON run configuration shared by the CLI and the reproduction script."""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from src.discretize import delay_decompose
from src.errors import ConfigError, ValidationError
from src.hinf_synth import Controller
from src.lti import from_tf
from src.plant_builder import CancelerMode, DesignProblem
from src.simulate import InputKind, InputSpec, SimConfig

logger = logging.getLogger(__name__)

REQUIRED_KEYS = {"mode", "P", "G", "weight", "L", "h", "N"}
OPTIONAL_KEYS = {"M", "meas_reg", "gamma_tol", "input", "duration", "out_dir", "window"}
TF_KEYS = {"num", "den"}
INPUT_KEYS = {"kind", "period", "amplitude", "seed", "start", "width"}

# accepted spellings for input.kind
INPUT_ALIASES = {
    "RectWave": InputKind.RECT_WAVE,
    "FilteredNoise": InputKind.FILTERED_NOISE,
    "UnitNormPulse": InputKind.UNIT_NORM_PULSE,
}


@dataclass(frozen=True)
class TransferFunction:
    num: tuple
    den: tuple

    def to_dict(self) -> dict:
        return {"num": list(self.num), "den": list(self.den)}


@dataclass(frozen=True)
class RunConfig:
    mode: str
    P: TransferFunction
    G: TransferFunction
    weight: TransferFunction
    L: float
    h: float
    N: int
    M: int = 64
    meas_reg: float = 1e-6
    gamma_tol: float = 1e-3
    input: dict = field(default_factory=dict)
    duration: float | None = None
    out_dir: str = "out"
    window: tuple | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("Run configuration must be a JSON object")
        unknown = set(doc) - REQUIRED_KEYS - OPTIONAL_KEYS
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}")
        missing = REQUIRED_KEYS - set(doc)
        if missing:
            raise ConfigError(f"Missing configuration keys: {sorted(missing)}")

        h = _number(doc, "h")
        input_doc = _input_block(doc.get("input"), h)

        window = doc.get("window")
        if window is not None:
            if not isinstance(window, (list, tuple)) or len(window) != 2:
                raise ConfigError("window must be a pair [t0, t1]")
            window = tuple(
                _number(dict(enumerate(window)), i, label="window") for i in range(2)
            )

        duration = doc.get("duration")
        run_config = cls(
            mode=str(doc["mode"]),
            P=_transfer_function(doc, "P"),
            G=_transfer_function(doc, "G"),
            weight=_transfer_function(doc, "weight"),
            L=_number(doc, "L"),
            h=h,
            N=_integer(doc, "N"),
            M=_integer(doc, "M", 64),
            meas_reg=_number(doc, "meas_reg", 1e-6),
            gamma_tol=_number(doc, "gamma_tol", 1e-3),
            input=input_doc,
            duration=40.0 * h if duration is None else _number(doc, "duration"),
            out_dir=str(doc.get("out_dir", "out")),
            window=window,
        )
        try:
            run_config.input_spec()
        except ValidationError as e:
            raise ConfigError(f"input: {e}") from e
        return run_config

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as e:
            raise ConfigError(f"Cannot read {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
        logger.info(f"Loaded run configuration from {path}")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        """Fully resolved configuration, defaults filled in."""
        doc = asdict(self)
        for key in ("P", "G", "weight"):
            doc[key] = getattr(self, key).to_dict()
        doc["window"] = list(self.resolved_window())
        return doc

    def resolved_window(self) -> tuple:
        return self.window if self.window is not None else (4.0 * self.h, self.duration)

    def problem(self) -> DesignProblem:
        try:
            mode = CancelerMode(self.mode)
        except ValueError:
            raise ConfigError(
                f"mode must be one of {[m.value for m in CancelerMode]}, got {self.mode!r}"
            ) from None
        return DesignProblem(
            P=from_tf(self.P.num, self.P.den),
            G=from_tf(self.G.num, self.G.den),
            weight=from_tf(self.weight.num, self.weight.den),
            delay=delay_decompose(self.L, self.h, self.N),
            mode=mode,
            meas_reg=self.meas_reg,
        )

    def input_spec(self) -> InputSpec:
        doc = dict(self.input)
        kind = doc.pop("kind")
        doc["kind"] = INPUT_ALIASES.get(kind, kind)
        return InputSpec(**doc)

    def sim_config(self, controller: Controller | None = None, problem=None) -> SimConfig:
        return SimConfig(
            problem=problem if problem is not None else self.problem(),
            K=controller,
            M=self.M,
            duration=self.duration,
            input=self.input_spec(),
        )


# ======================================================================================= #
# PRIVATE HELPERS #


def _number(doc: dict, key: str, default=None, label: str | None = None) -> float:
    value = doc.get(key, default)
    label = label or key
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{label} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{label} must be finite")
    return float(value)


def _integer(doc: dict, key: str, default=None, label: str | None = None) -> int:
    value = doc.get(key, default)
    label = label or key
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{label} must be an integer, got {value!r}")
    return value


def _transfer_function(doc: dict, key: str) -> TransferFunction:
    tf = doc[key]
    if not isinstance(tf, dict) or set(tf) != TF_KEYS:
        raise ConfigError(f"{key} must be an object with exactly the keys num and den")
    try:
        num = tuple(float(c) for c in tf["num"])
        den = tuple(float(c) for c in tf["den"])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key} coefficients must be numbers: {e}") from e
    return TransferFunction(num=num, den=den)


def _input_block(block, h: float) -> dict:
    """Checked input block with defaults for the rectangular wave."""
    if block is None:
        block = {}
    if not isinstance(block, dict):
        raise ConfigError("input must be an object")
    unknown = set(block) - INPUT_KEYS
    if unknown:
        raise ConfigError(f"Unknown input keys: {sorted(unknown)}")

    kind = block.get("kind", InputKind.RECT_WAVE.value)
    if not isinstance(kind, str):
        raise ConfigError(f"input.kind must be a string, got {kind!r}")
    checked = {"kind": kind}
    defaults = {"period": 8.0 * h, "amplitude": 1.0, "start": None, "width": None}
    for key, default in defaults.items():
        if key in block or default is not None:
            checked[key] = _number(block, key, default, label=f"input.{key}")
    if "seed" in block:
        checked["seed"] = _integer(block, "seed", label="input.seed")
    return checked
