"""
Fast-grid simulation of the relay loop with or without a digital canceler.

Continuous blocks run at h/M with zero-order hold between fast samples, the
loop delay is an exact buffer of L*M/h fast samples, the sampler reads every
M-th fast sample and the hold repeats the controller output for M samples.
"""

import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from src.discretize import c2d_zoh
from src.errors import (
    AlgebraicLoop,
    DimensionMismatch,
    GridMismatch,
    PeriodMismatch,
    ValidationError,
)
from src.hinf_synth import Controller
from src.lti import response, series
from src.plant_builder import CancelerMode, DesignProblem

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e9
GRID_TOL = 1e-9


class InputKind(Enum):
    RECT_WAVE = "rect_wave"
    FILTERED_NOISE = "filtered_noise"
    UNIT_NORM_PULSE = "unit_norm_pulse"


@dataclass(frozen=True)
class InputSpec:
    """
    Test signal. A rectangular wave is injected directly as v; the pulse and
    noise kinds produce a unit-norm w that is shaped by the problem weight.
    """

    kind: InputKind = InputKind.RECT_WAVE
    period: float = 8.0
    amplitude: float = 1.0
    seed: int = 0
    start: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if not isinstance(self.kind, InputKind):
            try:
                object.__setattr__(self, "kind", InputKind(self.kind))
            except ValueError:
                raise ValidationError(f"Unknown input kind {self.kind!r}") from None
        if self.period <= 0 or self.width <= 0 or self.start < 0:
            raise ValidationError("Input period and width must be > 0, start >= 0")

    @property
    def drives_w(self) -> bool:
        return self.kind is not InputKind.RECT_WAVE


@dataclass(frozen=True, eq=False)
class SimConfig:
    problem: DesignProblem
    K: Controller | None = None
    M: int = 64
    duration: float = 40.0
    input: InputSpec = field(default_factory=InputSpec)

    def __post_init__(self):
        N = self.problem.N
        if self.M < N or self.M % N:
            raise GridMismatch(f"M={self.M} must be a positive multiple of N={N}")
        if not self.duration > 0:
            raise ValidationError(f"duration must be > 0, got {self.duration}")
        if self.K is not None:
            if not math.isclose(self.K.h, self.problem.h, rel_tol=1e-12):
                raise PeriodMismatch(f"Controller period {self.K.h} != h={self.problem.h}")
            if self.K.K.n_inputs != 1 or self.K.K.n_outputs != 1:
                raise DimensionMismatch("Canceler must be single-input single-output")

    @property
    def step(self) -> float:
        return self.problem.h / self.M

    @property
    def n_steps(self) -> int:
        return _on_grid(self.duration, self.step, "duration")


@dataclass(eq=False)
class SimTrace:
    t: np.ndarray
    v: np.ndarray
    y: np.ndarray
    u: np.ndarray
    e: np.ndarray
    rate: int
    h: float
    diverged: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def coupling_effect(self) -> np.ndarray:
        return self.e

    @property
    def step(self) -> float:
        return self.h / self.rate

    def to_csv(self, path):
        columns = np.column_stack([self.t, self.v, self.y, self.u, self.e])
        np.savetxt(
            path,
            columns,
            delimiter=",",
            fmt="%.15g",
            header="t,v,y,u,e",
            comments="",
            newline="\n",
        )


@dataclass
class BoundReport:
    passed: bool
    ratio: float
    measured: float
    bound: float
    tol: float
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "ratio": self.ratio,
            "measured": self.measured,
            "bound": self.bound,
            "tol": self.tol,
            "reason": self.reason,
        }


# ======================================================================================= #
# SIGNALS #


def _on_grid(value: float, step: float, name: str) -> int:
    count = value / step
    rounded = round(count)
    if abs(count - rounded) > GRID_TOL * max(1.0, count):
        raise GridMismatch(f"{name}={value} is not a multiple of the fast step {step}")
    return int(rounded)


def _rect_wave(spec: InputSpec, step: float, n: int) -> np.ndarray:
    period = _on_grid(spec.period, step, "input.period")
    phase = np.arange(n) % period
    return np.where(phase < period / 2, spec.amplitude, -spec.amplitude)


def _unit_w(spec: InputSpec, step: float, n: int) -> np.ndarray:
    """w with unit Riemann L2 norm on the fast grid."""
    if spec.kind is InputKind.UNIT_NORM_PULSE:
        start = _on_grid(spec.start, step, "input.start")
        width = _on_grid(spec.width, step, "input.width")
        if start + width > n:
            raise ValidationError("Pulse does not fit inside the simulated horizon")
        w = np.zeros(n)
        w[start : start + width] = 1.0
    else:
        w = np.random.default_rng(spec.seed).standard_normal(n)
    return w / math.sqrt(np.sum(w * w) * step)


# ======================================================================================= #
# LOOP #


def run(config: SimConfig) -> SimTrace:
    """
    Simulate the physical loop.

    Feedforward: y = v + e^{-Ls}PG y - H K S y (relay amplifies the line).
    Feedback: y = v + e^{-Ls}PG u with u = H K S y (relay transmits u).
    Without a canceler both reduce to y = v + e^{-Ls}PG y.
    """
    prob = config.problem
    M, step, n = config.M, config.step, config.n_steps
    delay = prob.delay.fast_steps(M)
    feedforward = prob.mode is CancelerMode.FEEDFORWARD
    spec = config.input

    coupling = c2d_zoh(series(prob.G, prob.P), step)
    Ag, Bg, Cg = coupling.A, coupling.B[:, 0], coupling.C[0]
    xg = np.zeros(coupling.n_states)
    line = deque([0.0] * delay, maxlen=delay + 1)

    K = config.K.K if config.K is not None else None
    if K is not None:
        Ak, Bk, Ck, Dk = K.A, K.B[:, 0], K.C[0], float(K.D[0, 0])
        xk = np.zeros(K.n_states)
        if feedforward and abs(1.0 + Dk) <= 1e-12:
            raise AlgebraicLoop("1 + D_K = 0: the sampled feedforward loop is ill-posed")

    w_norm = None
    given_y = None
    if spec.drives_w:
        shaped = response(c2d_zoh(prob.weight, step), _unit_w(spec, step, n))[:, 0]
        w_norm = 1.0
        # feedforward: the line itself is F w; feedback: v = W w
        if feedforward:
            given_y = shaped
        else:
            v_in = shaped
    else:
        v_in = _rect_wave(spec, step, n)

    t = np.arange(n) * step
    v, y, u, e = (np.zeros(n) for _ in range(4))
    held = 0.0
    diverged = False
    stop = n

    for i in range(n):
        line.append(float(Cg @ xg))
        c = line[0]
        sample = K is not None and i % M == 0

        if given_y is not None:
            y[i] = given_y[i]
            if sample:
                held = float(Ck @ xk) + Dk * y[i]
                xk = Ak @ xk + Bk * y[i]
            u[i] = held if K is not None else 0.0
            v[i] = y[i] - c + u[i]
            e[i] = abs(c - u[i])
            drive = y[i]
        elif K is None:
            v[i] = v_in[i]
            y[i] = v[i] + c
            u[i] = y[i] if not feedforward else 0.0
            e[i] = abs(c) if feedforward else abs(v[i] - u[i])
            drive = y[i]
        elif feedforward:
            v[i] = v_in[i]
            if sample:
                y_s = (v[i] + c - float(Ck @ xk)) / (1.0 + Dk)
                held = float(Ck @ xk) + Dk * y_s
                xk = Ak @ xk + Bk * y_s
            u[i] = held
            y[i] = v[i] + c - u[i]
            e[i] = abs(y[i] - v[i])
            drive = y[i]
        else:
            v[i] = v_in[i]
            y[i] = v[i] + c
            if sample:
                held = float(Ck @ xk) + Dk * y[i]
                xk = Ak @ xk + Bk * y[i]
            u[i] = held
            e[i] = abs(v[i] - u[i])
            drive = u[i]

        xg = Ag @ xg + Bg * drive

        peak = max(abs(y[i]), abs(u[i]), float(np.max(np.abs(xg), initial=0.0)))
        if K is not None:
            peak = max(peak, float(np.max(np.abs(xk), initial=0.0)))
        if not math.isfinite(peak) or peak > DIVERGENCE_LIMIT:
            diverged = True
            stop = i + 1
            logger.warning(f"Simulation diverged at t={t[i]:.6g}")
            break

    metadata = {
        "mode": prob.mode.value,
        "M": M,
        "h": prob.h,
        "duration": config.duration,
        "input": {**asdict(spec), "kind": spec.kind.value},
        "controller_order": K.n_states if K is not None else None,
        "w_norm": w_norm,
    }
    logger.info(f"Simulated {stop} fast steps ({prob.mode.value}, canceler={K is not None})")
    return SimTrace(
        t=t[:stop],
        v=v[:stop],
        y=y[:stop],
        u=u[:stop],
        e=e[:stop],
        rate=M,
        h=prob.h,
        diverged=diverged,
        metadata=metadata,
    )


# ======================================================================================= #
# METRICS #


def l2_norm(column, rate: int, h: float = 1.0) -> float:
    """Riemann approximation sqrt(sum x_i^2 * h/M)."""
    x = np.asarray(column, dtype=float)
    return math.sqrt(float(np.sum(x * x)) * h / rate)


def check_bound(trace: SimTrace, gamma: float, w_norm: float) -> BoundReport:
    """Checks l2_norm(coupling_effect) <= gamma * w_norm within 2% + 1/M."""
    tol = 0.02 + 1.0 / trace.rate
    bound = gamma * w_norm
    measured = l2_norm(trace.e, trace.rate, trace.h)

    if trace.diverged:
        return BoundReport(False, math.inf, measured, bound, tol, "trace diverged")

    if bound > 0:
        ratio = measured / bound
    else:
        ratio = 0.0 if measured == 0 else math.inf
    passed = measured <= bound * (1.0 + tol)
    reason = "" if passed else f"measured {measured:.6g} exceeds bound {bound:.6g}"
    return BoundReport(passed, ratio, measured, bound, tol, reason)


def rms_reduction(with_canceler: SimTrace, without: SimTrace, window=None) -> float:
    """RMS of the coupling effect with the canceler over RMS without it."""
    if with_canceler.rate != without.rate or not math.isclose(with_canceler.h, without.h):
        raise GridMismatch("Traces were sampled on different grids")

    t0, t1 = window if window is not None else (0.0, math.inf)
    end = min(with_canceler.t[-1], without.t[-1]) if len(with_canceler.t) and len(without.t) else -1
    if t0 > end:
        raise GridMismatch(f"Window start {t0} lies beyond the shorter trace")

    def window_rms(trace):
        mask = (trace.t >= t0 - GRID_TOL) & (trace.t < t1 - GRID_TOL) & (trace.t <= end)
        return mask.sum(), math.sqrt(float(np.mean(trace.e[mask] ** 2))) if mask.any() else 0.0

    count_with, rms_with = window_rms(with_canceler)
    count_without, rms_without = window_rms(without)
    if count_with != count_without:
        raise GridMismatch("Traces do not share the same time grid inside the window")

    if rms_without == 0.0:
        return 1.0 if rms_with == 0.0 else math.inf
    return rms_with / rms_without
