"""
State-space LTI systems: representation, interconnection, stability,
frequency response and H-infinity norm.

A ``StateSpace`` with ``dt=None`` is continuous-time; ``dt > 0`` makes it a
discrete-time system with that sampling period.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as spla
from scipy.optimize import minimize_scalar
from scipy.signal import dlsim, tf2ss

from config import thread_limit
from src.errors import (
    AlgebraicLoop,
    DimensionMismatch,
    DomainMismatch,
    ImproperTransferFunction,
    NumericalFailure,
    SingularResolvent,
    ValidationError,
    ZeroDenominator,
)

logger = logging.getLogger(__name__)

MARGINAL_BAND = 1e-9
GRID_CHUNK = 256


def _as_matrix(value, rows: int, cols: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.size == 0 and rows * cols == 0:
        return np.zeros((rows, cols))
    if arr.ndim < 2 and arr.size == rows * cols:
        arr = arr.reshape(rows, cols)
    if arr.shape != (rows, cols):
        raise DimensionMismatch(
            f"{name} has shape {arr.shape}, expected ({rows}, {cols})"
        )
    return arr


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Realization x' = Ax + Bu, y = Cx + Du (x' is dx/dt or x[n+1])."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        if D.ndim != 2:
            raise DimensionMismatch(f"D must be a matrix, got shape {D.shape}")
        p, m = D.shape

        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            n = 0
        elif A.ndim == 2:
            n = A.shape[0]
        else:
            n = math.isqrt(A.size)
        A = _as_matrix(A, n, n, "A")
        B = _as_matrix(self.B, n, m, "B")
        C = _as_matrix(self.C, p, n, "C")

        if self.dt is not None and not (math.isfinite(self.dt) and self.dt > 0):
            raise DomainMismatch(f"Discrete period must be finite and > 0, got {self.dt}")

        for key, arr in (("A", A), ("B", B), ("C", C), ("D", D)):
            arr = np.array(arr, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    @property
    def is_discrete(self) -> bool:
        return self.dt is not None

    def evaluate(self, q: complex) -> np.ndarray:
        """Transfer matrix C(qI - A)^-1 B + D at a single point q."""
        return _evaluate_points(self, np.array([q], dtype=complex))[0]

    def dc_gain(self) -> np.ndarray:
        return self.evaluate(1.0 if self.is_discrete else 0.0).real

    def __repr__(self):
        domain = f"dt={self.dt}" if self.is_discrete else "continuous"
        return (
            f"StateSpace(states={self.n_states}, inputs={self.n_inputs}, "
            f"outputs={self.n_outputs}, {domain})"
        )


@dataclass(frozen=True, eq=False)
class GeneralizedPlant:
    """Partitioned system with inputs [w; u] and outputs [z; y]."""

    sys: StateSpace
    nw: int
    nu: int
    nz: int
    ny: int

    def __post_init__(self):
        if min(self.nw, self.nu, self.nz, self.ny) < 0:
            raise DimensionMismatch("Partition sizes must be non-negative")
        if self.nw + self.nu != self.sys.n_inputs:
            raise DimensionMismatch(
                f"nw + nu = {self.nw + self.nu} but the system has "
                f"{self.sys.n_inputs} inputs"
            )
        if self.nz + self.ny != self.sys.n_outputs:
            raise DimensionMismatch(
                f"nz + ny = {self.nz + self.ny} but the system has "
                f"{self.sys.n_outputs} outputs"
            )

    @property
    def b1(self):
        return self.sys.B[:, : self.nw]

    @property
    def b2(self):
        return self.sys.B[:, self.nw :]

    @property
    def c1(self):
        return self.sys.C[: self.nz, :]

    @property
    def c2(self):
        return self.sys.C[self.nz :, :]

    @property
    def d11(self):
        return self.sys.D[: self.nz, : self.nw]

    @property
    def d12(self):
        return self.sys.D[: self.nz, self.nw :]

    @property
    def d21(self):
        return self.sys.D[self.nz :, : self.nw]

    @property
    def d22(self):
        return self.sys.D[self.nz :, self.nw :]

    @property
    def p11(self) -> StateSpace:
        return self.block(1, 1)

    @property
    def p12(self) -> StateSpace:
        return self.block(1, 2)

    @property
    def p21(self) -> StateSpace:
        return self.block(2, 1)

    @property
    def p22(self) -> StateSpace:
        return self.block(2, 2)

    def block(self, row: int, col: int) -> StateSpace:
        """Sub-system P_{row,col} (1-indexed as in P11 ... P22)."""
        rows = slice(0, self.nz) if row == 1 else slice(self.nz, None)
        cols = slice(0, self.nw) if col == 1 else slice(self.nw, None)
        return StateSpace(
            self.sys.A,
            self.sys.B[:, cols],
            self.sys.C[rows, :],
            self.sys.D[rows, cols],
            self.sys.dt,
        )


# ======================================================================================= #
# CONSTRUCTION #


def static_gain(D, dt: float | None = None) -> StateSpace:
    D = np.atleast_2d(np.asarray(D, dtype=float))
    p, m = D.shape
    return StateSpace(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), D, dt)


def identity(size: int = 1, dt: float | None = None) -> StateSpace:
    return static_gain(np.eye(size), dt)


def from_tf(numerator: Sequence[float], denominator: Sequence[float], dt=None) -> StateSpace:
    """
    SISO transfer function num/den (descending powers) in controllable
    canonical form.
    """
    num = np.trim_zeros(np.atleast_1d(np.asarray(numerator, dtype=float)), "f")
    den = np.trim_zeros(np.atleast_1d(np.asarray(denominator, dtype=float)), "f")
    if den.size == 0:
        raise ZeroDenominator("Denominator polynomial is identically zero")
    if num.size == 0:
        num = np.zeros(1)

    n = den.size - 1
    if num.size - 1 > n:
        raise ImproperTransferFunction(
            f"Numerator degree {num.size - 1} exceeds denominator degree {n}"
        )

    num, den = num / den[0], den / den[0]
    if n == 0:
        return static_gain([[num[0]]], dt)
    if not np.any(num):
        A, B, _, _ = tf2ss([1.0], den)
        return StateSpace(A, B, np.zeros((1, n)), [[0.0]], dt)

    A, B, C, D = tf2ss(num, den)
    return StateSpace(A, B, C, D, dt)


# ======================================================================================= #
# INTERCONNECTION #


def _check_same_domain(first: StateSpace, second: StateSpace):
    if first.is_discrete != second.is_discrete or (
        first.is_discrete and not math.isclose(first.dt, second.dt, rel_tol=1e-12)
    ):
        raise DomainMismatch(f"Cannot connect {first!r} with {second!r}")


def series(first: StateSpace, second: StateSpace) -> StateSpace:
    """Cascade: the output of ``first`` drives ``second``; state is [x1; x2]."""
    _check_same_domain(first, second)
    if first.n_outputs != second.n_inputs:
        raise DimensionMismatch(
            f"first has {first.n_outputs} outputs, second has {second.n_inputs} inputs"
        )
    n1, n2 = first.n_states, second.n_states
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = first.A
    A[n1:, :n1] = second.B @ first.C
    A[n1:, n1:] = second.A
    B = np.vstack([first.B, second.B @ first.D])
    C = np.hstack([second.D @ first.C, second.C])
    D = second.D @ first.D
    return StateSpace(A, B, C, D, first.dt)


def parallel_outputs(first: StateSpace, second: StateSpace) -> StateSpace:
    """Shared input, outputs stacked as [y1; y2]."""
    _check_same_domain(first, second)
    if first.n_inputs != second.n_inputs:
        raise DimensionMismatch("parallel_outputs needs equal input counts")
    n1, n2 = first.n_states, second.n_states
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = first.A
    A[n1:, n1:] = second.A
    C = np.zeros((first.n_outputs + second.n_outputs, n1 + n2))
    C[: first.n_outputs, :n1] = first.C
    C[first.n_outputs :, n1:] = second.C
    B = np.vstack([first.B, second.B])
    D = np.vstack([first.D, second.D])
    return StateSpace(A, B, C, D, first.dt)


def append(first: StateSpace, second: StateSpace) -> StateSpace:
    """Block-diagonal combination: inputs [u1; u2] and outputs [y1; y2]."""
    _check_same_domain(first, second)
    n1, n2 = first.n_states, second.n_states
    p1, m1 = first.n_outputs, first.n_inputs
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = first.A
    A[n1:, n1:] = second.A
    B = np.zeros((n1 + n2, m1 + second.n_inputs))
    B[:n1, :m1] = first.B
    B[n1:, m1:] = second.B
    C = np.zeros((p1 + second.n_outputs, n1 + n2))
    C[:p1, :n1] = first.C
    C[p1:, n1:] = second.C
    D = spla.block_diag(first.D, second.D)
    return StateSpace(A, B, C, D, first.dt)


def feedback_loop(loop_gain: StateSpace) -> StateSpace:
    """
    Realize y = (I - Λ)^-1 v, i.e. the loop y = v + Λy.

    Raises:
        AlgebraicLoop: when I - D_Λ is singular to machine precision.
    """
    if loop_gain.n_inputs != loop_gain.n_outputs:
        raise DimensionMismatch("Loop operator must be square")
    M = np.eye(loop_gain.n_outputs) - loop_gain.D
    if np.linalg.cond(M) > 1.0 / np.finfo(float).eps:
        raise AlgebraicLoop("I - D is singular: the feedback loop is ill-posed")
    E = np.linalg.inv(M)
    A = loop_gain.A + loop_gain.B @ E @ loop_gain.C
    return StateSpace(A, loop_gain.B @ E, E @ loop_gain.C, E, loop_gain.dt)


# ======================================================================================= #
# STABILITY #


def eigenvalues(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros(0, dtype=complex)
    try:
        return spla.eigvals(A)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalFailure(f"Eigenvalue computation failed: {e}") from e


def spectral_radius(A) -> float:
    eigs = eigenvalues(A)
    return float(np.max(np.abs(eigs))) if eigs.size else 0.0


def stability_margin(sys: StateSpace) -> float:
    """Distance of the slowest pole to the stability boundary (positive = stable)."""
    eigs = eigenvalues(sys.A)
    if eigs.size == 0:
        return math.inf
    if sys.is_discrete:
        return 1.0 - float(np.max(np.abs(eigs)))
    return -float(np.max(eigs.real))


def is_stable(sys: StateSpace) -> bool:
    margin = stability_margin(sys)
    if abs(margin) < MARGINAL_BAND:
        logger.warning(f"{sys!r} is marginally stable (margin {margin:.3e})")
    return margin > 0.0


def is_marginal(sys: StateSpace) -> bool:
    return abs(stability_margin(sys)) < MARGINAL_BAND


# ======================================================================================= #
# FREQUENCY DOMAIN #


def _evaluate_points(sys: StateSpace, q: np.ndarray) -> np.ndarray:
    K = q.size
    p, m, n = sys.n_outputs, sys.n_inputs, sys.n_states
    if n == 0:
        return np.broadcast_to(sys.D.astype(complex), (K, p, m)).copy()

    eigs = eigenvalues(sys.A)
    distance = np.min(np.abs(q[:, None] - eigs[None, :]), axis=1)
    singular = distance <= 1e-12 * np.maximum(1.0, np.abs(q))
    if np.any(singular):
        raise SingularResolvent(
            f"Evaluation point {q[np.argmax(singular)]} is a pole of the system"
        )

    resolvent = q[:, None, None] * np.eye(n) - sys.A
    try:
        X = np.linalg.solve(resolvent, np.broadcast_to(sys.B, (K, n, m)))
    except np.linalg.LinAlgError as e:
        raise SingularResolvent(f"Resolvent solve failed: {e}") from e
    return sys.C @ X + sys.D


def _to_points(sys: StateSpace, freqs: np.ndarray) -> np.ndarray:
    freqs = np.asarray(freqs, dtype=float)
    return np.exp(1j * freqs) if sys.is_discrete else 1j * freqs


def freq_response(sys: StateSpace, points: Sequence[float]) -> np.ndarray:
    """
    Frequency response at each point.

    Discrete systems read ``points`` as angles θ on e^{jθ}; continuous systems
    as ω on jω. Returns an array of shape (len(points), outputs, inputs).
    """
    q = _to_points(sys, np.atleast_1d(points))
    chunks = [q[i : i + GRID_CHUNK] for i in range(0, q.size, GRID_CHUNK)]
    if not chunks:
        return np.zeros((0, sys.n_outputs, sys.n_inputs), dtype=complex)

    workers = min(thread_limit(), len(chunks))
    if workers <= 1:
        parts = [_evaluate_points(sys, chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda chunk: _evaluate_points(sys, chunk), chunks))
    return np.concatenate(parts, axis=0)


def sigma_max(responses: np.ndarray) -> np.ndarray:
    """Largest singular value of each matrix in a stack of responses."""
    if responses.shape[-1] == 0 or responses.shape[-2] == 0:
        return np.zeros(responses.shape[:-2])
    return np.linalg.svd(responses, compute_uv=False)[..., 0]


def _frequency_grid(sys: StateSpace) -> np.ndarray:
    eigs = eigenvalues(sys.A)
    if sys.is_discrete:
        pole_angles = np.abs(np.angle(eigs)) if eigs.size else np.zeros(0)
        grid = np.concatenate(
            [
                np.linspace(0.0, np.pi, 1025),
                np.geomspace(1e-5, np.pi, 1025),
                pole_angles,
            ]
        )
        return np.unique(np.clip(grid, 0.0, np.pi))

    magnitudes = np.abs(eigs[np.abs(eigs) > 0]) if eigs.size else np.zeros(0)
    low = min(1.0, magnitudes.min()) if magnitudes.size else 1.0
    high = max(1.0, magnitudes.max()) if magnitudes.size else 1.0
    grid = np.concatenate(
        [
            [0.0],
            np.geomspace(1e-4 * low, 1e4 * high, 2048),
            magnitudes,
            np.abs(eigs.imag) if eigs.size else np.zeros(0),
        ]
    )
    return np.unique(grid)


def hinf_norm(sys: StateSpace, rel_tol: float = 1e-6) -> float:
    """
    H-infinity norm by dense frequency grid plus bounded golden-section
    refinement around the largest local maxima.

    Returns math.inf for unstable systems.
    """
    if not 0.0 < rel_tol <= 1e-2:
        raise ValidationError(f"rel_tol must lie in (0, 1e-2], got {rel_tol}")
    if sys.n_states == 0:
        return float(sigma_max(sys.D[None].astype(complex))[0])
    if not is_stable(sys):
        logger.warning(f"Unstable system {sys!r}: H-infinity norm is infinite")
        return math.inf

    grid = _frequency_grid(sys)
    gains = sigma_max(freq_response(sys, grid))
    best = float(np.max(gains))
    if not sys.is_discrete:
        best = max(best, float(sigma_max(sys.D[None].astype(complex))[0]))

    def negative_gain(x):
        return -float(sigma_max(freq_response(sys, [x]))[0])

    # local maxima of the sampled gain curve, strongest first
    padded = np.concatenate([[-np.inf], gains, [-np.inf]])
    peaks = np.flatnonzero((padded[1:-1] >= padded[:-2]) & (padded[1:-1] >= padded[2:]))
    peaks = peaks[np.argsort(gains[peaks])[::-1]][:5]

    for i in peaks:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, grid.size - 1)]
        if hi <= lo:
            continue
        result = minimize_scalar(
            negative_gain,
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": rel_tol * max(abs(grid[i]), hi - lo, 1e-12)},
        )
        best = max(best, -float(result.fun))

    return best


# ======================================================================================= #
# TIME DOMAIN #


def response(sys: StateSpace, inputs, x0=None) -> np.ndarray:
    """
    Time response of a discrete system. ``inputs`` has one row per step;
    the result has one row per step and one column per output.
    """
    if not sys.is_discrete:
        raise DomainMismatch("response() needs a discrete-time system")
    u = np.asarray(inputs, dtype=float).reshape(-1, sys.n_inputs)
    if sys.n_states == 0:
        return u @ sys.D.T
    # unit period keeps dlsim's sample count exact
    _, y, _ = dlsim((sys.A, sys.B, sys.C, sys.D, 1.0), u, x0=x0)
    return np.asarray(y).reshape(u.shape[0], sys.n_outputs)
