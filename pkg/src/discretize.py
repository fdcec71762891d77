"""
Step-invariant discretization, discrete-time lifting and delay bookkeeping
for fast-sample/fast-hold (FSFH) problems.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from src.errors import (
    DimensionMismatch,
    DomainMismatch,
    GridMismatch,
    IndexOutOfRange,
    NonRepresentableDelay,
    NumericalFailure,
    ValidationError,
)
from src.lti import StateSpace, identity

logger = logging.getLogger(__name__)

DELAY_TOL = 1e-9


@dataclass(frozen=True)
class DelaySpec:
    """Loop delay L = m*h + (k/N)*h on the fast grid h/N."""

    L: float
    h: float
    N: int
    m: int
    k: int

    def __post_init__(self):
        if self.L < 0 or self.h <= 0 or self.N < 2:
            raise ValidationError(
                f"Need L >= 0, h > 0 and N >= 2 (got L={self.L}, h={self.h}, N={self.N})"
            )
        if self.m < 0 or not 0 <= self.k < self.N:
            raise IndexOutOfRange(f"m={self.m}, k={self.k} out of range for N={self.N}")
        if abs(self.L - (self.m + self.k / self.N) * self.h) > DELAY_TOL * self.h:
            raise NonRepresentableDelay(
                f"L={self.L} != ({self.m} + {self.k}/{self.N})*{self.h}"
            )

    def fast_steps(self, M: int) -> int:
        """Delay expressed in samples of period h/M."""
        steps = self.L * M / self.h
        rounded = round(steps)
        if abs(steps - rounded) > DELAY_TOL * max(1.0, steps):
            raise GridMismatch(f"Delay L={self.L} is not a multiple of h/M = {self.h / M}")
        return int(rounded)


def c2d_zoh(sys: StateSpace, h: float) -> StateSpace:
    """
    Zero-order-hold (step-invariant) discretization with period h.

    A_d and B_d come from one augmented exponential:
        expm(h * [[A, B], [0, 0]]) = [[A_d, B_d], [0, I]]
    """
    if sys.is_discrete:
        raise DomainMismatch("c2d_zoh expects a continuous-time system")
    if not h > 0:
        raise ValidationError(f"Sampling period must be positive, got {h}")

    n, m = sys.n_states, sys.n_inputs
    if n == 0:
        return StateSpace(sys.A, sys.B, sys.C, sys.D, h)

    augmented = np.zeros((n + m, n + m))
    augmented[:n, :n] = sys.A
    augmented[:n, n:] = sys.B
    try:
        E = spla.expm(augmented * h)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalFailure(f"Matrix exponential failed: {e}") from e
    if not np.all(np.isfinite(E)):
        raise NumericalFailure(f"Matrix exponential overflowed for h={h}")

    return StateSpace(E[:n, :n], E[:n, n:], sys.C, sys.D, h)


def lift(sys: StateSpace, N: int) -> StateSpace:
    """
    Discrete-time lifting by N: a period-T system becomes a period-N*T system
    acting on N-blocks of its input and output sequences.
    """
    if not sys.is_discrete:
        raise DomainMismatch("lift expects a discrete-time system")
    if N < 1:
        raise DimensionMismatch(f"Lifting factor must be >= 1, got {N}")

    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    n, m, p = sys.n_states, sys.n_inputs, sys.n_outputs

    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(powers[-1] @ A)

    A_l = powers[N]
    B_l = np.hstack([powers[N - 1 - j] @ B for j in range(N)]) if n else np.zeros((0, N * m))
    C_l = np.vstack([C @ powers[i] for i in range(N)]) if n else np.zeros((N * p, 0))

    D_l = np.zeros((N * p, N * m))
    for i in range(N):
        D_l[i * p : (i + 1) * p, i * m : (i + 1) * m] = D
        for j in range(i):
            D_l[i * p : (i + 1) * p, j * m : (j + 1) * m] = C @ powers[i - j - 1] @ B

    return StateSpace(A_l, B_l, C_l, D_l, sys.dt * N)


def delay_decompose(L: float, h: float, N: int) -> DelaySpec:
    """Split L into m whole periods plus k fast periods h/N."""
    if L < 0:
        raise ValidationError(f"Delay must be non-negative, got {L}")
    if h <= 0 or N < 2:
        raise ValidationError(f"Need h > 0 and N >= 2 (got h={h}, N={N})")

    ratio = L / h
    m = math.floor(ratio)
    k = round((ratio - m) * N)
    if k == N:
        m, k = m + 1, 0

    if abs(L - (m + k / N) * h) > DELAY_TOL * h:
        whole = math.floor(ratio)
        lower = (whole + math.floor((ratio - whole) * N) / N) * h
        upper = lower + h / N
        raise NonRepresentableDelay(
            f"L={L} is not of the form (m + k/{N})*{h}; nearest representable "
            f"delays are {lower:.12g} and {upper:.12g}"
        )
    return DelaySpec(L=L, h=h, N=N, m=m, k=k)


def selectors(N: int, k: int):
    """
    Returns (H_N, S_N, S_Nk): the all-ones hold column, the first-sample
    selector row and the (k+1)-th-sample selector row.
    """
    if N < 1 or not 0 <= k <= N - 1:
        raise IndexOutOfRange(f"k={k} must lie in 0..{N - 1}")
    H_N = np.ones((N, 1))
    S_N = np.zeros((1, N))
    S_N[0, 0] = 1.0
    S_Nk = np.zeros((1, N))
    S_Nk[0, k] = 1.0
    return H_N, S_N, S_Nk


def lifted_delay(m: int, N: int, dt: float = 1.0) -> StateSpace:
    """z^-m acting on N-wide signals: a chain of m N-wide one-step memories."""
    if m < 0:
        raise ValidationError(f"Delay count must be non-negative, got {m}")
    if m == 0:
        return identity(N, dt)

    n = m * N
    A = np.zeros((n, n))
    A[N:, :-N] = np.eye(n - N)
    B = np.zeros((n, N))
    B[:N, :] = np.eye(N)
    C = np.zeros((N, n))
    C[:, -N:] = np.eye(N)
    return StateSpace(A, B, C, np.zeros((N, N)), dt)
