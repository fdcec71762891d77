"""
FSFH generalized plants for the two canceler architectures.

Both plants live at the slow period h, with lifted (N-wide) exogenous input
w and performance output z, and a scalar measurement y = S_h(line) driving
the scalar canceler output u.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from src.discretize import DelaySpec, c2d_zoh, lift, lifted_delay, selectors
from src.errors import InvalidProblem
from src.lti import (
    GeneralizedPlant,
    StateSpace,
    append,
    identity,
    is_stable,
    parallel_outputs,
    series,
    static_gain,
)

logger = logging.getLogger(__name__)

STATE_EXPLOSION = 500


class CancelerMode(Enum):
    FEEDFORWARD = "feedforward"
    FEEDBACK = "feedback"


@dataclass(frozen=True, eq=False)
class DesignProblem:
    """
    Relay loop data: coupling path P, relay G, signal weight (F for
    feedforward, W for feedback), loop delay and measurement regularization.
    """

    P: StateSpace
    G: StateSpace
    weight: StateSpace
    delay: DelaySpec
    mode: CancelerMode
    meas_reg: float = 1e-6

    def __post_init__(self):
        if not isinstance(self.mode, CancelerMode):
            try:
                object.__setattr__(self, "mode", CancelerMode(self.mode))
            except ValueError:
                raise InvalidProblem(f"Unknown canceler mode {self.mode!r}") from None

        for name, sys in (("P", self.P), ("G", self.G), ("weight", self.weight)):
            if sys.is_discrete:
                raise InvalidProblem(f"{name} must be a continuous-time system")
            if sys.n_inputs != 1 or sys.n_outputs != 1:
                raise InvalidProblem(f"{name} must be single-input single-output")

        for name, sys in (("P", self.P), ("weight", self.weight)):
            if not is_stable(sys):
                raise InvalidProblem(f"{name} must be stable")
            if np.any(sys.D != 0):
                raise InvalidProblem(f"{name} must be strictly proper (D = 0)")

        if not self.meas_reg >= 0:
            raise InvalidProblem(f"meas_reg must be >= 0, got {self.meas_reg}")

    @property
    def h(self) -> float:
        return self.delay.h

    @property
    def N(self) -> int:
        return self.delay.N


@dataclass(frozen=True, eq=False)
class ContinuousSigma:
    """Σ(s) = [[W, -1], [W, e^{-Ls} P G]] with the delay kept symbolic."""

    W: StateSpace
    PG: StateSpace
    L: float

    def evaluate(self, s: complex) -> np.ndarray:
        w = self.W.evaluate(s)[0, 0]
        coupling = np.exp(-self.L * s) * self.PG.evaluate(s)[0, 0]
        return np.array([[w, -1.0], [w, coupling]], dtype=complex)

    def describe(self) -> str:
        return (
            "Sigma(s) = [[W(s), -1], [W(s), exp(-L s) P(s) G(s)]] with "
            f"W of order {self.W.n_states}, P G of order {self.PG.n_states}, "
            f"L = {self.L}"
        )


def build_plant(prob: DesignProblem, N: int | None = None) -> GeneralizedPlant:
    if prob.mode is CancelerMode.FEEDBACK:
        return build_fb_plant(prob, N)
    return build_ff_plant(prob, N)


def build_fb_plant(prob: DesignProblem, N: int | None = None) -> GeneralizedPlant:
    """
    Σ_dN = [[W_dN, -H_N], [S_N W_dN, S_Nk z^-m P_dN G_dN H_N]].

    The (2,2) block is composed as hold -> G -> P -> lifted delay -> selector.
    """
    if prob.mode is not CancelerMode.FEEDBACK:
        raise InvalidProblem("build_fb_plant needs a feedback problem")
    N = _check_grid(prob, N)
    h, fast = prob.h, prob.h / N

    W_dN = lift(c2d_zoh(prob.weight, fast), N)
    P_dN = lift(c2d_zoh(prob.P, fast), N)
    G_dN = lift(c2d_zoh(prob.G, fast), N)

    H_N, S_N, _ = selectors(N, 0)
    m, tap = _coupling_taps(prob.delay)
    _, _, S_Nk = selectors(N, tap)

    coupling = static_gain(H_N, h)
    for block in (G_dN, P_dN, lifted_delay(m, N, h), static_gain(S_Nk, h)):
        coupling = series(coupling, block)

    nW, nc = W_dN.n_states, coupling.n_states
    A = np.zeros((nW + nc, nW + nc))
    A[:nW, :nW] = W_dN.A
    A[nW:, nW:] = coupling.A
    B_w = np.vstack([W_dN.B, np.zeros((nc, N))])
    B_u = np.vstack([np.zeros((nW, 1)), coupling.B])
    C_z = np.hstack([W_dN.C, np.zeros((N, nc))])
    C_y = np.hstack([S_N @ W_dN.C, coupling.C])

    return _assemble(
        A, B_w, B_u, C_z, W_dN.D, -H_N, C_y, S_N @ W_dN.D, coupling.D, prob.meas_reg, h
    )


def build_ff_plant(prob: DesignProblem, N: int | None = None) -> GeneralizedPlant:
    """
    Model-matching plant z = lift(e^{-Ls} P G F) w - H_N u, y = S_N F_dN w.

    The canceler output never reaches its own input, so P22 = 0.
    """
    if prob.mode is not CancelerMode.FEEDFORWARD:
        raise InvalidProblem("build_ff_plant needs a feedforward problem")
    N = _check_grid(prob, N)
    h, fast = prob.h, prob.h / N
    delay = prob.delay

    # w -> [P G F w; F w], discretized as one continuous cascade
    branches = parallel_outputs(series(prob.G, prob.P), identity(1))
    fast_sys = c2d_zoh(series(prob.weight, branches), fast)
    if delay.k:
        fast_sys = series(fast_sys, append(lifted_delay(delay.k, 1, fast), identity(1, fast)))

    lifted = lift(fast_sys, N)  # outputs interleaved [pgf_0, f_0, pgf_1, f_1, ...]
    regroup = np.zeros((2 * N, 2 * N))
    for i in range(N):
        regroup[i, 2 * i] = 1.0
        regroup[N + i, 2 * i + 1] = 1.0

    H_N, S_N, _ = selectors(N, 0)
    taps = append(lifted_delay(delay.m, N, h), static_gain(S_N, h))
    open_loop = series(series(lifted, static_gain(regroup, h)), taps)

    n = open_loop.n_states
    return _assemble(
        open_loop.A,
        open_loop.B,
        np.zeros((n, 1)),
        open_loop.C[:N],
        open_loop.D[:N],
        -H_N,
        open_loop.C[N:],
        open_loop.D[N:],
        np.zeros((1, 1)),
        prob.meas_reg,
        h,
    )


def build_continuous_sigma(prob: DesignProblem) -> ContinuousSigma:
    """Continuous feedback plant for documentation and frequency plots only."""
    if prob.mode is not CancelerMode.FEEDBACK:
        raise InvalidProblem("Sigma(s) describes the feedback canceler problem")
    return ContinuousSigma(W=prob.weight, PG=series(prob.G, prob.P), L=prob.delay.L)


# ======================================================================================= #
# PRIVATE HELPERS #


def _check_grid(prob: DesignProblem, N: int | None) -> int:
    N = prob.N if N is None else N
    if N < 2 or N != prob.delay.N:
        raise InvalidProblem(f"N={N} does not match the delay grid N={prob.delay.N}")
    return N


def _coupling_taps(delay: DelaySpec):
    """
    Lifted delay count and selector index so that the sample read at nh is
    the coupling output at nh - L. For k = 0 this is (m, 0); otherwise the
    sample sits at component N - k of the block m + 1 periods back.
    """
    if delay.k == 0:
        return delay.m, 0
    return delay.m + 1, delay.N - delay.k


def _assemble(A, B_w, B_u, C_z, D_zw, D_zu, C_y, D_yw, D_yu, meas_reg, h):
    """
    Stack the partitioned blocks into one plant; meas_reg > 0 appends a
    fictitious noise input entering only the measurement.
    """
    n, nz = A.shape[0], C_z.shape[0]
    if meas_reg > 0:
        B_w = np.hstack([B_w, np.zeros((n, 1))])
        D_zw = np.hstack([D_zw, np.zeros((nz, 1))])
        D_yw = np.hstack([D_yw, [[meas_reg]]])
    nw = B_w.shape[1]

    sys = StateSpace(
        A,
        np.hstack([B_w, B_u]),
        np.vstack([C_z, C_y]),
        np.block([[D_zw, D_zu], [D_yw, D_yu]]),
        h,
    )
    if sys.n_states > STATE_EXPLOSION:
        logger.warning(f"StateExplosion: generalized plant has {sys.n_states} states")
    logger.info(f"Built plant: {sys.n_states} states, nw={nw}, nz={nz}")
    return GeneralizedPlant(sys=sys, nw=nw, nu=1, nz=nz, ny=1)
