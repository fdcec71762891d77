"""
Discrete-time H-infinity synthesis by gamma bisection.

The discrete plant is mapped to continuous time with the bilinear transform
z = (1 + s) / (1 - s), the central controller of the two-Riccati solution is
computed there and mapped back. The transform is an isometry for the
H-infinity norm, so gamma values carry over unchanged.
"""

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from src.errors import (
    AlgebraicLoop,
    DimensionMismatch,
    DomainMismatch,
    Infeasible,
    IterationDivergence,
    NoStabilizingSolution,
    NumericalFailure,
    PoleAtMinusOne,
    RegularityViolation,
    Unstable,
    ValidationError,
)
from src.lti import (
    GeneralizedPlant,
    StateSpace,
    hinf_norm,
    is_stable,
    spectral_radius,
    static_gain,
)

logger = logging.getLogger(__name__)

SIGN_MAX_ITER = 100
NEWTON_STEPS = 8
RESIDUAL_TOL = 1e-9
AXIS_TOL = 1e-8
REGULARITY_TOL = 1e-12
PSD_TOL = 1e-8
MAX_DOUBLINGS = 20


@dataclass(frozen=True, eq=False)
class Controller:
    """Digital canceler K(z) at the slow period h and the gamma it achieves."""

    K: StateSpace
    gamma_achieved: float
    iterations: int = 0
    residuals: tuple = (0.0, 0.0)

    @property
    def order(self) -> int:
        return self.K.n_states

    @property
    def h(self) -> float:
        return self.K.dt


@dataclass
class SynthesisReport:
    gamma_opt: float
    gamma_history: list = field(default_factory=list)
    closed_loop_radius: float = 0.0
    order: int = 0
    closed_loop_norm: float = 0.0
    residuals: tuple = (0.0, 0.0)
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "gamma_opt": self.gamma_opt,
            "gamma_history": [[g, bool(ok)] for g, ok in self.gamma_history],
            "closed_loop_radius": self.closed_loop_radius,
            "closed_loop_norm": self.closed_loop_norm,
            "order": self.order,
            "residuals": list(self.residuals),
            "iterations": self.iterations,
        }


# ======================================================================================= #
# RICCATI EQUATIONS #


def _reduce_cross_term(A, B, Q, R, S):
    """Eliminate the cross term: returns (Ā, G, Q̄) of ĀᵀX + XĀ - XGX + Q̄ = 0."""
    try:
        R_inv_Bt = np.linalg.solve(R, B.T)
        R_inv_St = np.linalg.solve(R, S.T)
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"Riccati weight R is singular: {e}") from e
    A_bar = A - B @ R_inv_St
    G = B @ R_inv_Bt
    Q_bar = Q - S @ R_inv_St
    return A_bar, 0.5 * (G + G.T), 0.5 * (Q_bar + Q_bar.T)


def _prepare(A, B, Q, R, S):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n, m = B.shape
    S = np.zeros((n, m)) if S is None else np.atleast_2d(np.asarray(S, dtype=float))
    if A.shape != (n, n) or Q.shape != (n, n) or R.shape != (m, m) or S.shape != (n, m):
        raise DimensionMismatch(
            f"Inconsistent Riccati data: A{A.shape}, B{B.shape}, Q{Q.shape}, "
            f"R{R.shape}, S{S.shape}"
        )
    return A, B, Q, R, S


def _care_residual(A_bar, G, Q_bar, X):
    return A_bar.T @ X + X @ A_bar - X @ G @ X + Q_bar


def riccati_residual(A, B, Q, R, S, X) -> float:
    """‖AᵀX + XA - (XB+S)R⁻¹(BᵀX+Sᵀ) + Q‖ / max(1, ‖Q‖)."""
    A, B, Q, R, S = _prepare(A, B, Q, R, S)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if A.size == 0:
        return 0.0
    XB_S = X @ B + S
    res = A.T @ X + X @ A - XB_S @ np.linalg.solve(R, XB_S.T) + Q
    return float(np.linalg.norm(res) / max(1.0, np.linalg.norm(Q)))


def _matrix_sign(H: np.ndarray):
    """Newton iteration Z <- (cZ + (cZ)⁻¹)/2 with determinant scaling."""
    dim = H.shape[0]
    Z = H.copy()
    scaled = True
    previous = math.inf
    for iteration in range(1, SIGN_MAX_ITER + 1):
        c = 1.0
        if scaled:
            sign, logdet = np.linalg.slogdet(Z)
            if sign == 0:
                raise NoStabilizingSolution("Hamiltonian became singular during iteration")
            c = math.exp(-logdet / dim)
        try:
            Z_next = 0.5 * (c * Z + np.linalg.inv(c * Z))
        except np.linalg.LinAlgError as e:
            raise IterationDivergence(f"Sign iteration hit a singular matrix: {e}") from e
        if not np.all(np.isfinite(Z_next)):
            raise IterationDivergence("Sign iteration overflowed")

        change = np.linalg.norm(Z_next - Z, 1) / max(np.linalg.norm(Z_next, 1), 1e-300)
        Z = Z_next
        if change <= 1e-12 or (change < 1e-6 and change >= previous):
            return Z, iteration
        if change < 1e-2:
            scaled = False
        previous = change

    raise IterationDivergence(f"Sign iteration did not converge in {SIGN_MAX_ITER} steps")


def solve_are(A, B, Q, R, S=None) -> np.ndarray:
    """
    Stabilizing solution of AᵀX + XA - (XB+S)R⁻¹(BᵀX+Sᵀ) + Q = 0.

    R only needs to be invertible (indefinite weights are allowed). The
    solution comes from the matrix sign function of the Hamiltonian, then a
    few Newton steps polish the residual.

    Raises:
        NoStabilizingSolution: Hamiltonian eigenvalues on the imaginary axis,
            or the computed closed loop is not Hurwitz.
        IterationDivergence: the sign iteration does not converge.
    """
    A, B, Q, R, S = _prepare(A, B, Q, R, S)
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))

    A_bar, G, Q_bar = _reduce_cross_term(A, B, Q, R, S)
    H = np.block([[A_bar, -G], [-Q_bar, -A_bar.T]])

    eigs = np.linalg.eigvals(H)
    if np.min(np.abs(eigs.real)) <= AXIS_TOL * max(1.0, np.linalg.norm(H, 1)):
        raise NoStabilizingSolution("Hamiltonian has eigenvalues on the imaginary axis")

    W, iterations = _matrix_sign(H)
    lhs = np.vstack([W[:n, n:], W[n:, n:] + np.eye(n)])
    rhs = -np.vstack([W[:n, :n] + np.eye(n), W[n:, :n]])
    X = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    X = 0.5 * (X + X.T)

    scale = max(1.0, np.linalg.norm(Q))
    error = np.linalg.norm(_care_residual(A_bar, G, Q_bar, X)) / scale
    for _ in range(NEWTON_STEPS):
        if error <= 1e-13:
            break
        closed = A_bar - G @ X
        try:
            delta = spla.solve_continuous_lyapunov(closed.T, -_care_residual(A_bar, G, Q_bar, X))
        except (np.linalg.LinAlgError, ValueError):
            break
        candidate = X + 0.5 * (delta + delta.T)
        candidate_error = np.linalg.norm(_care_residual(A_bar, G, Q_bar, candidate)) / scale
        if not candidate_error < error:
            break
        X, error = candidate, candidate_error

    if np.max(np.linalg.eigvals(A_bar - G @ X).real) >= 0.0:
        raise NoStabilizingSolution("Riccati solution is not stabilizing")
    if error > RESIDUAL_TOL:
        raise IterationDivergence(f"Riccati residual {error:.3e} after polishing")

    logger.debug(f"ARE solved: n={n}, sign iterations={iterations}, residual={error:.2e}")
    return X


# ======================================================================================= #
# BILINEAR TRANSFORM #


def bilinear_d2c_system(sys: StateSpace) -> StateSpace:
    """Discrete -> continuous under z = (1 + s) / (1 - s)."""
    if not sys.is_discrete:
        raise DomainMismatch("bilinear_d2c expects a discrete-time system")
    n = sys.n_states
    if n == 0:
        return StateSpace(sys.A, sys.B, sys.C, sys.D)

    eigs = np.linalg.eigvals(sys.A)
    if np.min(np.abs(eigs + 1.0)) <= 1e-9:
        raise PoleAtMinusOne("System has a pole at z = -1")

    shifted = sys.A + np.eye(n)
    inv_B = np.linalg.solve(shifted, sys.B)
    inv_A = np.linalg.solve(shifted, sys.A - np.eye(n))
    C_inv = np.linalg.solve(shifted.T, sys.C.T).T
    root2 = math.sqrt(2.0)
    return StateSpace(inv_A, root2 * inv_B, root2 * C_inv, sys.D - sys.C @ inv_B)


def bilinear_c2d_system(sys: StateSpace, dt: float) -> StateSpace:
    """Continuous -> discrete with period ``dt``, inverse of bilinear_d2c_system."""
    if sys.is_discrete:
        raise DomainMismatch("bilinear_c2d expects a continuous-time system")
    n = sys.n_states
    if n == 0:
        return StateSpace(sys.A, sys.B, sys.C, sys.D, dt)

    eigs = np.linalg.eigvals(sys.A)
    if np.min(np.abs(eigs - 1.0)) <= 1e-9:
        raise PoleAtMinusOne("Continuous system has a pole at s = 1 (z = infinity)")

    shifted = np.eye(n) - sys.A
    inv_B = np.linalg.solve(shifted, sys.B)
    inv_A = np.linalg.solve(shifted, np.eye(n) + sys.A)
    C_inv = np.linalg.solve(shifted.T, sys.C.T).T
    root2 = math.sqrt(2.0)
    return StateSpace(inv_A, root2 * inv_B, root2 * C_inv, sys.D + sys.C @ inv_B, dt)


def bilinear_d2c(plant: GeneralizedPlant) -> GeneralizedPlant:
    return GeneralizedPlant(
        sys=bilinear_d2c_system(plant.sys), nw=plant.nw, nu=plant.nu, nz=plant.nz, ny=plant.ny
    )


def bilinear_c2d_ctrl(K_cont: StateSpace, dt: float, gamma: float = 0.0) -> Controller:
    return Controller(K=bilinear_c2d_system(K_cont, dt), gamma_achieved=gamma)


# ======================================================================================= #
# CLOSED LOOP #


def close_lft(plant: GeneralizedPlant, K) -> StateSpace:
    """
    Lower LFT: the w -> z closed loop with u = K y.

    Raises:
        AlgebraicLoop: I - D22 D_K is singular.
    """
    Ks = K.K if isinstance(K, Controller) else K
    sys = plant.sys
    if sys.is_discrete != Ks.is_discrete:
        raise DomainMismatch(f"Cannot close {sys!r} with controller {Ks!r}")
    if Ks.n_inputs != plant.ny or Ks.n_outputs != plant.nu:
        raise DimensionMismatch(
            f"Controller is {Ks.n_outputs}x{Ks.n_inputs}, plant needs {plant.nu}x{plant.ny}"
        )

    A, B1, B2 = sys.A, plant.b1, plant.b2
    C1, C2 = plant.c1, plant.c2
    D11, D12, D21, D22 = plant.d11, plant.d12, plant.d21, plant.d22
    Ak, Bk, Ck, Dk = Ks.A, Ks.B, Ks.C, Ks.D

    loop = np.eye(plant.ny) - D22 @ Dk
    if np.linalg.cond(loop) > 1.0 / np.finfo(float).eps:
        raise AlgebraicLoop("I - D22 Dk is singular: the interconnection is ill-posed")
    Delta = np.linalg.inv(loop)
    Yx, Yk, Yw = Delta @ C2, Delta @ D22 @ Ck, Delta @ D21

    A_cl = np.block([[A + B2 @ Dk @ Yx, B2 @ (Ck + Dk @ Yk)], [Bk @ Yx, Ak + Bk @ Yk]])
    B_cl = np.vstack([B1 + B2 @ Dk @ Yw, Bk @ Yw])
    C_cl = np.hstack([C1 + D12 @ Dk @ Yx, D12 @ (Ck + Dk @ Yk)])
    D_cl = D11 + D12 @ Dk @ Yw
    return StateSpace(A_cl, B_cl, C_cl, D_cl, sys.dt)


# ======================================================================================= #
# CENTRAL CONTROLLER #


@dataclass(frozen=True, eq=False)
class _NormalizedPlant:
    """Continuous plant with D22 = 0, D12 = [0; I], D21 = [0 I] plus the undo data."""

    plant: GeneralizedPlant
    S_inv: np.ndarray
    T_inv: np.ndarray
    d22: np.ndarray


def _sigma_bar(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size == 0:
        return np.zeros((a.shape[1], b.shape[1]))
    return np.linalg.solve(a, b)


def _normalize(plant: GeneralizedPlant) -> _NormalizedPlant:
    """
    Loop-shift D22 away, then rotate and scale so that D12 = [0; I] and
    D21 = [0 I].

    Raises:
        RegularityViolation: D12 lacks full column rank or D21 full row rank.
    """
    nw, nu, nz, ny = plant.nw, plant.nu, plant.nz, plant.ny
    if nu > nz or ny > nw:
        raise RegularityViolation(
            f"Need nz >= nu and nw >= ny (nz={nz}, nu={nu}, nw={nw}, ny={ny})"
        )

    U0, s12, V0t = np.linalg.svd(plant.d12, full_matrices=True)
    if nu and s12.min() <= REGULARITY_TOL * max(1.0, s12.max()):
        raise RegularityViolation("D12 does not have full column rank")
    U1, s21, V1t = np.linalg.svd(plant.d21, full_matrices=True)
    if ny and s21.min() <= REGULARITY_TOL * max(1.0, s21.max()):
        raise RegularityViolation("D21 does not have full row rank (raise meas_reg)")

    U = np.hstack([U0[:, nu:], U0[:, :nu]])
    S = np.diag(s12) @ V0t
    V1 = V1t.T
    V = np.hstack([V1[:, ny:], V1[:, :ny]])
    T = U1 @ np.diag(s21)
    S_inv, T_inv = np.linalg.inv(S), np.linalg.inv(T)

    A = plant.sys.A
    B = np.hstack([plant.b1 @ V, plant.b2 @ S_inv])
    C = np.vstack([U.T @ plant.c1, T_inv @ plant.c2])
    D12 = np.vstack([np.zeros((nz - nu, nu)), np.eye(nu)])
    D21 = np.hstack([np.zeros((ny, nw - ny)), np.eye(ny)])
    D = np.block([[U.T @ plant.d11 @ V, D12], [D21, np.zeros((ny, nu))]])

    normalized = GeneralizedPlant(sys=StateSpace(A, B, C, D), nw=nw, nu=nu, nz=nz, ny=ny)
    return _NormalizedPlant(normalized, S_inv, T_inv, plant.d22.copy())


def _d11_partition(plant: GeneralizedPlant):
    rows, cols = plant.nz - plant.nu, plant.nw - plant.ny
    D11 = plant.d11
    return D11[:rows, :cols], D11[:rows, cols:], D11[rows:, :cols], D11[rows:, cols:]


def _gamma_floor(plant: GeneralizedPlant) -> float:
    D1111, D1112, D1121, _ = _d11_partition(plant)
    return max(
        _sigma_bar(np.hstack([D1111, D1112])),
        _sigma_bar(np.hstack([D1111.T, D1121.T])),
    )


def _check_psd(X: np.ndarray, name: str, gamma: float):
    if X.size and np.linalg.eigvalsh(X).min() < -PSD_TOL * max(1.0, np.linalg.norm(X, 2)):
        raise Infeasible(f"gamma={gamma:.6g}: {name} is not positive semidefinite")


def _central_controller(norm: _NormalizedPlant, gamma: float):
    """
    Central controller of the normalized continuous plant at level gamma.

    Returns (K, (residual_X, residual_Y)).

    Raises:
        Infeasible: gamma is not achievable.
    """
    plant = norm.plant
    p1, m1, m2, p2 = plant.nz, plant.nw, plant.nu, plant.ny
    n = plant.sys.n_states
    A, B1, B2 = plant.sys.A, plant.b1, plant.b2
    C1, C2 = plant.c1, plant.c2
    D11, D12, D21 = plant.d11, plant.d12, plant.d21
    D1111, D1112, D1121, D1122 = _d11_partition(plant)

    if gamma <= _gamma_floor(plant):
        raise Infeasible(f"gamma={gamma:.6g} is below the feedthrough bound")

    g2 = gamma * gamma
    B = np.hstack([B1, B2])
    C = np.vstack([C1, C2])
    D1_ = np.hstack([D11, D12])
    D_1 = np.vstack([D11, D21])

    R = D1_.T @ D1_
    R[:m1, :m1] -= g2 * np.eye(m1)
    Rt = D_1 @ D_1.T
    Rt[:p1, :p1] -= g2 * np.eye(p1)

    X_data = (A, B, C1.T @ C1, R, C1.T @ D1_)
    Y_data = (A.T, C.T, B1 @ B1.T, Rt, B1 @ D_1.T)
    X = solve_are(*X_data)
    Y = solve_are(*Y_data)
    _check_psd(X, "X", gamma)
    _check_psd(Y, "Y", gamma)
    if n and spectral_radius(X @ Y) >= g2:
        raise Infeasible(f"gamma={gamma:.6g}: coupling condition rho(XY) < gamma^2 fails")

    F = -np.linalg.solve(R, D1_.T @ C1 + B.T @ X)
    F12, F2 = F[m1 - p2 : m1], F[m1:]
    L = -np.linalg.solve(Rt, (B1 @ D_1.T + Y @ C.T).T).T
    L12, L2 = L[:, p1 - m2 : p1], L[:, p1:]

    row_gap = g2 * np.eye(p1 - m2) - D1111 @ D1111.T
    col_gap = g2 * np.eye(m1 - p2) - D1111.T @ D1111
    D11_hat = -D1121 @ D1111.T @ _solve(row_gap, D1112) - D1122
    try:
        D12_hat = np.linalg.cholesky(np.eye(m2) - D1121 @ _solve(col_gap, D1121.T))
        D21_hat = np.linalg.cholesky(np.eye(p2) - D1112.T @ _solve(row_gap, D1112)).T
    except np.linalg.LinAlgError:
        raise Infeasible(f"gamma={gamma:.6g}: feedthrough factorization fails") from None

    Z = np.linalg.inv(np.eye(n) - Y @ X / g2)
    B2_hat = Z @ (B2 + L12) @ D12_hat
    C2_hat = -D21_hat @ (C2 + F12)
    B1_hat = -Z @ L2 + B2_hat @ np.linalg.solve(D12_hat, D11_hat)
    D21_inv_C2 = np.linalg.solve(D21_hat, C2_hat)
    C1_hat = F2 + D11_hat @ D21_inv_C2
    A_hat = A + B @ F + B1_hat @ D21_inv_C2

    K = StateSpace(A_hat, B1_hat, C1_hat, D11_hat)
    if not is_stable(close_lft(plant, K)):
        raise Infeasible(f"gamma={gamma:.6g}: central controller does not stabilize")

    residuals = (riccati_residual(*X_data, X), riccati_residual(*Y_data, Y))
    return K, residuals


def _restore(norm: _NormalizedPlant, K: StateSpace) -> StateSpace:
    """Undo the scalings, then the D22 loop shift."""
    Ak = K.A
    Bk = K.B @ norm.T_inv
    Ck = norm.S_inv @ K.C
    Dk = norm.S_inv @ K.D @ norm.T_inv

    d22 = norm.d22
    if not np.any(d22):
        return StateSpace(Ak, Bk, Ck, Dk)
    try:
        Omega = np.linalg.inv(np.eye(Dk.shape[0]) + Dk @ d22)
    except np.linalg.LinAlgError as e:
        raise AlgebraicLoop(f"I + Dk D22 is singular: {e}") from e
    return StateSpace(
        Ak - Bk @ d22 @ Omega @ Ck,
        Bk @ (np.eye(d22.shape[0]) - d22 @ Omega @ Dk),
        Omega @ Ck,
        Omega @ Dk,
    )


# ======================================================================================= #
# SYNTHESIS #


def _try_gamma(norm: _NormalizedPlant, gamma: float, dt: float):
    """Returns (controller or None, residuals)."""
    try:
        K_cont, residuals = _central_controller(norm, gamma)
        K = bilinear_c2d_system(_restore(norm, K_cont), dt)
    except (Infeasible, NumericalFailure, np.linalg.LinAlgError) as e:
        logger.debug(f"gamma={gamma:.6g} infeasible: {e}")
        return None, None
    return K, residuals


def synthesize(plant: GeneralizedPlant, gamma_tol: float = 1e-3, stable_controller: bool = False):
    """
    Smallest achievable gamma within ``gamma_tol`` (relative) and its central
    controller.

    Args:
        plant: discrete generalized plant.
        gamma_tol: relative width of the final bisection bracket.
        stable_controller: additionally require K itself to be stable.

    Returns:
        (Controller, SynthesisReport)

    Raises:
        Infeasible: no gamma below the search ceiling works.
        RegularityViolation: D12/D21 rank conditions fail.
        Unstable: the returned loop or controller fails verification.
    """
    if not plant.sys.is_discrete:
        raise DomainMismatch("synthesize expects a discrete-time plant")
    if not 0.0 < gamma_tol < 0.5:
        raise ValidationError(f"gamma_tol must lie in (0, 0.5), got {gamma_tol}")
    dt = plant.sys.dt

    zero_K = static_gain(np.zeros((plant.nu, plant.ny)), dt)
    open_norm = math.inf
    if is_stable(plant.sys):
        open_norm = hinf_norm(close_lft(plant, zero_K))
        if open_norm <= 1e-14:
            logger.info("w -> z path is identically zero: K = 0 is optimal")
            report = SynthesisReport(
                gamma_opt=0.0,
                closed_loop_radius=spectral_radius(plant.sys.A),
                order=0,
            )
            return Controller(K=zero_K, gamma_achieved=0.0), report

    norm = _normalize(bilinear_d2c(plant))
    floor = _gamma_floor(norm.plant)
    history = []
    attempts = 0

    def attempt(gamma):
        nonlocal attempts
        attempts += 1
        K, residuals = _try_gamma(norm, gamma, dt)
        feasible = K is not None and (not stable_controller or is_stable(K))
        history.append((gamma, feasible))
        logger.info(f"attempt {attempts}: gamma={gamma:.6g} feasible={feasible}")
        return (K, residuals) if feasible else None

    hi = 1.05 * max(open_norm, floor) if math.isfinite(open_norm) else max(1.0, 2.0 * floor)
    best = attempt(hi)
    doublings = 0
    while best is None:
        if doublings >= MAX_DOUBLINGS:
            raise Infeasible(f"No feasible gamma up to {hi:.6g}: check the plant model")
        hi *= 2.0
        doublings += 1
        best = attempt(hi)

    lo = floor
    while hi - lo > gamma_tol * hi:
        mid = 0.5 * (lo + hi)
        found = attempt(mid)
        if found is None:
            lo = mid
        else:
            hi, best = mid, found

    history.sort()
    first_feasible = next(i for i, (_, ok) in enumerate(history) if ok)
    if not all(ok for _, ok in history[first_feasible:]):
        logger.warning("Feasibility along the gamma history is not monotone")

    K, residuals = best
    closed = close_lft(plant, K)
    radius = spectral_radius(closed.A)
    if radius >= 1.0:
        raise Unstable(f"gamma={hi:.6g}: closed-loop spectral radius {radius:.6g} >= 1")
    if stable_controller and not is_stable(K):
        raise Unstable(f"gamma={hi:.6g}: controller is not stable")

    closed_norm = hinf_norm(closed)
    if closed_norm > hi * (1.0 + 10.0 * gamma_tol):
        logger.warning(
            f"A-posteriori norm {closed_norm:.6g} exceeds gamma {hi:.6g} beyond tolerance"
        )

    logger.info(
        f"Synthesis done: gamma={hi:.6g}, order={K.n_states}, attempts={attempts}, "
        f"closed-loop radius={radius:.6g}"
    )
    controller = Controller(K=K, gamma_achieved=hi, iterations=attempts, residuals=residuals)
    report = SynthesisReport(
        gamma_opt=hi,
        gamma_history=history,
        closed_loop_radius=radius,
        order=K.n_states,
        closed_loop_norm=closed_norm,
        residuals=residuals,
        iterations=attempts,
    )
    return controller, report


# ======================================================================================= #
# EXPORT #


def _matrix_text(M: np.ndarray) -> str:
    rows = (", ".join(format(float(v), ".17g") for v in row) for row in M)
    return "[" + ", ".join(f"[{row}]" for row in rows) + "]"


def controller_to_json(controller: Controller) -> str:
    K = controller.K
    parts = [f'"h": {format(float(K.dt), ".17g")}']
    for key in ("A", "B", "C", "D"):
        parts.append(f'"{key}": {_matrix_text(getattr(K, key))}')
    parts.append(f'"gamma": {format(float(controller.gamma_achieved), ".17g")}')
    return "{" + ", ".join(parts) + "}\n"


def controller_from_json(text: str) -> Controller:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"Controller file is not valid JSON: {e}") from e

    missing = {"h", "A", "B", "C", "D", "gamma"} - set(doc)
    if missing:
        raise ValidationError(f"Controller file lacks keys: {sorted(missing)}")

    D = np.atleast_2d(np.asarray(doc["D"], dtype=float))
    p, m = D.shape
    n = len(doc["A"])
    K = StateSpace(
        np.asarray(doc["A"], dtype=float).reshape(n, n),
        np.asarray(doc["B"], dtype=float).reshape(n, m),
        np.asarray(doc["C"], dtype=float).reshape(p, n),
        D,
        float(doc["h"]),
    )
    return Controller(K=K, gamma_achieved=float(doc["gamma"]))
