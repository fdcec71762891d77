import sys
import os

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import math

import numpy as np
import pytest
from scipy.stats import ortho_group

from src.discretize import (
    DelaySpec,
    c2d_zoh,
    delay_decompose,
    lift,
    lifted_delay,
    selectors,
)
from src.errors import (
    DimensionMismatch,
    DomainMismatch,
    GridMismatch,
    IndexOutOfRange,
    NonRepresentableDelay,
)
from src.lti import StateSpace, from_tf, hinf_norm, response, series


def random_stable_siso(rng, n: int = 3, h: float = 1.0) -> StateSpace:
    """Fast-rate discrete SISO system from a random stable continuous one."""
    Q = ortho_group.rvs(n, random_state=rng) if n > 1 else np.eye(1)
    A = -Q @ np.diag(rng.uniform(0.2, 3.0, n)) @ Q.T
    B, C = rng.standard_normal((n, 1)), rng.standard_normal((1, n))
    return c2d_zoh(StateSpace(A, B, C, [[0.0]]), h)


class TestC2dZoh:

    def test_first_order_oracle(self):
        """A=-1, B=0.25 at h=1 gives (e^-1, 0.25(1 - e^-1))"""
        discrete = c2d_zoh(StateSpace([[-1.0]], [[0.25]], [[1.0]], [[0.0]]), 1.0)
        assert abs(discrete.A[0, 0] - math.exp(-1.0)) < 1e-12
        assert abs(discrete.B[0, 0] - 0.25 * (1 - math.exp(-1.0))) < 1e-12
        assert discrete.dt == 1.0

    def test_eigenvalue_mapping(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            Q = ortho_group.rvs(n, random_state=rng) if n > 1 else np.eye(1)
            poles = -rng.uniform(0.05, 5.0, n)
            A = Q @ np.diag(poles) @ Q.T
            h = float(rng.uniform(0.1, 2.0))
            discrete = c2d_zoh(StateSpace(A, np.ones((n, 1)), np.ones((1, n)), [[0.0]]), h)
            mapped = np.sort(np.linalg.eigvals(discrete.A).real)
            np.testing.assert_allclose(mapped, np.sort(np.exp(h * poles)), atol=1e-10)

    def test_static_system(self):
        discrete = c2d_zoh(from_tf([2.5], [1]), 0.5)
        assert discrete.n_states == 0
        assert discrete.D[0, 0] == 2.5
        assert discrete.dt == 0.5

    def test_preserves_dc_gain(self):
        discrete = c2d_zoh(from_tf([0.25], [1, 1]), 1.0 / 16)
        np.testing.assert_allclose(discrete.dc_gain(), [[0.25]], rtol=1e-12)

    def test_rejects_discrete(self):
        with pytest.raises(DomainMismatch):
            c2d_zoh(StateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]], dt=1.0), 1.0)


class TestLift:

    @pytest.mark.parametrize("N", [2, 4, 8])
    def test_io_matches_rearranged_fast_rate(self, N):
        rng = np.random.default_rng(N)
        for _ in range(50):
            fast = random_stable_siso(rng, n=int(rng.integers(1, 5)))
            u = rng.standard_normal(8 * N)
            y_fast = response(fast, u)[:, 0]
            y_lifted = response(lift(fast, N), u.reshape(8, N))
            scale = max(1.0, np.abs(y_fast).max())
            np.testing.assert_allclose(y_lifted.reshape(-1), y_fast, atol=1e-12 * scale)

    @pytest.mark.parametrize("N", [2, 4, 8])
    def test_preserves_hinf_norm(self, N):
        rng = np.random.default_rng(100 + N)
        for _ in range(50):
            fast = random_stable_siso(rng)
            assert hinf_norm(lift(fast, N)) == pytest.approx(hinf_norm(fast), rel=1e-4)

    def test_lift_commutes_with_series(self):
        rng = np.random.default_rng(3)
        first, second = random_stable_siso(rng), random_stable_siso(rng)
        N = 4
        combined = lift(series(first, second), N)
        chained = series(lift(first, N), lift(second, N))
        for theta in (0.0, 0.4, 1.3, 3.0):
            q = np.exp(1j * theta)
            np.testing.assert_allclose(combined.evaluate(q), chained.evaluate(q), atol=1e-10)

    def test_lifted_period(self):
        lifted = lift(c2d_zoh(from_tf([1], [1, 1]), 1.0 / 16), 16)
        assert lifted.dt == pytest.approx(1.0)
        assert (lifted.n_inputs, lifted.n_outputs) == (16, 16)

    def test_rejects_bad_factor(self):
        with pytest.raises(DimensionMismatch):
            lift(StateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]], dt=1.0), 0)


class TestDelay:

    def test_whole_periods(self):
        spec = delay_decompose(1.0, 1.0, 16)
        assert (spec.m, spec.k) == (1, 0)

    def test_fractional(self):
        spec = delay_decompose(1.25, 1.0, 16)
        assert (spec.m, spec.k) == (1, 4)
        assert abs((spec.m + spec.k / spec.N) * spec.h - 1.25) < 1e-9

    def test_zero_delay(self):
        spec = delay_decompose(0.0, 1.0, 16)
        assert (spec.m, spec.k) == (0, 0)

    def test_not_representable(self):
        with pytest.raises(NonRepresentableDelay, match="nearest representable"):
            delay_decompose(0.3, 1.0, 16)

    def test_spec_validates_itself(self):
        with pytest.raises(NonRepresentableDelay):
            DelaySpec(L=1.0, h=1.0, N=16, m=0, k=3)

    def test_fast_steps(self):
        assert delay_decompose(1.25, 1.0, 16).fast_steps(64) == 80

    def test_fast_steps_off_grid(self):
        with pytest.raises(GridMismatch):
            delay_decompose(0.5, 1.0, 2).fast_steps(3)


class TestSelectors:

    def test_shapes_and_entries(self):
        H_N, S_N, S_Nk = selectors(4, 2)
        np.testing.assert_array_equal(H_N, np.ones((4, 1)))
        np.testing.assert_array_equal(S_N, [[1.0, 0.0, 0.0, 0.0]])
        np.testing.assert_array_equal(S_Nk, [[0.0, 0.0, 1.0, 0.0]])

    def test_sample_of_hold_is_identity(self):
        H_N, S_N, _ = selectors(16, 0)
        np.testing.assert_array_equal(S_N @ H_N, [[1.0]])

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            selectors(4, 4)


class TestLiftedDelay:

    def test_zero_delay_is_identity(self):
        delay = lifted_delay(0, 3)
        assert delay.n_states == 0
        np.testing.assert_array_equal(delay.D, np.eye(3))

    def test_one_period_memory(self):
        delay = lifted_delay(1, 16)
        assert delay.n_states == 16
        np.testing.assert_array_equal(delay.A, np.zeros((16, 16)))
        np.testing.assert_array_equal(delay.B, np.eye(16))
        np.testing.assert_array_equal(delay.C, np.eye(16))
        np.testing.assert_array_equal(delay.D, np.zeros((16, 16)))

    def test_two_step_chain(self):
        delay = lifted_delay(2, 1)
        assert delay.n_states == 2
        np.testing.assert_allclose(delay.evaluate(2.0), [[0.25]])
        np.testing.assert_allclose(response(delay, [1.0, 0.0, 0.0, 0.0])[:, 0], [0, 0, 1, 0])

    def test_period_argument(self):
        assert lifted_delay(3, 1, dt=1.0 / 16).dt == pytest.approx(1.0 / 16)
