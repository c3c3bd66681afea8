import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rti.tracking import (
    InvalidStateError,
    KalmanParams,
    KalmanTracker,
    TrackState,
    error_cdf,
    kalman_init,
    kalman_step,
    read_trajectory,
    rmse,
    write_trajectory,
)


class ReferenceFilter:
    """Independent textbook constant-velocity filter (explicit inverses,
    Joseph-form covariance update)."""

    def __init__(self, z0, q, r, dt=1.0):
        self.x = np.array([z0[0], z0[1], 0.0, 0.0])
        self.P = np.eye(4) * 10.0
        self.F = np.array(
            [[1, 0, dt, 0], [0, 1, 0, dt], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=float
        )
        self.Q = q * np.array(
            [
                [dt**4 / 4, 0, dt**3 / 2, 0],
                [0, dt**4 / 4, 0, dt**3 / 2],
                [dt**3 / 2, 0, dt**2, 0],
                [0, dt**3 / 2, 0, dt**2],
            ]
        )
        self.H = np.array([[1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)
        self.R = r * np.eye(2)

    def step(self, z):
        x = self.F @ self.x
        P = self.F @ self.P @ self.F.T + self.Q
        y = np.asarray(z) - self.H @ x
        S = self.H @ P @ self.H.T + self.R
        K = P @ self.H.T @ np.linalg.inv(S)
        self.x = x + K @ y
        ImKH = np.eye(4) - K @ self.H
        self.P = ImKH @ P @ ImKH.T + K @ self.R @ K.T  # Joseph form
        return self.x[:2].copy()


# ----------------------------------------------------------------- kalman


def test_init_uses_first_measurement():
    state = kalman_init((2.0, 3.0), time=5)
    assert state.position == (2.0, 3.0)
    assert state.mean[2] == 0.0 and state.mean[3] == 0.0
    assert np.array_equal(state.cov, 10.0 * np.eye(4))


def test_static_measurement_convergence():
    params = KalmanParams(q=0.0, r=1e-9)
    state = kalman_init((0.0, 0.0))
    target = (4.0, -2.0)
    for _ in range(50):
        state = kalman_step(state, target, params)
    assert state.position[0] == pytest.approx(target[0], abs=1e-6)
    assert state.position[1] == pytest.approx(target[1], abs=1e-6)


def test_huge_r_ignores_measurements():
    params = KalmanParams(q=0.01, r=1e12)
    state = kalman_init((1.0, 1.0))
    rng = np.random.default_rng(7)
    for _ in range(20):
        state = kalman_step(state, rng.normal(50.0, 1.0, size=2), params)
    # Prediction from a zero-velocity start stays near the initial position.
    assert abs(state.position[0] - 1.0) < 0.1
    assert abs(state.position[1] - 1.0) < 0.1


def test_matches_reference_filter():
    rng = np.random.default_rng(11)
    z0 = rng.normal(0, 1, 2)
    params = KalmanParams(q=0.05, r=0.5)
    ref = ReferenceFilter(z0, q=params.q, r=params.r)
    state = kalman_init(z0)
    for _ in range(100):
        z = rng.normal(0, 1, 2) + np.array([3.0, -1.0])
        expected = ref.step(z)
        state = kalman_step(state, z, params)
        assert np.max(np.abs(np.array(state.position) - expected)) < 1e-9
    assert np.max(np.abs(state.cov - ref.P)) < 1e-9


def test_covariance_stays_spd_along_run():
    rng = np.random.default_rng(13)
    state = kalman_init((0.0, 0.0))
    params = KalmanParams()
    for _ in range(200):
        state = kalman_step(state, rng.normal(0, 2, 2), params)
        assert np.max(np.abs(state.cov - state.cov.T)) <= 1e-9
        np.linalg.cholesky(state.cov)  # raises if not positive definite


def test_invalid_state_rejected():
    bad_cov = np.eye(4)
    bad_cov[0, 1] = 0.5  # asymmetric
    with pytest.raises(InvalidStateError):
        TrackState(time=0, mean=np.zeros(4), cov=bad_cov)
    neg = np.eye(4)
    neg[2, 2] = -1.0
    with pytest.raises(InvalidStateError):
        TrackState(time=0, mean=np.zeros(4), cov=neg)


def test_params_validation():
    with pytest.raises(ValueError):
        KalmanParams(q=-0.1)
    with pytest.raises(ValueError):
        KalmanParams(r=0.0)


def test_tracker_smooths_noisy_measurements():
    rng = np.random.default_rng(17)
    ticks = 120
    truth = np.column_stack([np.linspace(0, 6, ticks), np.linspace(0, 3, ticks)])
    measurements = truth + rng.normal(0, 0.6, size=(ticks, 2))
    tracker = KalmanTracker(KalmanParams(q=0.05, r=0.5))
    estimates = np.array([tracker.update(m, t) for t, m in enumerate(measurements)])
    assert rmse(estimates, truth) < rmse(measurements, truth)


# ------------------------------------------------------------------ rmse


def test_rmse_zero_for_exact_estimates():
    truth = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    assert rmse(truth, truth) == 0.0


def test_rmse_constant_offset_is_the_offset():
    truth = np.zeros((7, 2))
    estimates = truth + np.array([1.0, 0.0])
    assert rmse(estimates, truth) == pytest.approx(1.0)


def test_rmse_mixed_errors():
    truth = np.zeros((2, 2))
    estimates = np.array([[0.0, 0.0], [2.0, 0.0]])  # errors 0 and 2
    assert rmse(estimates, truth) == pytest.approx(math.sqrt(2.0))


def test_rmse_window_is_half_open():
    truth = np.zeros((4, 2))
    estimates = np.array([[9.0, 0.0], [1.0, 0.0], [1.0, 0.0], [9.0, 0.0]])
    assert rmse(estimates, truth, window=(1, 3)) == pytest.approx(1.0)


def test_rmse_rejects_empty_window():
    truth = np.zeros((3, 2))
    with pytest.raises(ValueError):
        rmse(truth, truth, window=(2, 2))
    with pytest.raises(ValueError):
        rmse(truth, truth, window=(1, 9))


def test_rmse_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        rmse(np.zeros((3, 2)), np.zeros((4, 2)))


@given(st.lists(st.floats(min_value=0, max_value=10), min_size=1, max_size=30))
def test_rmse_at_least_mean_error(errors):
    truth = np.zeros((len(errors), 2))
    estimates = np.column_stack([np.array(errors), np.zeros(len(errors))])
    assert rmse(estimates, truth) >= np.mean(errors) - 1e-9


# ------------------------------------------------------------------- cdf


def test_cdf_simple_counts():
    rows = error_cdf([0.1, 0.2, 0.3, 0.4], levels=[0.25])
    assert rows == [(0.25, 0.5)]


def test_cdf_reaches_one_at_max():
    errors = [0.5, 1.0, 2.0]
    rows = error_cdf(errors, levels=[2.0])
    assert rows[0][1] == 1.0


def test_cdf_matches_sort_oracle():
    rng = np.random.default_rng(19)
    errors = rng.exponential(0.8, size=200)
    levels = np.linspace(0.1, 3.0, 30)
    rows = error_cdf(errors, levels)
    sorted_err = np.sort(errors)
    for level, fraction in rows:
        expected = np.searchsorted(sorted_err, level, side="right") / errors.size
        assert fraction == pytest.approx(expected)


@given(st.lists(st.floats(min_value=0, max_value=5), min_size=1, max_size=50))
def test_cdf_monotone_in_level(errors):
    levels = [0.5, 1.0, 1.5, 2.0, 2.5]
    rows = error_cdf(errors, levels)
    fractions = [f for _, f in rows]
    assert all(a <= b + 1e-12 for a, b in zip(fractions, fractions[1:]))


# --------------------------------------------------------------- file io


def test_trajectory_round_trip(tmp_path):
    rows = [
        (0, 1.0, 2.0, 1.1, 2.1, math.hypot(0.1, 0.1)),
        (1, 1.5, 2.5, 1.4, 2.4, math.hypot(0.1, 0.1)),
    ]
    path = tmp_path / "trajectory.csv"
    write_trajectory(path, rows)
    back = read_trajectory(path)
    assert len(back) == 2
    for original, parsed in zip(rows, back):
        assert parsed[0] == original[0]
        assert parsed[1:] == pytest.approx(original[1:])


def test_trajectory_header_enforced(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("tick,x,y\n0,1,2\n")
    with pytest.raises(ValueError):
        read_trajectory(path)
