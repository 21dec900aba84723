import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smctrack.errors import DegenerateFilterError, ValidationError
from smctrack.geometry import BoundingBox, iou
from smctrack.motion import (KalmanState, MotionNoiseConfig, kf_initiate, kf_predict, kf_update,
                             state_to_box)

coord = st.floats(-500, 500, allow_nan=False)
size = st.floats(1, 300, allow_nan=False)
boxes = st.builds(BoundingBox, coord, coord, size, size)


def test_initiate_mean():
    s = kf_initiate(BoundingBox(0, 0, 10, 20))
    np.testing.assert_array_equal(s.mean, [5, 10, 0.5, 20, 0, 0, 0, 0])


def test_initiate_covariance_reference():
    # reference scaling: position std 2*h/20, velocity std 10*h/160; aspect terms fixed
    h = 20.0
    std = [2 * h / 20, 2 * h / 20, 1e-2, 2 * h / 20, 10 * h / 160, 10 * h / 160, 1e-5, 10 * h / 160]
    s = kf_initiate(BoundingBox(3, 4, 10, h))
    np.testing.assert_allclose(s.covariance, np.diag(np.square(std)), rtol=1e-15)


def test_noise_factors_must_be_positive():
    with pytest.raises(ValidationError):
        MotionNoiseConfig(0.0, 0.1)
    with pytest.raises(ValidationError):
        MotionNoiseConfig(0.1, -1.0)


@given(boxes)
def test_zero_velocity_predict_keeps_box(b):
    out = state_to_box(kf_predict(kf_initiate(b)))
    np.testing.assert_allclose(out.to_tlwh(), b.to_tlwh(), atol=1e-9)


def test_predict_one_step():
    s = KalmanState(np.array([5, 10, 0.5, 20, 1, 2, 0, 0.0]), np.eye(8))
    np.testing.assert_array_equal(kf_predict(s).mean[:4], [6, 12, 0.5, 20])


def test_predict_twice_zero_velocity_fixed_point():
    s = kf_initiate(BoundingBox(0, 0, 10, 20))
    np.testing.assert_array_equal(kf_predict(kf_predict(s)).mean[:4], s.mean[:4])


@given(boxes, st.integers(0, 2**31 - 1))
def test_trace_grows_without_updates(b, seed):
    rng = np.random.default_rng(seed)
    s = kf_initiate(b)
    s = KalmanState(s.mean + np.r_[np.zeros(4), rng.normal(0, 1, 4) * [1, 1, 0, 0]], s.covariance)
    traces = []
    for _ in range(10):
        s = kf_predict(s)
        traces.append(np.trace(s.covariance))
    assert all(b > a for a, b in zip(traces, traces[1:]))


def test_zero_innovation_keeps_position():
    s = kf_predict(kf_initiate(BoundingBox(0, 0, 10, 20)))
    post = kf_update(s, state_to_box(s))
    np.testing.assert_allclose(post.mean[:4], s.mean[:4], atol=1e-12)


@given(boxes, boxes)
def test_update_contracts_trace_and_stays_symmetric(a, b):
    prior = kf_predict(kf_initiate(a))
    post = kf_update(prior, b)
    assert np.trace(post.covariance) <= np.trace(prior.covariance)
    assert np.max(np.abs(post.covariance - post.covariance.T)) < 1e-9
    assert np.all(np.linalg.eigvalsh(post.covariance) > -1e-9)


def _straight_line(frames=20, v=(3.0, 1.5)):
    return [BoundingBox(100 + v[0] * t, 50 + v[1] * t, 40, 100) for t in range(frames)]


def test_constant_velocity_center_within_half_pixel_after_ten_cycles():
    truth = _straight_line(12)
    s = kf_initiate(truth[0])
    for t in range(1, 11):
        s = kf_update(kf_predict(s), truth[t])
    pred = state_to_box(kf_predict(s))
    assert np.hypot(*(np.subtract(pred.center, truth[11].center))) < 0.5


def test_noiseless_target_iou_from_frame_five():
    truth = _straight_line(20)
    s = kf_initiate(truth[0])
    for t in range(1, 20):
        s = kf_predict(s)
        if t >= 5:
            assert iou(state_to_box(s), truth[t]) >= 0.9
        s = kf_update(s, truth[t])


def test_singular_innovation_raises():
    s = KalmanState(np.array([0, 0, 1, 0.0, 0, 0, 0, 0]), np.zeros((8, 8)))
    with pytest.raises(DegenerateFilterError):
        kf_update(s, BoundingBox(0, 0, 1, 1))


@pytest.mark.parametrize("a,h", [(0.0, 10.0), (0.5, 0.0), (-1.0, 5.0)])
def test_state_to_box_rejects_degenerate(a, h):
    with pytest.raises(DegenerateFilterError):
        state_to_box(KalmanState(np.array([5, 5, a, h, 0, 0, 0, 0.0]), np.eye(8)))


def test_state_to_box_inverse():
    s = KalmanState(np.array([5, 10, 0.5, 20, 0, 0, 0, 0.0]), np.eye(8))
    assert state_to_box(s) == BoundingBox(0, 0, 10, 20)


@given(boxes)
def test_round_trip(b):
    np.testing.assert_allclose(state_to_box(kf_initiate(b)).to_tlwh(), b.to_tlwh(), atol=1e-9)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0.1, 5), st.floats(1, 500))
def test_random_states_give_valid_boxes(cx, cy, a, h):
    b = state_to_box(KalmanState(np.array([cx, cy, a, h, 0, 0, 0, 0.0]), np.eye(8)))
    assert b.width > 0 and b.height > 0


@given(boxes, boxes, st.floats(-5, 5), st.floats(-5, 5))
def test_predict_linear_in_mean(a, b, vx, vy):
    sa, sb = kf_initiate(a), kf_initiate(b)
    ma = sa.mean + np.r_[0, 0, 0, 0, vx, vy, 0, 0]
    mb = sb.mean
    cov = sa.covariance
    avg = kf_predict(KalmanState((ma + mb) / 2, cov)).mean
    both = (kf_predict(KalmanState(ma, cov)).mean + kf_predict(KalmanState(mb, cov)).mean) / 2
    np.testing.assert_allclose(avg, both, atol=1e-9)


def test_symmetry_over_long_random_sequence():
    rng = np.random.default_rng(7)
    s = kf_initiate(BoundingBox(100, 100, 40, 100))
    worst = 0.0
    for _ in range(1000):
        s = kf_predict(s)
        if rng.random() < 0.7:
            b = state_to_box(s)
            s = kf_update(s, BoundingBox(b.left + rng.normal(0, 2), b.top + rng.normal(0, 2), 40, 100))
        worst = max(worst, np.max(np.abs(s.covariance - s.covariance.T)))
        assert np.all(np.diag(s.covariance) >= 0)
    assert worst < 1e-9
