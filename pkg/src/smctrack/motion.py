"""Constant-velocity Kalman filter over (cx, cy, aspect, height).

State layout: ``(cx, cy, a, h, vcx, vcy, va, vh)`` with ``a = width / height``.
Process and measurement noise scale with the box height, so one tuning works
for near and far objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateFilterError, ValidationError
from .geometry import BoundingBox

NDIM = 4

_F = np.eye(2 * NDIM)
for _i in range(NDIM):
    _F[_i, NDIM + _i] = 1.0
_H = np.eye(NDIM, 2 * NDIM)


@dataclass(frozen=True)
class MotionNoiseConfig:
    position_std_factor: float = 1.0 / 20
    velocity_std_factor: float = 1.0 / 160

    def __post_init__(self):
        if not (self.position_std_factor > 0 and self.velocity_std_factor > 0):
            raise ValidationError("noise factors must be positive")


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def height(self) -> float:
        return float(self.mean[3])


def box_to_xyah(box: BoundingBox) -> np.ndarray:
    cx, cy = box.center
    return np.array([cx, cy, box.width / box.height, box.height])


def kf_initiate(box: BoundingBox, cfg: MotionNoiseConfig = MotionNoiseConfig()) -> KalmanState:
    pos = box_to_xyah(box)
    mean = np.concatenate([pos, np.zeros(NDIM)])
    h = pos[3]
    sp, sv = cfg.position_std_factor, cfg.velocity_std_factor
    std = np.array([
        2 * sp * h, 2 * sp * h, 1e-2, 2 * sp * h,
        10 * sv * h, 10 * sv * h, 1e-5, 10 * sv * h,
    ])
    return KalmanState(mean, np.diag(std ** 2))


def _process_noise(h: float, cfg: MotionNoiseConfig) -> np.ndarray:
    sp, sv = cfg.position_std_factor, cfg.velocity_std_factor
    std = np.array([sp * h, sp * h, 1e-2, sp * h, sv * h, sv * h, 1e-5, sv * h])
    return np.diag(std ** 2)


def kf_predict(state: KalmanState, cfg: MotionNoiseConfig = MotionNoiseConfig()) -> KalmanState:
    mean = _F @ state.mean
    cov = _F @ state.covariance @ _F.T + _process_noise(state.mean[3], cfg)
    return KalmanState(mean, 0.5 * (cov + cov.T))


def kf_update(state: KalmanState, measurement: BoundingBox,
              cfg: MotionNoiseConfig = MotionNoiseConfig()) -> KalmanState:
    """Standard correction step against an observed box.

    Raises DegenerateFilterError when the innovation covariance is not
    positive definite; the caller is expected to re-initiate the track.
    """
    mean, cov = state.mean, state.covariance
    h = mean[3]
    sp = cfg.position_std_factor
    r_std = np.array([sp * h, sp * h, 1e-1, sp * h])
    proj_mean = _H @ mean
    proj_cov = _H @ cov @ _H.T + np.diag(r_std ** 2)
    try:
        chol = scipy.linalg.cho_factor(proj_cov, lower=True, check_finite=True)
        gain = scipy.linalg.cho_solve(chol, (cov @ _H.T).T, check_finite=False).T
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DegenerateFilterError(f"innovation covariance not positive definite: {exc}") from exc
    innovation = box_to_xyah(measurement) - proj_mean
    new_mean = mean + gain @ innovation
    new_cov = cov - gain @ proj_cov @ gain.T
    new_cov = 0.5 * (new_cov + new_cov.T)
    return KalmanState(new_mean, new_cov)


def state_to_box(state: KalmanState) -> BoundingBox:
    cx, cy, a, h = (float(x) for x in state.mean[:NDIM])
    if not (a > 0 and h > 0):
        raise DegenerateFilterError(f"state has non-positive aspect/height (a={a}, h={h})")
    w = a * h
    return BoundingBox(cx - w / 2.0, cy - h / 2.0, w, h)
