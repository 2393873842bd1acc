"""Constant-velocity Kalman tracking of rigid-body motion.

Capture frames carry position and orientation only; velocity is latent and
recovered here.  The constant-velocity model is axis-decoupled, so each
object runs three independent 2-state ([position, velocity]) filters, one
per axis, which is algebraically identical to a single 6-state filter and
much cheaper.  All operations are pure functions from (state, input) to a
new state; a TrackState is an immutable value.

Model per axis, with measurement z = position (meters):

    F = [[1, dt], [0, 1]],  Q = q * [[dt^3/3, dt^2/2], [dt^2/2, dt]],
    H = [1, 0],  R = r

where q is the continuous white-noise acceleration spectral density
(m^2/s^3) and r the per-axis measurement variance (m^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .ingest import Quat, RigidBodySample, Vec3

MM_TO_M = 0.001

# (p00, p01, p11) per axis; the 2x2 covariance is symmetric by construction.
AxisCov = tuple[float, float, float]


class TrackingError(Exception):
    pass


class OccludedFirstSample(TrackingError):
    pass


class TimeRegression(TrackingError):
    pass


class StaleTrack(TrackingError):
    pass


@dataclass(frozen=True, slots=True)
class FilterParams:
    """Tunable filter parameters.

    Defaults: r reflects millimeter-class capture accuracy, q is sized for
    small-UAV accelerations, and the optional Mahalanobis gate (chi-square
    threshold per axis) is off.
    """

    process_noise_psd: float = 1.0  # q, m^2/s^3
    measurement_variance: float = 1e-6  # r, m^2  ((0.001 m)^2)
    initial_velocity_variance: float = 1.0  # (m/s)^2
    staleness_timeout: float = 0.5  # s
    gate_chi2: Optional[float] = None  # e.g. 9.0; None disables gating

    def __post_init__(self) -> None:
        if self.process_noise_psd <= 0:
            raise ValueError("process_noise_psd must be > 0")
        if self.measurement_variance <= 0:
            raise ValueError("measurement_variance must be > 0")
        if self.initial_velocity_variance <= 0:
            raise ValueError("initial_velocity_variance must be > 0")
        if self.staleness_timeout <= 0:
            raise ValueError("staleness_timeout must be > 0")
        if self.gate_chi2 is not None and self.gate_chi2 <= 0:
            raise ValueError("gate_chi2 must be > 0 when set")


@dataclass(frozen=True, slots=True)
class TrackState:
    """Filtered kinematic state of one object, in the capture frame (meters)."""

    position: Vec3  # m
    velocity: Vec3  # m/s
    covariance: tuple[AxisCov, AxisCov, AxisCov]
    orientation: Quat  # latest sample's quaternion, passed through unfiltered
    last_measurement_time: float
    last_frame_number: int

    def covariance_matrices(self) -> np.ndarray:
        """Per-axis 2x2 covariance matrices, shape (3, 2, 2)."""
        return np.array([[[c[0], c[1]], [c[1], c[2]]] for c in self.covariance])


def kf_init(sample: RigidBodySample, params: FilterParams) -> TrackState:
    """Start a track from its first (non-occluded) sample: zero velocity prior."""
    if sample.occluded:
        raise OccludedFirstSample(f"cannot initialize {sample.object_name!r} from an occluded sample")
    p = sample.position_mm
    cov = (params.measurement_variance, 0.0, params.initial_velocity_variance)
    return TrackState(
        position=(p[0] * MM_TO_M, p[1] * MM_TO_M, p[2] * MM_TO_M),
        velocity=(0.0, 0.0, 0.0),
        covariance=(cov, cov, cov),
        orientation=sample.orientation,
        last_measurement_time=sample.capture_time,
        last_frame_number=sample.frame_number,
    )


def kf_predict(state: TrackState, dt: float, params: FilterParams) -> TrackState:
    """Propagate mean and covariance dt seconds forward (timestamps untouched)."""
    if dt < 0:
        raise TimeRegression(f"negative prediction step dt={dt}")
    if dt == 0.0:
        return state
    q = params.process_noise_psd
    q00 = q * dt * dt * dt / 3.0
    q01 = q * dt * dt / 2.0
    q11 = q * dt
    pos = state.position
    vel = state.velocity
    new_pos = (pos[0] + vel[0] * dt, pos[1] + vel[1] * dt, pos[2] + vel[2] * dt)
    new_cov = []
    for p00, p01, p11 in state.covariance:
        new_cov.append(
            (
                p00 + 2.0 * dt * p01 + dt * dt * p11 + q00,
                p01 + dt * p11 + q01,
                p11 + q11,
            )
        )
    return replace(state, position=new_pos, covariance=(new_cov[0], new_cov[1], new_cov[2]))


def kf_update(state: TrackState, sample: RigidBodySample, params: FilterParams) -> TrackState:
    """One full filter step: predict to the sample time, then fuse the measurement.

    Occluded samples take the predict-only path (no measurement, orientation
    kept); timestamps and frame number advance either way.
    """
    dt = sample.capture_time - state.last_measurement_time
    if dt < 0:
        raise TimeRegression(
            f"sample at t={sample.capture_time} older than track state t={state.last_measurement_time}"
        )
    st = kf_predict(state, dt, params)
    if sample.occluded:
        return replace(
            st,
            last_measurement_time=sample.capture_time,
            last_frame_number=sample.frame_number,
        )
    r = params.measurement_variance
    pos = list(st.position)
    vel = list(st.velocity)
    cov = list(st.covariance)
    for axis in range(3):
        z = sample.position_mm[axis] * MM_TO_M
        p00, p01, p11 = cov[axis]
        y = z - pos[axis]
        s = p00 + r
        if params.gate_chi2 is not None and y * y / s > params.gate_chi2:
            continue  # innovation gate: reject this axis's measurement
        k0 = p00 / s
        k1 = p01 / s
        pos[axis] += k0 * y
        vel[axis] += k1 * y
        cov[axis] = (
            (1.0 - k0) * p00,
            p01 - p00 * p01 / s,
            p11 - p01 * p01 / s,
        )
    return TrackState(
        position=(pos[0], pos[1], pos[2]),
        velocity=(vel[0], vel[1], vel[2]),
        covariance=(cov[0], cov[1], cov[2]),
        orientation=sample.orientation,
        last_measurement_time=sample.capture_time,
        last_frame_number=sample.frame_number,
    )


def predict_to(
    state: TrackState,
    now: float,
    params: FilterParams,
    *,
    staleness_timeout: Optional[float] = None,
) -> TrackState:
    """Pure extrapolation of the state to `now` for packet building.

    Does not advance the stored timestamps; raises StaleTrack when the last
    measurement is older than the staleness timeout (params default,
    overridable here; pass math.inf to disable).
    """
    age = now - state.last_measurement_time
    if age < 0:
        raise TimeRegression(f"now={now} precedes last measurement t={state.last_measurement_time}")
    timeout = params.staleness_timeout if staleness_timeout is None else staleness_timeout
    if age > timeout:
        raise StaleTrack(f"track is {age:.3f}s old (timeout {timeout:.3f}s)")
    return kf_predict(state, age, params)


def speed(state: TrackState) -> float:
    return math.sqrt(sum(v * v for v in state.velocity))
