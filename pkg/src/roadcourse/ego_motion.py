"""Ego-motion estimation with an extended Kalman filter.

The vehicle state follows a constant-turn-rate-and-velocity (CTRV) model:
``(x, y, heading, v, omega)``.  Wheel odometry feeds the update step as a
direct ``[v, omega]`` measurement, where ``v`` is the mean of the rear
wheel speeds (the front wheels steer and run a longer arc in turns).

The prediction step integrates the CTRV kinematics in closed form.  Near
``omega = 0`` the closed form divides by ``omega``, so below a small
threshold the filter switches to a series expansion that keeps the
first-order ``omega`` term; the branch seam is continuous to well below
1e-6 m for automotive speeds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .geometry import normalize_angle

# Below this turn rate (rad/s) the closed-form CTRV integral is replaced
# by its series expansion to avoid dividing by omega.
OMEGA_EPS = 1e-4

_H = np.array([[0.0, 0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class EgoState:
    """CTRV filter state with covariance.

    Attributes:
        x: world x position in meters.
        y: world y position in meters.
        heading: yaw angle in radians, normalized into (-pi, pi].
        v: speed along the heading in m/s.
        omega: turn rate in rad/s.
        cov: 5x5 covariance over (x, y, heading, v, omega).
    """

    x: float
    y: float
    heading: float
    v: float
    omega: float
    cov: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (5, 5):
            raise InvalidInputError("covariance must be 5x5")
        if not np.all(np.isfinite(cov)):
            raise InvalidInputError("covariance must be finite")
        asym = np.max(np.abs(cov - cov.T))
        if asym > 1e-9:
            raise InvalidInputError(f"covariance asymmetry {asym:.3e} > 1e-9")
        cov = 0.5 * (cov + cov.T)
        if np.min(np.linalg.eigvalsh(cov)) < -1e-9:
            raise InvalidInputError("covariance is not positive semi-definite")
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading, self.v, self.omega])

    @property
    def pose(self):
        from .geometry import Pose2

        return Pose2(self.x, self.y, self.heading)


def initial_state(
    x: float = 0.0,
    y: float = 0.0,
    heading: float = 0.0,
    v: float = 0.0,
    omega: float = 0.0,
    pos_std: float = 1.0,
    heading_std: float = 0.1,
    v_std: float = 1.0,
    omega_std: float = 0.1,
) -> EgoState:
    cov = np.diag(
        [pos_std**2, pos_std**2, heading_std**2, v_std**2, omega_std**2]
    )
    return EgoState(x, y, heading, v, omega, cov)


def _motion(x, y, theta, v, omega, dt):
    """CTRV mean propagation and its 5x5 Jacobian."""
    jac = np.eye(5)
    if abs(omega) < OMEGA_EPS:
        # Series expansion around omega=0, first order in omega. The
        # quadratic remainder is ~ v*dt^3*omega^2/6 < 1e-7 m at the seam.
        c, s = np.cos(theta), np.sin(theta)
        half = 0.5 * v * dt * dt
        nx = x + v * dt * c - half * omega * s
        ny = y + v * dt * s + half * omega * c
        jac[0, 2] = -v * dt * s - half * omega * c
        jac[0, 3] = dt * c - 0.5 * dt * dt * omega * s
        jac[0, 4] = -half * s
        jac[1, 2] = v * dt * c - half * omega * s
        jac[1, 3] = dt * s + 0.5 * dt * dt * omega * c
        jac[1, 4] = half * c
    else:
        theta2 = theta + omega * dt
        c1, s1 = np.cos(theta), np.sin(theta)
        c2, s2 = np.cos(theta2), np.sin(theta2)
        r = v / omega
        nx = x + r * (s2 - s1)
        ny = y + r * (c1 - c2)
        jac[0, 2] = r * (c2 - c1)
        jac[0, 3] = (s2 - s1) / omega
        jac[0, 4] = r * dt * c2 - (v / omega**2) * (s2 - s1)
        jac[1, 2] = r * (s2 - s1)
        jac[1, 3] = (c1 - c2) / omega
        jac[1, 4] = r * dt * s2 - (v / omega**2) * (c1 - c2)
    jac[2, 4] = dt
    return nx, ny, theta + omega * dt, jac


def predict(
    state: EgoState,
    dt: float,
    accel_std: float = 0.5,
    turn_accel_std: float = 0.1,
) -> EgoState:
    """Propagate the state by ``dt`` seconds under the CTRV model.

    Process noise uses the piecewise-constant acceleration model: an
    unknown linear acceleration (std ``accel_std``) and turn acceleration
    (std ``turn_accel_std``) act over the step.
    """
    if not dt > 0.0:
        raise InvalidInputError("dt must be > 0")
    nx, ny, ntheta, jac = _motion(
        state.x, state.y, state.heading, state.v, state.omega, dt
    )
    c, s = np.cos(state.heading), np.sin(state.heading)
    gain = np.array(
        [
            [0.5 * dt * dt * c, 0.0],
            [0.5 * dt * dt * s, 0.0],
            [0.0, 0.5 * dt * dt],
            [dt, 0.0],
            [0.0, dt],
        ]
    )
    noise = gain @ np.diag([accel_std**2, turn_accel_std**2]) @ gain.T
    cov = jac @ state.cov @ jac.T + noise
    cov = 0.5 * (cov + cov.T)
    return EgoState(nx, ny, ntheta, state.v, state.omega, cov)


def update(
    state: EgoState,
    wheel_speeds,
    yaw_rate: float,
    speed_std: float = 0.1,
    yaw_std: float = 0.01,
) -> EgoState:
    """Fuse a wheel-odometry measurement ``z = [v, omega]``.

    ``wheel_speeds`` is (front-left, front-right, rear-left, rear-right);
    the speed measurement is the rear-axle mean.  Non-finite measurements
    are rejected: the state is returned unchanged and a warning is issued.
    """
    wheel_speeds = np.asarray(wheel_speeds, dtype=np.float64)
    if wheel_speeds.shape != (4,):
        raise InvalidInputError("wheel_speeds must have 4 entries")
    if not (np.all(np.isfinite(wheel_speeds)) and np.isfinite(yaw_rate)):
        warnings.warn("non-finite odometry measurement rejected", RuntimeWarning)
        return state
    z = np.array([0.5 * (wheel_speeds[2] + wheel_speeds[3]), yaw_rate])
    meas_cov = np.diag([speed_std**2, yaw_std**2])
    innovation = z - _H @ state.mean
    s_mat = _H @ state.cov @ _H.T + meas_cov
    gain = state.cov @ _H.T @ np.linalg.solve(s_mat, np.eye(2))
    mean = state.mean + gain @ innovation
    ident = np.eye(5) - gain @ _H
    # Joseph form keeps the covariance PSD under roundoff.
    cov = ident @ state.cov @ ident.T + gain @ meas_cov @ gain.T
    cov = 0.5 * (cov + cov.T)
    return EgoState(mean[0], mean[1], mean[2], mean[3], mean[4], cov)
