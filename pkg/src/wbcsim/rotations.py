"""SO(3) helpers: hat maps, exponential map, ZYX Euler angles and their rate maps."""

from __future__ import annotations

import numpy as np

GIMBAL_COS_TOL = 1e-6


def cross3(a, b) -> np.ndarray:
    """Cross product of two 3-vectors (much cheaper than np.cross here)."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def hat(w: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix such that hat(w) @ v == cross(w, v)."""
    x, y, z = w
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def exp_so3(w: np.ndarray) -> np.ndarray:
    """Rotation matrix exp([w]x) via Rodrigues' formula."""
    th = float(np.linalg.norm(w))
    W = hat(w)
    if th < 1e-12:
        return np.eye(3) + W + 0.5 * (W @ W)
    return np.eye(3) + (np.sin(th) / th) * W + ((1.0 - np.cos(th)) / th**2) * (W @ W)


def log_so3(R: np.ndarray) -> np.ndarray:
    """Rotation vector of R (inverse of exp_so3), valid away from angle pi."""
    c = 0.5 * (np.trace(R) - 1.0)
    c = float(np.clip(c, -1.0, 1.0))
    th = np.arccos(c)
    if th < 1e-10:
        A = 0.5 * (R - R.T)
        return np.array([A[2, 1], A[0, 2], A[1, 0]])
    A = (th / (2.0 * np.sin(th))) * (R - R.T)
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_zyx(R: np.ndarray) -> tuple[np.ndarray, bool]:
    """(roll, pitch, yaw) with R = Rz(yaw) @ Ry(pitch) @ Rx(roll).

    Returns the angles and a gimbal-proximity flag (|cos pitch| < GIMBAL_COS_TOL).
    """
    pitch = -np.arcsin(float(np.clip(R[2, 0], -1.0, 1.0)))
    gimbal = abs(np.cos(pitch)) < GIMBAL_COS_TOL
    roll = np.arctan2(R[2, 1], R[2, 2])
    yaw = np.arctan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw]), gimbal


def euler_zyx_rate_map(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Matrix E with omega_world = E @ [roll_dot, pitch_dot, yaw_dot].

    Columns: Rz(yaw) Ry(pitch) e_x, Rz(yaw) e_y, e_z.
    """
    E = np.empty((3, 3))
    E[:, 0] = rot_z(yaw) @ rot_y(pitch) @ np.array([1.0, 0.0, 0.0])
    E[:, 1] = rot_z(yaw) @ np.array([0.0, 1.0, 0.0])
    E[:, 2] = np.array([0.0, 0.0, 1.0])
    return E


def euler_rates_from_omega(R: np.ndarray) -> tuple[np.ndarray, bool]:
    """Matrix mapping world angular velocity to (roll, pitch, yaw) rates at R.

    Near gimbal lock the map is ill-conditioned; the flag is set and a
    least-squares inverse is returned instead of failing.
    """
    (roll, pitch, yaw), gimbal = euler_zyx(R)
    E = euler_zyx_rate_map(roll, pitch, yaw)
    if gimbal:
        return np.linalg.pinv(E), True
    return np.linalg.inv(E), False


def wrap_angle(a: float | np.ndarray):
    """Wrap angle(s) to (-pi, pi]."""
    w = -((-np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi)
    return w


def project_to_so3(R: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (polar decomposition via SVD)."""
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, float(np.sign(np.linalg.det(U @ Vt)))])
    return U @ D @ Vt
