"""Desired task-space accelerations: PD pose tasks + LQR centroidal balance.

Five pose tasks (split phi, height h, roll alpha, pitch beta, yaw gamma)
are tracked by PD laws; the sagittal CoM offset is regulated by an LQR on
the wheeled-inverted-pendulum state (r, rdot, s, sdot).  The balance law
is implemented as  des rddot = -K (Lambda_CoM - ref); the error-negated
variant destabilizes the linearized closed loop, which the tests verify.
The six desired accelerations are ordered by priority: height, pitch,
balance, roll, split, yaw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import TaskJacobians
from .rotations import wrap_angle

GRAVITY = 9.81

# Lambda order (phi, h, alpha, beta, gamma); angular entries get wrapped errors
ANGULAR_TASKS = (0, 2, 3, 4)

DEFAULT_KP = np.array([100.0, 400.0, 400.0, 400.0, 50.0])
DEFAULT_Q = np.diag([100.0, 1.0, 10.0, 1.0])
DEFAULT_R = 1.0


@dataclass
class PoseGains:
    kp: np.ndarray               # (5,) per Lambda entry
    kd: np.ndarray               # (5,)

    def __post_init__(self):
        self.kp = np.asarray(self.kp, dtype=float).reshape(5)
        self.kd = np.asarray(self.kd, dtype=float).reshape(5)
        if not (np.all(self.kp > 0.0) and np.all(self.kd > 0.0)):
            raise ValueError("pose gains must be positive")


def default_gains(kp: np.ndarray = DEFAULT_KP) -> PoseGains:
    """Critically-damped-ish rule kd = sqrt(kp)."""
    kp = np.asarray(kp, dtype=float) * np.ones(5)
    if np.any(kp <= 0.0):
        raise ValueError("pose gains must be positive")
    return PoseGains(kp=kp, kd=np.sqrt(kp))


def pd_accel(ref_L: np.ndarray, ref_Ldot: np.ndarray,
             L: np.ndarray, Ldot: np.ndarray, gains: PoseGains) -> np.ndarray:
    """a_n = kp_n (ref - L)_n + kd_n (ref_dot - Ldot)_n, angle errors wrapped."""
    err = np.asarray(ref_L, float) - np.asarray(L, float)
    for i in ANGULAR_TASKS:
        err[i] = wrap_angle(err[i])
    rate_err = np.asarray(ref_Ldot, float) - np.asarray(Ldot, float)
    return gains.kp * err + gains.kd * rate_err


@dataclass
class LqrDesign:
    A: np.ndarray                # 4x4
    B: np.ndarray                # (4, 1)
    Q: np.ndarray
    R: float
    K: np.ndarray                # (4,)
    P: np.ndarray                # CARE solution
    r_z: float


class CareError(RuntimeError):
    pass


def pendulum_state_matrices(r_z: float, gravity: float = GRAVITY):
    """Linearized wheeled-inverted-pendulum state space, x = (r, rdot, s, sdot)."""
    if r_z <= 0.0:
        raise ValueError("pendulum height must be positive")
    A = np.array([[0.0, 1.0, 0.0, 0.0],
                  [0.0, 0.0, 0.0, 0.0],
                  [0.0, 0.0, 0.0, 1.0],
                  [gravity / r_z, 0.0, 0.0, 0.0]])
    B = np.array([[0.0], [1.0], [0.0], [0.0]])
    return A, B


def lqr_gain(r_z: float, Q: np.ndarray = DEFAULT_Q, R: float = DEFAULT_R,
             gravity: float = GRAVITY) -> LqrDesign:
    """Stabilizing LQR gain K = R^-1 B^T P from the Riccati equation."""
    Q = np.asarray(Q, dtype=float)
    R = float(R)
    if R <= 0.0:
        raise ValueError("R must be positive")
    if np.linalg.eigvalsh(0.5 * (Q + Q.T)).min() < -1e-12:
        raise ValueError("Q must be positive semidefinite")
    A, B = pendulum_state_matrices(r_z, gravity)
    P = scipy.linalg.solve_continuous_are(A, B, Q, np.array([[R]]))
    resid = np.linalg.norm(A.T @ P + P @ A - P @ B @ B.T @ P / R + Q)
    # relative to the equation scale, so large weight matrices are not
    # rejected for honest floating-point roundoff
    scale = max(1.0, np.linalg.norm(Q), np.linalg.norm(P))
    if not np.isfinite(resid) or resid > 1e-8 * scale:
        raise CareError(f"Riccati solve did not converge: residual {resid:.3e}")
    K = (B.T @ P / R).ravel()
    ev = np.linalg.eigvals(A - B @ K[None, :])
    if ev.real.max() >= 0.0:
        raise CareError(f"gain is not stabilizing: max Re(eig) = {ev.real.max():.3e}")
    return LqrDesign(A=A, B=B, Q=Q, R=R, K=K, P=P, r_z=float(r_z))


class GainScheduler:
    """Caches the LQR gain, re-solving only when the pendulum height moves
    by more than the threshold (A depends on r_z)."""

    def __init__(self, Q: np.ndarray = DEFAULT_Q, R: float = DEFAULT_R,
                 threshold: float = 0.01, gravity: float = GRAVITY):
        self.Q = np.asarray(Q, dtype=float)
        self.R = float(R)
        self.threshold = float(threshold)
        self.gravity = float(gravity)
        self.design: LqrDesign | None = None
        self.solve_count = 0

    def gain(self, r_z: float) -> LqrDesign:
        if self.design is None or abs(r_z - self.design.r_z) > self.threshold:
            self.design = lqr_gain(r_z, self.Q, self.R, self.gravity)
            self.solve_count += 1
        return self.design


def balance_accel(K: np.ndarray, ref_Lcom: np.ndarray, Lcom: np.ndarray) -> float:
    """des rddot = -K (Lambda_CoM - ref), state (r, rdot, s, sdot)."""
    e = np.asarray(Lcom, float) - np.asarray(ref_Lcom, float)
    return float(-np.asarray(K, float) @ e)


def balance_constraints_residual(F_NC: np.ndarray, r_com: np.ndarray,
                                 mass: float, gravity: float = GRAVITY) -> np.ndarray:
    """Sagittal equilibrium residuals (vertical force, CoM moment); zero at balance."""
    F_x, F_z = float(F_NC[0]), float(F_NC[1])
    r_x, r_z = float(r_com[0]), float(r_com[1])
    return np.array([mass * gravity + F_z, -r_z * F_x + r_x * F_z])


@dataclass
class QpLevel:
    A: np.ndarray                # (m, 22)
    b: np.ndarray                # (m,)
    name: str = ""

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if self.A.shape != (len(self.b), 22):
            raise ValueError("level shape mismatch: A must be m x 22")
        if not (np.isfinite(self.A).all() and np.isfinite(self.b).all()):
            raise ValueError("level contains non-finite entries")


@dataclass
class TaskStack:
    levels: list = field(default_factory=list)

    @property
    def names(self):
        return [lv.name for lv in self.levels]


def assemble_task_stack(pose_acc: np.ndarray, bal_acc: float,
                        tj: TaskJacobians) -> TaskStack:
    """Order the six desired accelerations by priority and pad to x-space.

    pose_acc follows the Lambda order (phi, h, alpha, beta, gamma); the
    stack follows the priority order height, pitch, balance, roll, split,
    yaw, matching the task-Jacobian row order.  Each level reads
    A_i = [J_i 0 0] (zeros over F_C and tau_a), b_i = des_a_i - Jdot_i u_y.
    """
    pose_acc = np.asarray(pose_acc, dtype=float).reshape(5)
    des = np.array([pose_acc[1], pose_acc[3], float(bal_acc),
                    pose_acc[2], pose_acc[0], pose_acc[4]])
    if not np.isfinite(des).all():
        raise ValueError("desired accelerations must be finite")
    levels = []
    for i, name in enumerate(tj.names):
        A = np.zeros((1, 22))
        A[0, :12] = tj.J[i]
        levels.append(QpLevel(A=A, b=np.array([des[i] - tj.Jdot_u[i]]), name=name))
    return TaskStack(levels=levels)
