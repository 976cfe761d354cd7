"""Kinematic and inertial model of the 6-DoF wheeled bipedal robot.

The robot is a floating base with two legs. Each leg is a parallelogram
four-bar: hip joint (q1/q6) to the thigh, knee joint (q2/q7) to the shank,
a passive parallel link (q3/q8) on the shank, a drive rocker (q5/q10) on
the thigh, and the wheel (q4/q9) at the shank tip.  The four-bar imposes

    q5 = q2 = -q3    and    q10 = q7 = -q8,

so the independent joint set is (q1, q5, q4, q6, q10, q9).  The spanning
tree has 16 velocity coordinates u = (v_base, omega_base, qdot_1..10) in
the inertia frame; the closed loop has 12, u_y.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np
import yaml

from .rotations import (
    cross3,
    euler_rates_from_omega,
    euler_zyx,
    exp_so3,
    hat,
    project_to_so3,
    rot_y,
)

NQ_TREE = 10
NV_TREE = 16
NQ_MIN = 6
NV_MIN = 12

# Body indices.
BASE, THIGH_L, SHANK_L, LINK_L, ROCKER_L, WHEEL_L = 0, 1, 2, 3, 4, 5
THIGH_R, SHANK_R, LINK_R, ROCKER_R, WHEEL_R = 6, 7, 8, 9, 10

BODY_NAMES = [
    "base",
    "thigh_l", "shank_l", "link_l", "rocker_l", "wheel_l",
    "thigh_r", "shank_r", "link_r", "rocker_r", "wheel_r",
]

# Joint i corresponds to tree coordinate q_{i+1}; child body of each joint.
JOINT_CHILD = [THIGH_L, SHANK_L, LINK_L, WHEEL_L, ROCKER_L,
               THIGH_R, SHANK_R, LINK_R, WHEEL_R, ROCKER_R]
JOINT_PARENT = [BASE, THIGH_L, SHANK_L, SHANK_L, THIGH_L,
                BASE, THIGH_R, SHANK_R, SHANK_R, THIGH_R]

# Independent joints (q1, q5, q4, q6, q10, q9) as 0-based tree indices.
INDEP_JOINTS = [0, 4, 3, 5, 9, 8]
# Actuated tree joints in torque order (hip_l, knee_l, wheel_l, hip_r, knee_r, wheel_r).
ACTUATED_JOINTS = [0, 4, 3, 5, 9, 8]


def _joint_expansion() -> np.ndarray:
    """10x6 map from independent joint values to the full tree joint vector."""
    E = np.zeros((NQ_TREE, NQ_MIN))
    E[0, 0] = 1.0                       # q1
    E[1, 1] = 1.0                       # q2 = q5
    E[2, 1] = -1.0                      # q3 = -q5
    E[3, 2] = 1.0                       # q4
    E[4, 1] = 1.0                       # q5
    E[5, 3] = 1.0                       # q6
    E[6, 4] = 1.0                       # q7 = q10
    E[7, 4] = -1.0                      # q8 = -q10
    E[8, 5] = 1.0                       # q9
    E[9, 4] = 1.0                       # q10
    return E


JOINT_EXPANSION = _joint_expansion()


def loop_closure_matrix() -> np.ndarray:
    """Constant 16x12 Jacobian G of the loop closure map (base block identity)."""
    G = np.zeros((NV_TREE, NV_MIN))
    G[:6, :6] = np.eye(6)
    G[6:, 6:] = JOINT_EXPANSION
    return G


def selection_matrix() -> np.ndarray:
    """6x16 selection S mapping actuated torques onto tree coordinates (S^T tau)."""
    S = np.zeros((6, NV_TREE))
    for row, j in enumerate(ACTUATED_JOINTS):
        S[row, 6 + j] = 1.0
    return S


@dataclass
class Body:
    name: str
    mass: float
    inertia: np.ndarray          # 3x3 in body frame, about the CoM
    com: np.ndarray              # CoM offset in body frame


@dataclass
class Joint:
    name: str
    parent: int
    child: int
    axis: np.ndarray             # unit axis in parent frame
    origin: np.ndarray           # joint origin in parent frame


@dataclass
class RobotDescription:
    """Validated numeric description of the fixed robot topology."""

    bodies: list[Body]
    joints: list[Joint]
    wheel_radius: float
    torque_limit: float

    def __post_init__(self):
        if len(self.bodies) != 11:
            raise ValueError(f"expected 11 bodies, got {len(self.bodies)}")
        if len(self.joints) != NQ_TREE:
            raise ValueError(f"expected {NQ_TREE} revolute joints, got {len(self.joints)}")
        for b in self.bodies:
            if b.mass <= 0.0:
                raise ValueError(f"body {b.name} has non-positive mass")
            I = np.asarray(b.inertia, dtype=float)
            if not np.allclose(I, I.T, atol=1e-12):
                raise ValueError(f"body {b.name} inertia not symmetric")
            if np.linalg.eigvalsh(I).min() <= 0.0:
                raise ValueError(f"body {b.name} inertia not positive definite")
        for i, j in enumerate(self.joints):
            if j.parent != JOINT_PARENT[i] or j.child != JOINT_CHILD[i]:
                raise ValueError(f"joint {j.name} does not match the fixed topology")
            n = np.linalg.norm(j.axis)
            if not np.isclose(n, 1.0, atol=1e-9):
                raise ValueError(f"joint {j.name} axis is not unit length")
        if self.wheel_radius <= 0.0:
            raise ValueError("wheel radius must be positive")
        if self.torque_limit <= 0.0:
            raise ValueError("torque limit must be positive")

    @property
    def total_mass(self) -> float:
        return float(sum(b.mass for b in self.bodies))

    @classmethod
    def from_dict(cls, cfg: dict) -> "RobotDescription":
        body_index = {name: i for i, name in enumerate(BODY_NAMES)}
        bodies = []
        for name in BODY_NAMES:
            try:
                bc = cfg["bodies"][name]
            except KeyError as exc:
                raise ValueError(f"missing body entry '{name}'") from exc
            inertia = np.asarray(bc["inertia"], dtype=float)
            if inertia.shape == (3,):
                inertia = np.diag(inertia)
            bodies.append(Body(
                name=name,
                mass=float(bc["mass"]),
                inertia=inertia,
                com=np.asarray(bc.get("com", [0.0, 0.0, 0.0]), dtype=float),
            ))
        joints = []
        for i in range(NQ_TREE):
            name = f"q{i + 1}"
            try:
                jc = cfg["joints"][name]
            except KeyError as exc:
                raise ValueError(f"missing joint entry '{name}'") from exc
            joints.append(Joint(
                name=name,
                parent=body_index[jc["parent"]],
                child=body_index[jc["child"]],
                axis=np.asarray(jc.get("axis", [0.0, 1.0, 0.0]), dtype=float),
                origin=np.asarray(jc["origin"], dtype=float),
            ))
        return cls(
            bodies=bodies,
            joints=joints,
            wheel_radius=float(cfg["wheel_radius"]),
            torque_limit=float(cfg["torque_limit"]),
        )

    @classmethod
    def from_yaml(cls, path: str) -> "RobotDescription":
        with open(path) as f:
            return cls.from_dict(yaml.safe_load(f))

    @classmethod
    def default(cls) -> "RobotDescription":
        text = resources.files("wbcsim.data").joinpath("robot_default.yaml").read_text()
        return cls.from_dict(yaml.safe_load(text))


@dataclass
class SpanningTreeState:
    """Full tree configuration: base pose, 10 joint angles, 16 velocities."""

    pos: np.ndarray
    rot: np.ndarray
    qj: np.ndarray               # (10,)
    vel: np.ndarray = field(default_factory=lambda: np.zeros(NV_TREE))


@dataclass
class MinimalState:
    """Independent closed-loop coordinates y and velocities u_y."""

    pos: np.ndarray
    rot: np.ndarray
    qj: np.ndarray               # (6,): q1, q5, q4, q6, q10, q9
    vel: np.ndarray = field(default_factory=lambda: np.zeros(NV_MIN))

    def copy(self) -> "MinimalState":
        return MinimalState(self.pos.copy(), self.rot.copy(), self.qj.copy(), self.vel.copy())

    def perturbed(self, direction: np.ndarray, eps: float) -> "MinimalState":
        """State moved along tangent direction (a u_y-like 12-vector) by eps."""
        d = np.asarray(direction, dtype=float)
        return MinimalState(
            pos=self.pos + eps * d[0:3],
            rot=exp_so3(eps * d[3:6]) @ self.rot,
            qj=self.qj + eps * d[6:12],
            vel=self.vel.copy(),
        )


@dataclass
class TaskState:
    """Pose task state Lambda = (phi, h, alpha, beta, gamma) and diagnostics."""

    Lambda: np.ndarray
    Lambda_dot: np.ndarray
    d_w: float
    p_cl: np.ndarray
    p_cr: np.ndarray
    gimbal: bool = False


@dataclass
class ComState:
    r: np.ndarray                # (x, z) of CoM relative to frame N origin, sagittal
    s: np.ndarray                # (x, z) absolute CoM in heading/vertical axes
    r_dot: np.ndarray
    s_dot: np.ndarray
    total_mass: float


@dataclass
class TaskJacobians:
    """Rows (1x12) mapping u_y to task rates, plus Jdot*u_y bias terms.

    Order: height, pitch, balance (r_CoM^x), roll, split, yaw.
    """

    J: np.ndarray                # 6x12
    Jdot_u: np.ndarray           # (6,)
    names: tuple = ("height", "pitch", "balance", "roll", "split", "yaw")
    gimbal: bool = False


def _check_normal(n: np.ndarray, label: str) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if not np.isclose(np.linalg.norm(n), 1.0, atol=1e-6):
        raise ValueError(f"{label} ground normal is not unit length")
    if n[2] <= 0.0:
        raise ValueError(f"{label} ground normal must point into the upper hemisphere")
    return n


class KinematicsCache:
    """World poses, velocities and bias accelerations for one tree configuration."""

    def __init__(self, desc: RobotDescription, state: SpanningTreeState):
        self.desc = desc
        self.state = state
        n = len(desc.bodies)
        self.R = np.empty((n, 3, 3))
        self.o = np.empty((n, 3))
        self.axis_w = np.empty((NQ_TREE, 3))      # joint axes in world frame
        self.joint_origin_w = np.empty((NQ_TREE, 3))
        self.ancestors: list[list[int]] = [[] for _ in range(n)]

        self.R[BASE] = state.rot
        self.o[BASE] = state.pos
        for i, joint in enumerate(desc.joints):
            Rp, op = self.R[joint.parent], self.o[joint.parent]
            self.joint_origin_w[i] = op + Rp @ joint.origin
            self.axis_w[i] = Rp @ joint.axis
            c = joint.child
            if joint.axis[0] == 0.0 and joint.axis[2] == 0.0:
                self.R[c] = Rp @ rot_y(joint.axis[1] * state.qj[i])
            else:
                self.R[c] = Rp @ exp_so3(np.asarray(joint.axis) * state.qj[i])
            self.o[c] = self.joint_origin_w[i]
            self.ancestors[c] = self.ancestors[joint.parent] + [i]

        u = state.vel
        self.omega = np.empty((n, 3))
        self.v_origin = np.empty((n, 3))
        self.omega_dot_bias = np.empty((n, 3))
        self.a_origin_bias = np.empty((n, 3))
        self.omega[BASE] = u[3:6]
        self.v_origin[BASE] = u[0:3]
        self.omega_dot_bias[BASE] = 0.0
        self.a_origin_bias[BASE] = 0.0
        for i, joint in enumerate(desc.joints):
            p, c = joint.parent, joint.child
            r = self.o[c] - self.o[p]
            wp = self.omega[p]
            qd = u[6 + i]
            self.omega[c] = wp + self.axis_w[i] * qd
            self.v_origin[c] = self.v_origin[p] + cross3(wp, r)
            self.omega_dot_bias[c] = self.omega_dot_bias[p] + cross3(wp, self.axis_w[i]) * qd
            self.a_origin_bias[c] = (self.a_origin_bias[p]
                                     + cross3(self.omega_dot_bias[p], r)
                                     + cross3(wp, cross3(wp, r)))

    # -- geometry ----------------------------------------------------------

    def body_pose(self, body: int) -> tuple[np.ndarray, np.ndarray]:
        return self.R[body], self.o[body]

    def point_on_body(self, body: int, local: np.ndarray) -> np.ndarray:
        return self.o[body] + self.R[body] @ local

    def com_of_body(self, body: int) -> np.ndarray:
        return self.point_on_body(body, self.desc.bodies[body].com)

    def wheel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        return self.o[WHEEL_L].copy(), self.o[WHEEL_R].copy()

    # -- Jacobians (w.r.t. the 16 tree velocities) -------------------------

    def angular_jacobian(self, body: int) -> np.ndarray:
        J = np.zeros((3, NV_TREE))
        J[:, 3:6] = np.eye(3)
        for i in self.ancestors[body]:
            J[:, 6 + i] = self.axis_w[i]
        return J

    def point_jacobian(self, body: int, point: np.ndarray) -> np.ndarray:
        """Linear-velocity Jacobian of a point rigidly attached to `body`."""
        J = np.zeros((3, NV_TREE))
        J[:, 0:3] = np.eye(3)
        J[:, 3:6] = -hat(point - self.o[BASE])
        for i in self.ancestors[body]:
            J[:, 6 + i] = cross3(self.axis_w[i], point - self.joint_origin_w[i])
        return J

    def point_velocity(self, body: int, point: np.ndarray) -> np.ndarray:
        w = self.omega[body]
        return self.v_origin[body] + cross3(w, point - self.o[body])

    def point_bias_acc(self, body: int, point: np.ndarray) -> np.ndarray:
        """Acceleration of a body-fixed point for the current u with udot = 0."""
        r = point - self.o[body]
        w = self.omega[body]
        return (self.a_origin_bias[body] + cross3(self.omega_dot_bias[body], r)
                + cross3(w, cross3(w, r)))

    def com(self) -> tuple[np.ndarray, float]:
        M = 0.0
        p = np.zeros(3)
        for b in range(len(self.desc.bodies)):
            m = self.desc.bodies[b].mass
            p += m * self.com_of_body(b)
            M += m
        return p / M, M

    def com_jacobian(self) -> np.ndarray:
        M = 0.0
        J = np.zeros((3, NV_TREE))
        for b in range(len(self.desc.bodies)):
            m = self.desc.bodies[b].mass
            J += m * self.point_jacobian(b, self.com_of_body(b))
            M += m
        return J / M


class RobotModel:
    """Loop-closure aware kinematics built on a RobotDescription."""

    def __init__(self, desc: RobotDescription | None = None):
        self.desc = desc if desc is not None else RobotDescription.default()
        self.G = loop_closure_matrix()
        self.S = selection_matrix()
        self._hip_origin = {
            "l": self.desc.joints[0].origin.copy(),
            "r": self.desc.joints[5].origin.copy(),
        }

    # -- coordinate maps ---------------------------------------------------

    def expand_coordinates(self, y: MinimalState) -> SpanningTreeState:
        """q = gamma(y): base pose copied, joints through the parallelogram map."""
        return SpanningTreeState(
            pos=y.pos.copy(),
            rot=y.rot.copy(),
            qj=JOINT_EXPANSION @ y.qj,
            vel=self.G @ y.vel,
        )

    def extract_independent(self, q: SpanningTreeState) -> MinimalState:
        return MinimalState(
            pos=q.pos.copy(),
            rot=q.rot.copy(),
            qj=q.qj[INDEP_JOINTS].copy(),
            vel=q.vel[[0, 1, 2, 3, 4, 5, 6, 10, 9, 11, 15, 14]].copy(),
        )

    def loop_jacobian(self, y: MinimalState | None = None) -> np.ndarray:
        """G = d(gamma)/dy; constant for the parallelogram closure."""
        return self.G.copy()

    def kinematics(self, y: MinimalState) -> KinematicsCache:
        return KinematicsCache(self.desc, self.expand_coordinates(y))

    # -- forward kinematics ------------------------------------------------

    def forward_kinematics(self, y: MinimalState) -> dict:
        """World poses of all 11 bodies plus both wheel centers."""
        kc = self.kinematics(y)
        poses = {name: (kc.R[i].copy(), kc.o[i].copy()) for i, name in enumerate(BODY_NAMES)}
        wl, wr = kc.wheel_centers()
        return {"poses": poses, "wheel_center_l": wl, "wheel_center_r": wr}

    def contact_points(self, y: MinimalState, n_l: np.ndarray, n_r: np.ndarray,
                       kc: KinematicsCache | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Contact point of each wheel: center - wheel_radius * normal."""
        n_l = _check_normal(n_l, "left")
        n_r = _check_normal(n_r, "right")
        if kc is None:
            kc = self.kinematics(y)
        wl, wr = kc.wheel_centers()
        r = self.desc.wheel_radius
        return wl - r * n_l, wr - r * n_r

    # -- task space --------------------------------------------------------

    def _frame_n(self, kc: KinematicsCache, p_cl: np.ndarray, p_cr: np.ndarray):
        origin = 0.5 * (p_cl + p_cr)
        head = kc.R[BASE] @ np.array([1.0, 0.0, 0.0])
        hx = np.array([head[0], head[1], 0.0])
        nh = np.linalg.norm(hx)
        if nh < 1e-8:
            raise ValueError("heading is vertical; frame N undefined")
        x_n = hx / nh
        return origin, x_n, hx, nh

    def _pendulum_angle(self, kc: KinematicsCache, side: str, x_n: np.ndarray) -> float:
        hip = kc.point_on_body(BASE, self._hip_origin[side])
        wc = kc.o[WHEEL_L if side == "l" else WHEEL_R]
        d = hip - wc
        return float(np.arctan2(d @ x_n, d[2]))

    def task_state(self, y: MinimalState, n_l: np.ndarray, n_r: np.ndarray) -> TaskState:
        kc = self.kinematics(y)
        p_cl, p_cr = self.contact_points(y, n_l, n_r, kc)
        origin, x_n, _, _ = self._frame_n(kc, p_cl, p_cr)
        (roll, pitch, yaw), gimbal = euler_zyx(kc.R[BASE])
        h = float((kc.o[BASE] - origin)[2])
        phi = self._pendulum_angle(kc, "l", x_n) - self._pendulum_angle(kc, "r", x_n)
        d_w = float((p_cl - p_cr) @ x_n)
        tj = self.task_jacobians(y, n_l, n_r)
        J_phi, J_h = tj.J[4], tj.J[0]
        J_alpha, J_beta, J_gamma = tj.J[3], tj.J[1], tj.J[5]
        Lam = np.array([phi, h, roll, pitch, yaw])
        Lam_dot = np.array([J_phi @ y.vel, J_h @ y.vel, J_alpha @ y.vel,
                            J_beta @ y.vel, J_gamma @ y.vel])
        return TaskState(Lambda=Lam, Lambda_dot=Lam_dot, d_w=d_w,
                         p_cl=p_cl, p_cr=p_cr, gimbal=gimbal or tj.gimbal)

    def com_state(self, y: MinimalState, n_l: np.ndarray | None = None,
                  n_r: np.ndarray | None = None) -> ComState:
        """CoM position/velocity in heading (x) and vertical (z) axes.

        r is measured from the frame-N origin (contact midpoint); s is the
        absolute position.  The forward rate s_dot[0] is the CoM velocity
        along the current heading (the rotation of the heading axis itself
        is excluded: projecting the absolute position onto a turning axis
        would otherwise report a spurious forward rate proportional to the
        distance from the world origin).  Vertical normals are assumed when
        none are given.
        """
        ez = np.array([0.0, 0.0, 1.0])
        n_l = ez if n_l is None else n_l
        n_r = ez if n_r is None else n_r
        kc = self.kinematics(y)
        p_cl, p_cr = self.contact_points(y, n_l, n_r, kc)
        origin, x_n, hx, nh = self._frame_n(kc, p_cl, p_cr)
        p_com, M = kc.com()
        J_com = kc.com_jacobian() @ self.G
        J_mid = 0.5 * (kc.point_jacobian(SHANK_L, kc.o[WHEEL_L])
                       + kc.point_jacobian(SHANK_R, kc.o[WHEEL_R])) @ self.G
        Jx_n = self._x_n_jacobian(kc, x_n, hx, nh) @ self.G

        r_vec = p_com - origin
        r = np.array([r_vec @ x_n, r_vec[2]])
        s = np.array([p_com @ x_n, p_com[2]])
        u = y.vel
        dr_x = (x_n @ ((J_com - J_mid) @ u)) + (r_vec @ (Jx_n @ u))
        ds_x = x_n @ (J_com @ u)
        dz = float((J_com @ u)[2])
        dmid_z = float((J_mid @ u)[2])
        return ComState(r=r, s=s,
                        r_dot=np.array([dr_x, dz - dmid_z]),
                        s_dot=np.array([ds_x, dz]),
                        total_mass=M)

    def _x_n_jacobian(self, kc: KinematicsCache, x_n, hx, nh) -> np.ndarray:
        """d(x_N)/du as a 3x16 matrix (only base angular columns are nonzero)."""
        head = kc.R[BASE] @ np.array([1.0, 0.0, 0.0])
        P = np.diag([1.0, 1.0, 0.0])
        Jhead = -hat(head) @ kc.angular_jacobian(BASE)       # d(head)/du = omega x head
        return ((np.eye(3) - np.outer(x_n, x_n)) / nh) @ (P @ Jhead)

    def _task_rows(self, y: MinimalState, n_l: np.ndarray, n_r: np.ndarray):
        """Analytic 6x12 task Jacobian at y (rows: h, beta, r_com_x, alpha, phi, gamma)."""
        kc = self.kinematics(y)
        p_cl, p_cr = self.contact_points(y, n_l, n_r, kc)
        origin, x_n, hx, nh = self._frame_n(kc, p_cl, p_cr)
        ez = np.array([0.0, 0.0, 1.0])

        J_base = kc.point_jacobian(BASE, kc.o[BASE])
        J_wl = kc.point_jacobian(SHANK_L, kc.o[WHEEL_L])
        J_wr = kc.point_jacobian(SHANK_R, kc.o[WHEEL_R])
        J_mid = 0.5 * (J_wl + J_wr)
        Jx_n = self._x_n_jacobian(kc, x_n, hx, nh)

        # Height is measured against the contact midpoint, but the contacts are
        # an exogenous terrain measurement: only the base motion is differentiated
        # (their vertical motion is pinned by the rolling constraint anyway).
        J_h = ez @ J_base

        Einv, gimbal = euler_rates_from_omega(kc.R[BASE])
        Jw = kc.angular_jacobian(BASE)
        J_alpha = Einv[0] @ Jw
        J_beta = Einv[1] @ Jw
        J_gamma = Einv[2] @ Jw

        def theta_row(side: str, body: int):
            hip = kc.point_on_body(BASE, self._hip_origin[side])
            wc = kc.o[body]
            d = hip - wc
            a, b = float(d @ x_n), float(d[2])
            Jd = kc.point_jacobian(BASE, hip) - kc.point_jacobian(
                SHANK_L if side == "l" else SHANK_R, wc)
            Ja = x_n @ Jd + d @ Jx_n
            Jb = ez @ Jd
            return (b * Ja - a * Jb) / (a * a + b * b)

        J_phi = theta_row("l", WHEEL_L) - theta_row("r", WHEEL_R)

        p_com, _ = kc.com()
        J_com = kc.com_jacobian()
        r_vec = p_com - origin
        J_rx = x_n @ (J_com - J_mid) + r_vec @ Jx_n

        J16 = np.vstack([J_h, J_beta, J_rx, J_alpha, J_phi, J_gamma])
        return J16 @ self.G, gimbal

    def task_jacobians(self, y: MinimalState, n_l: np.ndarray, n_r: np.ndarray,
                       fd_eps: float = 1e-6) -> TaskJacobians:
        """Task rows and their Jdot*u_y terms.

        Jdot*u_y is obtained by central differencing of the analytic J along
        the current state flow.
        """
        J, gimbal = self._task_rows(y, n_l, n_r)
        u = y.vel
        if np.linalg.norm(u) < 1e-14:
            jdot_u = np.zeros(6)
        else:
            Jp, _ = self._task_rows(y.perturbed(u, fd_eps), n_l, n_r)
            Jm, _ = self._task_rows(y.perturbed(u, -fd_eps), n_l, n_r)
            jdot_u = ((Jp - Jm) / (2.0 * fd_eps)) @ u
        return TaskJacobians(J=J, Jdot_u=jdot_u, gimbal=gimbal)


def leg_ik(desc: RobotDescription, hip_to_wheel: np.ndarray) -> tuple[float, float]:
    """Hip and knee angle (q_hip, q_knee) placing the wheel center at the
    given offset from the hip joint, expressed in the base frame (x, z used).

    The knee folds backward (q_knee <= 0).
    """
    l1 = abs(float(desc.joints[1].origin[2]))
    l2 = abs(float(desc.joints[3].origin[2]))
    # positive rotation about +y moves the leg tip toward -x
    a, z = -float(hip_to_wheel[0]), float(hip_to_wheel[2])
    r2 = a * a + z * z
    c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if not -1.0 <= c2 <= 1.0:
        raise ValueError("wheel target out of reach of the leg")
    q_knee = -np.arccos(c2)
    q_hip = np.arctan2(a, -z) - np.arctan2(l2 * np.sin(q_knee), l1 + l2 * np.cos(q_knee))
    return float(q_hip), float(q_knee)
