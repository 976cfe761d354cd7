"""Spanning-tree and closed-loop equations of motion, ground contact model.

The tree EoM is  H(q) udot + C(q, u) = S^T tau_a + tau_gc  with 16
velocity coordinates; reduction through the loop-closure Jacobian G gives
the 12-dimensional closed-loop form H_y = G^T H G, C_y = G^T C.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from .rotations import cross3

from .model import (
    KinematicsCache,
    MinimalState,
    RobotModel,
    SpanningTreeState,
    SHANK_L,
    SHANK_R,
    WHEEL_L,
    WHEEL_R,
    NV_TREE,
    NV_MIN,
)

GRAVITY = 9.81


@dataclass
class SpanningTreeDynamics:
    H: np.ndarray                # 16x16 generalized inertia
    C: np.ndarray                # 16 bias (Coriolis + centripetal + gravity)


@dataclass
class ContactModel:
    n_l: np.ndarray
    n_r: np.ndarray
    frame_l: np.ndarray          # columns (x, y, z), z = ground normal
    frame_r: np.ndarray
    C_F: np.ndarray              # 2x4 velocity-dependent friction coefficients


@dataclass
class ClosedLoopDynamics:
    H_y: np.ndarray              # 12x12
    C_y: np.ndarray              # 12
    G: np.ndarray                # 16x12
    J_gc: np.ndarray             # 16x4 contact map (tree coordinates)
    J_x: np.ndarray              # 2x12, row 0 left wheel, row 1 right
    J_y: np.ndarray
    J_z: np.ndarray
    Jdot_xz_u: np.ndarray        # (4,) bias accelerations, order (x_l, z_l, x_r, z_r)
    contact: ContactModel
    p_cl: np.ndarray
    p_cr: np.ndarray

    @property
    def J_xz(self) -> np.ndarray:
        """4x12 stacked rolling-constraint rows in F_C order (x_l, z_l, x_r, z_r)."""
        return np.vstack([self.J_x[0], self.J_z[0], self.J_x[1], self.J_z[1]])


def spanning_tree_dynamics(kc: KinematicsCache, gravity: float = GRAVITY) -> SpanningTreeDynamics:
    """H via composite inertia assembly, C via Newton-Euler at zero acceleration."""
    desc = kc.desc
    g_vec = np.array([0.0, 0.0, -gravity])
    H = np.zeros((NV_TREE, NV_TREE))
    C = np.zeros(NV_TREE)
    for b, body in enumerate(desc.bodies):
        com = kc.com_of_body(b)
        Jv = kc.point_jacobian(b, com)
        Jw = kc.angular_jacobian(b)
        R = kc.R[b]
        I_w = R @ body.inertia @ R.T
        H += body.mass * (Jv.T @ Jv) + Jw.T @ I_w @ Jw
        a_bias = kc.point_bias_acc(b, com)
        w = kc.omega[b]
        f = body.mass * (a_bias - g_vec)
        n = I_w @ kc.omega_dot_bias[b] + cross3(w, I_w @ w)
        C += Jv.T @ f + Jw.T @ n
    return SpanningTreeDynamics(H=H, C=C)


def contact_frame(n: np.ndarray, heading: np.ndarray) -> np.ndarray:
    """Orthonormal triad (columns x, y, z) with z = n and x the in-plane heading."""
    n = np.asarray(n, dtype=float)
    if not np.isclose(np.linalg.norm(n), 1.0, atol=1e-6) or n[2] <= 0.0:
        raise ValueError("normal must be unit length and upward")
    t = heading - (heading @ n) * n
    nt = np.linalg.norm(t)
    if nt < 1e-8:
        raise ValueError("heading parallel to the ground normal")
    x = t / nt
    y = cross3(n, x)
    return np.column_stack([x, y, n])


def friction_matrix(v_lat: np.ndarray, mu: float = 0.8, v_ref: float = 0.05) -> np.ndarray:
    """Saturated-linear lateral friction coefficients C_F (2x4).

    Per wheel i the lateral force is F_y,i = c_i * F_z,i with
    c_i = -mu * clamp(v_y,i / v_ref, -1, 1); c_i sits in wheel i's row at
    that wheel's z-force column of F_C = (F_x_l, F_z_l, F_x_r, F_z_r).
    """
    if mu < 0.0 or v_ref <= 0.0:
        raise ValueError("require mu >= 0 and v_ref > 0")
    c = -mu * np.clip(np.asarray(v_lat, dtype=float) / v_ref, -1.0, 1.0)
    C_F = np.zeros((2, 4))
    C_F[0, 1] = c[0]
    C_F[1, 3] = c[1]
    return C_F


def closed_loop_dynamics(model: RobotModel, y: MinimalState,
                         n_l: np.ndarray, n_r: np.ndarray,
                         gravity: float = GRAVITY,
                         mu: float = 0.8, v_ref: float = 0.05,
                         kc: KinematicsCache | None = None) -> ClosedLoopDynamics:
    """Reduce the tree EoM through G and build the ground-contact map.

    Contact Jacobians are taken at the wheel material point currently at the
    contact location (they include the wheel spin), expressed in the contact
    frame axes.
    """
    if kc is None:
        kc = model.kinematics(y)
    G = model.G
    dyn = spanning_tree_dynamics(kc, gravity)
    H_y = G.T @ dyn.H @ G
    C_y = G.T @ dyn.C

    p_cl, p_cr = model.contact_points(y, n_l, n_r, kc)
    head = kc.R[0] @ np.array([1.0, 0.0, 0.0])
    F_l = contact_frame(n_l, head)
    F_r = contact_frame(n_r, head)

    J_l16 = kc.point_jacobian(WHEEL_L, p_cl)
    J_r16 = kc.point_jacobian(WHEEL_R, p_cr)
    J_x = np.vstack([F_l[:, 0] @ J_l16, F_r[:, 0] @ J_r16]) @ G
    J_y = np.vstack([F_l[:, 1] @ J_l16, F_r[:, 1] @ J_r16]) @ G
    J_z = np.vstack([F_l[:, 2] @ J_l16, F_r[:, 2] @ J_r16]) @ G

    v_lat = np.array([F_l[:, 1] @ kc.point_velocity(WHEEL_L, p_cl),
                      F_r[:, 1] @ kc.point_velocity(WHEEL_R, p_cr)])
    C_F = friction_matrix(v_lat, mu, v_ref)

    # J_gc in tree coordinates: (J^{x,z})^T + (J^y)^T C_F, F_C = (x_l, z_l, x_r, z_r)
    J_xz16 = np.vstack([F_l[:, 0] @ J_l16, F_l[:, 2] @ J_l16,
                        F_r[:, 0] @ J_r16, F_r[:, 2] @ J_r16])
    J_y16 = np.vstack([F_l[:, 1] @ J_l16, F_r[:, 1] @ J_r16])
    J_gc = J_xz16.T + J_y16.T @ C_F

    # Constraint rows are e^T (v_center + omega_wheel x (-r n)) with a fixed
    # lever (-r n), so the drift term has no centripetal part over the lever;
    # the x-axis itself rotates with the projected heading, adding edot^T v.
    wc_l, wc_r = kc.wheel_centers()
    a_l = (kc.point_bias_acc(SHANK_L, wc_l)
           + cross3(kc.omega_dot_bias[WHEEL_L], p_cl - wc_l))
    a_r = (kc.point_bias_acc(SHANK_R, wc_r)
           + cross3(kc.omega_dot_bias[WHEEL_R], p_cr - wc_r))

    def x_axis_rate(F, n):
        t = head - (head @ n) * n
        tdot = cross3(kc.omega[0], head)
        tdot = tdot - (tdot @ n) * n
        x = F[:, 0]
        return (tdot - (x @ tdot) * x) / np.linalg.norm(t)

    v_l = kc.point_velocity(WHEEL_L, p_cl)
    v_r = kc.point_velocity(WHEEL_R, p_cr)
    Jdot_xz_u = np.array([
        F_l[:, 0] @ a_l + x_axis_rate(F_l, np.asarray(n_l, float)) @ v_l,
        F_l[:, 2] @ a_l,
        F_r[:, 0] @ a_r + x_axis_rate(F_r, np.asarray(n_r, float)) @ v_r,
        F_r[:, 2] @ a_r,
    ])

    contact = ContactModel(n_l=np.asarray(n_l, float), n_r=np.asarray(n_r, float),
                           frame_l=F_l, frame_r=F_r, C_F=C_F)
    return ClosedLoopDynamics(H_y=H_y, C_y=C_y, G=G.copy(), J_gc=J_gc,
                              J_x=J_x, J_y=J_y, J_z=J_z, Jdot_xz_u=Jdot_xz_u,
                              contact=contact, p_cl=p_cl, p_cr=p_cr)


def mechanical_energy(kc: KinematicsCache, gravity: float = GRAVITY) -> float:
    """Kinetic + gravitational potential energy of the current state."""
    dyn = spanning_tree_dynamics(kc, gravity)
    u = kc.state.vel
    kinetic = 0.5 * u @ dyn.H @ u
    potential = sum(b.mass * gravity * kc.com_of_body(i)[2]
                    for i, b in enumerate(kc.desc.bodies))
    return float(kinetic + potential)
