"""Height-scheduled LQR balance gains for the wheel-pendulum model.

The pitch-plane balance model is a wheeled inverted pendulum linearized about
the upright; its gain is re-designed continuously as the CoM height changes
(crouching shortens the pendulum and speeds up the unstable pole).
"""

import numpy as np

from wbcsim.task_control import GainScheduler, lqr_gain, pendulum_state_matrices


def main():
    sched = GainScheduler()
    print("CoM height -> LQR gain row K and closed-loop poles:")
    for r_z in (0.10, 0.20, 0.30, 0.40):
        d = sched.gain(r_z)
        poles = np.linalg.eigvals(d.A - d.B @ d.K.reshape(1, -1))
        print(f"  r_z = {r_z:.2f}: K = {np.round(d.K, 2)}, "
              f"max Re(pole) = {poles.real.max():+.3f}")

    # the CARE solution certifies the design: residual of
    # A'P + PA - PB R^-1 B'P + Q at the returned P
    d = lqr_gain(0.25)
    res = (d.A.T @ d.P + d.P @ d.A
           - d.P @ d.B @ d.B.T @ d.P / d.R + d.Q)
    print(f"CARE residual at r_z = 0.25: {np.abs(res).max():.2e}")

    A, B = pendulum_state_matrices(0.25)
    ctrb = np.hstack([np.linalg.matrix_power(A, i) @ B for i in range(4)])
    print(f"open-loop poles all at the origin (integrator chain, not "
          f"asymptotically stable); controllability rank "
          f"{np.linalg.matrix_rank(ctrb)}/4")


if __name__ == "__main__":
    main()
