"""Scalar numeric kernels shared by the public modules.

Everything here works on plain floats and 1-D float64 arrays so the same
source runs under numba and as ordinary Python.  Parameter and controller
vectors use the index constants below; the public modules build them.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import kernel

TWO_PI = 2.0 * math.pi

# parameter vector layout
P_MP, P_L, P_LA, P_JA, P_JP, P_BA, P_BP, P_KU, P_G = range(9)
N_PARAMS = 9

# controller vector layout
(
    C_UMAX, C_MU, C_KP, C_KI, C_KD, C_ILIM,
    C_CATCH, C_RELEASE, C_OMEGA,
    C_KICK, C_KICK_OMEGA, C_KICK_ANGLE,
    C_A0, C_F0, C_A1, C_F1, C_A2, C_F2,
    C_K0, C_K1, C_K2, C_K3,
) = range(22)
N_CTRL = 22

POLICY_HYBRID, POLICY_LQR, POLICY_SWING, POLICY_DATAGEN_SWING, POLICY_DATAGEN_BALANCE = range(5)
MODE_SWING_UP, MODE_BALANCE = 0, 1

# episode log columns
(
    COL_T, COL_THETA, COL_ALPHA, COL_THETA_DOT, COL_ALPHA_DOT,
    COL_THETA_MEAS, COL_ALPHA_MEAS, COL_U_CMD, COL_U_SAT, COL_REWARD, COL_MODE,
) = range(11)
N_COLS = 11

STATUS_OK, STATUS_BLOWUP = 0, 1


@kernel
def wrap_angle(x):
    """Map an angle into (-pi, pi]."""
    w = x - TWO_PI * math.floor((x + math.pi) / TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    elif w > math.pi:
        w -= TWO_PI
    return w


@kernel
def sgn(x):
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


@kernel
def saturate(u, u_max):
    if u > u_max:
        return u_max
    if u < -u_max:
        return -u_max
    return u


@kernel
def derivative(theta, alpha, theta_dot, alpha_dot, u, p):
    # theta only enters through its derivative; kept in the signature for symmetry
    m = p[P_MP]
    jp = p[P_JP]
    j0 = p[P_JA] + m * p[P_LA] * p[P_LA]
    k = m * p[P_LA] * p[P_L]
    grav = m * p[P_G] * p[P_L]
    s = math.sin(alpha)
    c = math.cos(alpha)

    m11 = j0 + jp * s * s
    m12 = -k * c
    rhs1 = p[P_KU] * u - p[P_BA] * theta_dot - 2.0 * jp * s * c * theta_dot * alpha_dot - k * s * alpha_dot * alpha_dot
    rhs2 = -p[P_BP] * alpha_dot + jp * s * c * theta_dot * theta_dot + grav * s
    det = m11 * jp - m12 * m12
    theta_ddot = (jp * rhs1 - m12 * rhs2) / det
    alpha_ddot = (-m12 * rhs1 + m11 * rhs2) / det
    return theta_dot, alpha_dot, theta_ddot, alpha_ddot


@kernel
def rk4_step(theta, alpha, theta_dot, alpha_dot, u, dt, p):
    k1 = derivative(theta, alpha, theta_dot, alpha_dot, u, p)
    h = 0.5 * dt
    k2 = derivative(theta + h * k1[0], alpha + h * k1[1], theta_dot + h * k1[2], alpha_dot + h * k1[3], u, p)
    k3 = derivative(theta + h * k2[0], alpha + h * k2[1], theta_dot + h * k2[2], alpha_dot + h * k2[3], u, p)
    k4 = derivative(theta + dt * k3[0], alpha + dt * k3[1], theta_dot + dt * k3[2], alpha_dot + dt * k3[3], u, p)
    w = dt / 6.0
    return (
        theta + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        alpha + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        theta_dot + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        alpha_dot + w * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    )


@kernel
def is_finite4(x0, x1, x2, x3):
    return math.isfinite(x0) and math.isfinite(x1) and math.isfinite(x2) and math.isfinite(x3)


@kernel
def rk4_advance(x, u, dt, n_steps, p):
    """Integrate ``n_steps`` RK4 steps in place; returns the number completed before a blowup."""
    th, al, thd, ald = x[0], x[1], x[2], x[3]
    for i in range(n_steps):
        th, al, thd, ald = rk4_step(th, al, thd, ald, u, dt, p)
        if not is_finite4(th, al, thd, ald):
            x[0], x[1], x[2], x[3] = th, al, thd, ald
            return i
    x[0], x[1], x[2], x[3] = th, al, thd, ald
    return n_steps


@kernel
def pendulum_energy(alpha, alpha_dot, p):
    return 0.5 * p[P_JP] * alpha_dot * alpha_dot + p[P_MP] * p[P_G] * p[P_L] * math.cos(alpha)


@kernel
def mechanical_energy(alpha, theta_dot, alpha_dot, p):
    """Kinetic plus potential energy of arm and pendulum together."""
    m = p[P_MP]
    jp = p[P_JP]
    j0 = p[P_JA] + m * p[P_LA] * p[P_LA]
    k = m * p[P_LA] * p[P_L]
    s = math.sin(alpha)
    c = math.cos(alpha)
    kinetic = 0.5 * (j0 + jp * s * s) * theta_dot * theta_dot - k * c * theta_dot * alpha_dot + 0.5 * jp * alpha_dot * alpha_dot
    return kinetic + m * p[P_G] * p[P_L] * c


@kernel
def energy_trace(x, dt, n_steps, every, p):
    """Unforced integration recording the full mechanical energy every ``every`` steps."""
    n_out = n_steps // every + 1
    out = np.empty(n_out)
    th, al, thd, ald = x[0], x[1], x[2], x[3]
    out[0] = mechanical_energy(al, thd, ald, p)
    j = 1
    for i in range(1, n_steps + 1):
        th, al, thd, ald = rk4_step(th, al, thd, ald, 0.0, dt, p)
        if i % every == 0:
            out[j] = mechanical_energy(al, thd, ald, p)
            j += 1
    x[0], x[1], x[2], x[3] = th, al, thd, ald
    return out


@kernel
def swing_up_law(alpha, alpha_dot, energy, e0, mu):
    return mu * (e0 - energy) * sgn(alpha_dot * math.cos(alpha))


@kernel
def pid_update(kp, ki, kd, integral, prev_error, initialized, limit, error, dt):
    integral = integral + error * dt
    if integral > limit:
        integral = limit
    elif integral < -limit:
        integral = -limit
    d = (error - prev_error) / dt if initialized else 0.0
    return kp * error + ki * integral + kd * d, integral


@kernel
def lqr_law(k0, k1, k2, k3, theta, alpha, theta_dot, alpha_dot, theta_ref, alpha_ref, theta_dot_ref, alpha_dot_ref):
    e0 = wrap_angle(theta - theta_ref)
    e1 = wrap_angle(alpha - alpha_ref)
    return -(k0 * e0 + k1 * e1 + k2 * (theta_dot - theta_dot_ref) + k3 * (alpha_dot - alpha_dot_ref))


@kernel
def next_mode(mode, alpha, alpha_dot, catch, release, omega):
    aw = abs(wrap_angle(alpha))
    if mode == MODE_BALANCE:
        if aw > release:
            return MODE_SWING_UP
        return MODE_BALANCE
    if aw < catch and abs(alpha_dot) < omega:
        return MODE_BALANCE
    return MODE_SWING_UP


@kernel
def is_deadlocked(alpha, alpha_dot, c):
    return abs(alpha_dot) < c[C_KICK_OMEGA] and abs(wrap_angle(alpha)) > c[C_KICK_ANGLE]


@kernel
def velocity_update(prev, v, initialized, pos, dt, a):
    """One finite-difference + single-pole low-pass update; returns (new v, raw)."""
    if not initialized:
        return 0.0, 0.0
    raw = wrap_angle(pos - prev) / dt
    return v + a * (raw - v), raw


@kernel
def velocity_noise_trace(noise, f_s, a):
    """Filtered velocity of a static angle corrupted by ``noise`` (one sample per tick)."""
    n = noise.shape[0]
    out = np.empty(n)
    dt = 1.0 / f_s
    prev = 0.0
    v = 0.0
    for i in range(n):
        pos = wrap_angle(noise[i])
        v, _ = velocity_update(prev, v, i > 0, pos, dt, a)
        prev = pos
        out[i] = v
    return out


@kernel
def reward_value(theta, alpha):
    tw = abs(wrap_angle(theta))
    aw = abs(wrap_angle(alpha))
    # one division keeps the theta = alpha = 180 deg corner at exactly zero
    r = 1.0 - (4.0 * aw + tw) / (5.0 * math.pi)
    return r * r


@kernel
def run_episode_kernel(x0, p, c, policy, n_rows, f_s, n_sub, noise, measured, a_smooth, out):
    """Closed-loop episode.  Fills ``out`` row by row; returns (rows written, status)."""
    th, al, thd, ald = x0[0], x0[1], x0[2], x0[3]
    x = np.empty(4)
    dt_ctrl = 1.0 / f_s
    dt_phys = dt_ctrl / n_sub
    e0 = p[P_MP] * p[P_G] * p[P_L]
    u_max = c[C_UMAX]

    mode = MODE_SWING_UP
    if policy == POLICY_LQR or policy == POLICY_DATAGEN_BALANCE:
        mode = MODE_BALANCE
    kicks = 0
    integral = 0.0
    prev_err = 0.0
    pid_init = False
    f_prev_th = 0.0
    f_prev_al = 0.0
    v_th = 0.0
    v_al = 0.0
    f_init = False

    for k in range(n_rows):
        t = k * dt_ctrl
        if measured:
            th_m = wrap_angle(th + noise[k, 0])
            al_m = wrap_angle(al + noise[k, 1])
            v_th, _ = velocity_update(f_prev_th, v_th, f_init, th_m, dt_ctrl, a_smooth)
            v_al, _ = velocity_update(f_prev_al, v_al, f_init, al_m, dt_ctrl, a_smooth)
            f_prev_th = th_m
            f_prev_al = al_m
            f_init = True
            s_th, s_al, s_thd, s_ald = th_m, al_m, v_th, v_al
        else:
            th_m = math.nan
            al_m = math.nan
            s_th, s_al, s_thd, s_ald = th, al, thd, ald

        if policy == POLICY_HYBRID or policy == POLICY_DATAGEN_BALANCE:
            mode = next_mode(mode, s_al, s_ald, c[C_CATCH], c[C_RELEASE], c[C_OMEGA])
        elif policy == POLICY_LQR:
            mode = MODE_BALANCE
        else:
            mode = MODE_SWING_UP

        if mode == MODE_BALANCE:
            if policy == POLICY_DATAGEN_BALANCE:
                th_ref = c[C_A2] * math.sin(TWO_PI * c[C_F2] * t)
                u = lqr_law(c[C_K0], c[C_K1], c[C_K2], c[C_K3], s_th, s_al, s_thd, s_ald, th_ref, 0.0, 0.0, 0.0)
                u += c[C_A1] * math.sin(TWO_PI * c[C_F1] * t)
            else:
                u = lqr_law(c[C_K0], c[C_K1], c[C_K2], c[C_K3], s_th, s_al, s_thd, s_ald, 0.0, 0.0, 0.0, 0.0)
        elif is_deadlocked(s_al, s_ald, c):
            u = c[C_KICK] if kicks % 2 == 0 else -c[C_KICK]
            kicks += 1
        else:
            energy = pendulum_energy(s_al, s_ald, p)
            u = swing_up_law(s_al, s_ald, energy, e0, c[C_MU])
            if policy == POLICY_DATAGEN_SWING:
                th_ref = c[C_A0] * math.sin(TWO_PI * c[C_F0] * t)
                err = wrap_angle(th_ref - s_th)
                u_pid, integral = pid_update(c[C_KP], c[C_KI], c[C_KD], integral, prev_err, pid_init, c[C_ILIM], err, dt_ctrl)
                prev_err = err
                pid_init = True
                u += u_pid
        u_sat = saturate(u, u_max)

        row = out[k]
        row[COL_T] = t
        row[COL_THETA] = wrap_angle(th)
        row[COL_ALPHA] = wrap_angle(al)
        row[COL_THETA_DOT] = thd
        row[COL_ALPHA_DOT] = ald
        row[COL_THETA_MEAS] = th_m
        row[COL_ALPHA_MEAS] = al_m
        row[COL_U_CMD] = u
        row[COL_U_SAT] = u_sat
        row[COL_REWARD] = reward_value(th, al)
        row[COL_MODE] = mode

        x[0], x[1], x[2], x[3] = th, al, thd, ald
        done = rk4_advance(x, u_sat, dt_phys, n_sub, p)
        th, al, thd, ald = x[0], x[1], x[2], x[3]
        if done < n_sub:
            return k + 1, STATUS_BLOWUP
    return n_rows, STATUS_OK
