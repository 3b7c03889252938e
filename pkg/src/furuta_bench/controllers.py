"""Runtime control laws: energy swing-up, PID, LQR, saturation and the hybrid switch.

All controllers are values; anything stateful (PID integrator, hybrid mode)
is passed in and returned explicitly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import IntEnum

import numpy as np

from . import _kernels as K
from .dynamics import PendulumParams, State, total_energy, upright_energy
from .errors import ConfigError


class HybridMode(IntEnum):
    SWING_UP = K.MODE_SWING_UP
    BALANCE = K.MODE_BALANCE


@dataclass(frozen=True)
class ControllerConfig:
    """Gains, thresholds and data-generation signals.  Angles in degrees, voltages in volts."""

    u_max: float = 10.0
    mu: float = 1.0
    k_p: float = 0.5
    k_i: float = 0.5
    k_d: float = 0.05
    integral_limit: float = 2.0
    alpha_catch_deg: float = 15.0
    alpha_release_deg: float = 25.0
    omega_catch: float = 5.0
    kick_voltage: float | None = None
    kick_omega: float = 1e-3
    kick_angle_deg: float = 170.0
    swing_ref_amp_deg: float = 60.0
    swing_ref_freq: float = 0.05
    osc_amp: float = 28.0
    osc_freq: float = 2.4
    balance_ref_amp_deg: float = 30.0
    balance_ref_freq: float = 0.03

    def __post_init__(self):
        if not self.u_max > 0:
            raise ConfigError("u_max must be positive")
        if not self.alpha_release_deg > self.alpha_catch_deg > 0:
            raise ConfigError("need alpha_release_deg > alpha_catch_deg > 0")
        if self.integral_limit < 0 or self.mu < 0:
            raise ConfigError("mu and integral_limit must be non-negative")

    @property
    def kick(self) -> float:
        return self.u_max / 2 if self.kick_voltage is None else self.kick_voltage

    @classmethod
    def from_dict(cls, doc: dict) -> "ControllerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown controller settings: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def vector(self, gain) -> np.ndarray:
        """Pack into the layout the episode kernel expects."""
        c = np.zeros(K.N_CTRL)
        c[K.C_UMAX] = self.u_max
        c[K.C_MU] = self.mu
        c[K.C_KP], c[K.C_KI], c[K.C_KD] = self.k_p, self.k_i, self.k_d
        c[K.C_ILIM] = self.integral_limit
        c[K.C_CATCH] = math.radians(self.alpha_catch_deg)
        c[K.C_RELEASE] = math.radians(self.alpha_release_deg)
        c[K.C_OMEGA] = self.omega_catch
        c[K.C_KICK] = self.kick
        c[K.C_KICK_OMEGA] = self.kick_omega
        c[K.C_KICK_ANGLE] = math.radians(self.kick_angle_deg)
        c[K.C_A0] = math.radians(self.swing_ref_amp_deg)
        c[K.C_F0] = self.swing_ref_freq
        c[K.C_A1] = self.osc_amp
        c[K.C_F1] = self.osc_freq
        c[K.C_A2] = math.radians(self.balance_ref_amp_deg)
        c[K.C_F2] = self.balance_ref_freq
        c[K.C_K0:K.C_K3 + 1] = np.asarray(gain, dtype=float).reshape(4)
        return c


def swing_up(s: State, mu: float, p: PendulumParams) -> float:
    """Energy pumping, ``mu (E0 - E) sgn(alpha_dot cos alpha)``; not saturated."""
    return K.swing_up_law(float(s.alpha), float(s.alpha_dot), total_energy(s, p), upright_energy(p), float(mu))


def saturate(u: float, u_max: float) -> float:
    if not u_max > 0:
        raise ValueError("u_max must be positive")
    return K.saturate(float(u), float(u_max))


def lqr_control(gain, x: State, x_ref: State | None = None) -> float:
    """``-K (x - x_ref)`` with both angle differences wrapped into (-pi, pi]."""
    k = np.asarray(gain, dtype=float).reshape(4)
    r = State.upright() if x_ref is None else x_ref
    return K.lqr_law(k[0], k[1], k[2], k[3], float(x.theta), float(x.alpha), float(x.theta_dot), float(x.alpha_dot),
                     float(r.theta), float(r.alpha), float(r.theta_dot), float(r.alpha_dot))


@dataclass(frozen=True)
class PidState:
    k_p: float
    k_i: float
    k_d: float
    integral: float = 0.0
    prev_error: float = 0.0
    integral_limit: float = 2.0
    initialized: bool = False


def pid_step(pid: PidState, error: float, dt: float) -> tuple[float, PidState]:
    """Rectangular integration; no derivative kick on the first sample."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    u, integral = K.pid_update(pid.k_p, pid.k_i, pid.k_d, pid.integral, pid.prev_error, pid.initialized,
                               pid.integral_limit, float(error), float(dt))
    return u, replace(pid, integral=integral, prev_error=float(error), initialized=True)


@dataclass(frozen=True)
class HybridContext:
    gain: np.ndarray
    params: PendulumParams
    config: ControllerConfig = field(default_factory=ControllerConfig)


@dataclass(frozen=True)
class HybridState:
    mode: HybridMode = HybridMode.SWING_UP
    kicks: int = 0


def hybrid_policy(s: State, ctx: HybridContext, prev: HybridState | None = None) -> tuple[float, HybridState]:
    """Swing-up / LQR switch with hysteresis; returns the saturated command and the next state."""
    prev = HybridState() if prev is None else prev
    cfg = ctx.config
    mode = HybridMode(K.next_mode(int(prev.mode), float(s.alpha), float(s.alpha_dot),
                                  math.radians(cfg.alpha_catch_deg), math.radians(cfg.alpha_release_deg), cfg.omega_catch))
    kicks = prev.kicks
    if mode is HybridMode.BALANCE:
        u = lqr_control(ctx.gain, s)
    elif K.is_deadlocked(float(s.alpha), float(s.alpha_dot), cfg.vector(ctx.gain)):
        u = cfg.kick if kicks % 2 == 0 else -cfg.kick
        kicks += 1
    else:
        u = swing_up(s, cfg.mu, ctx.params)
    return saturate(u, cfg.u_max), HybridState(mode, kicks)
