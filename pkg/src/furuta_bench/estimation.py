"""Angle encoding, velocity recovery and the measurement-noise model.

Random numbers come from numpy's PCG64 bit generator seeded through
``SeedSequence(seed, spawn_key=(trial, stream))``; normal deviates use
``Generator.standard_normal`` (ziggurat).  Both are fixed so corruption
sequences are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .dynamics import State
from .errors import DegenerateEncodingError

_MIN_NORM = 1e-6
NOISE_STREAM = 1


class AngleEncoding(NamedTuple):
    c_theta: float
    s_theta: float
    c_alpha: float
    s_alpha: float


def encode_angles(theta: float, alpha: float) -> AngleEncoding:
    return AngleEncoding(math.cos(theta), math.sin(theta), math.cos(alpha), math.sin(alpha))


def _pair_angle(c: float, s: float) -> float:
    if math.hypot(c, s) <= _MIN_NORM:
        raise DegenerateEncodingError(f"cannot decode near-zero pair ({c}, {s})")
    # atan2 returns [-pi, pi]; fold -pi onto +pi
    return K.wrap_angle(math.atan2(s, c))


def decode_angles(e: AngleEncoding) -> tuple[float, float]:
    return _pair_angle(e.c_theta, e.s_theta), _pair_angle(e.c_alpha, e.s_alpha)


@dataclass(frozen=True)
class VelocityFilterState:
    prev_theta: float = 0.0
    prev_alpha: float = 0.0
    v_theta: float = 0.0
    v_alpha: float = 0.0
    initialized: bool = False


def velocity_step(f: VelocityFilterState, theta: float, alpha: float, dt: float, a: float):
    """Finite difference of wrapped positions followed by ``v <- v + a (raw - v)``.

    Returns ``(new_state, v_theta, v_alpha)``.  The first call only stores
    the positions and reports zero velocity.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not 0 < a <= 1:
        raise ValueError("smoothing factor must be in (0, 1]")
    theta = K.wrap_angle(float(theta))
    alpha = K.wrap_angle(float(alpha))
    v_theta, _ = K.velocity_update(f.prev_theta, f.v_theta, f.initialized, theta, dt, a)
    v_alpha, _ = K.velocity_update(f.prev_alpha, f.v_alpha, f.initialized, alpha, dt, a)
    return VelocityFilterState(theta, alpha, v_theta, v_alpha, True), v_theta, v_alpha


@dataclass(frozen=True)
class NoiseModel:
    sigma_deg: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma_deg >= 0:
            raise ValueError("sigma_deg must be non-negative")

    @property
    def sigma_rad(self) -> float:
        return math.radians(self.sigma_deg)

    def rng(self, trial: int = 0) -> np.random.Generator:
        return make_rng(self.seed, trial, NOISE_STREAM)

    def angle_noise(self, n: int, trial: int = 0) -> np.ndarray:
        """``n`` rows of (theta, alpha) noise in radians, drawn in the same order as repeated corrupt_measurement calls."""
        return self.rng(trial).standard_normal((n, 2)) * self.sigma_rad


def make_rng(seed: int, trial: int = 0, stream: int = 0) -> np.random.Generator:
    """Independent generator per (seed, trial, stream)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(trial), int(stream)))))


def corrupt_measurement(s: State, n: NoiseModel, rng: np.random.Generator) -> tuple[float, float]:
    """Add independent zero-mean Gaussian noise to both angles; velocities are left alone."""
    d = rng.standard_normal(2) * n.sigma_rad
    return s.theta + d[0], s.alpha + d[1]


def velocity_noise(sigma_deg: float, f_s: float, n: int, seed: int = 0, a: float = 1.0) -> np.ndarray:
    """Velocity estimates of a static state measured through the noise model."""
    noise = NoiseModel(sigma_deg, seed).rng().standard_normal(n) * math.radians(sigma_deg)
    return K.velocity_noise_trace(noise, float(f_s), float(a))
