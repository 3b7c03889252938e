"""Furuta pendulum baseline control stack: simulation, LQR design, swing-up and robustness experiments."""

from ._accel import backend
from .control_design import LinearModel, LqrDesign, design_lqr, is_hurwitz, lqr_gain, solve_care
from .controllers import ControllerConfig, HybridMode, hybrid_policy, lqr_control, pid_step, saturate, swing_up
from .dynamics import PendulumParams, State, dynamics_derivative, linearize, load_params, step, total_energy, upright_energy
from .errors import FurutaError
from .experiments import EpisodeLog, Setup, reward, run_episode, success_criterion

__version__ = "0.1.0"

__all__ = [
    "ControllerConfig", "EpisodeLog", "FurutaError", "HybridMode", "LinearModel", "LqrDesign", "PendulumParams",
    "Setup", "State", "backend", "design_lqr", "dynamics_derivative", "hybrid_policy", "is_hurwitz", "linearize",
    "load_params", "lqr_control", "lqr_gain", "pid_step", "reward", "run_episode", "saturate", "solve_care", "step",
    "success_criterion", "swing_up", "total_energy", "upright_energy",
]
