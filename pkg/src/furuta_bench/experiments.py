"""Closed-loop episodes, reward, data-generation laws, robustness sweeps and dataset collection."""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .controllers import ControllerConfig, HybridContext, HybridMode, PidState, lqr_control, pid_step, saturate, swing_up
from .dynamics import PendulumParams, State, wrap_angle
from .estimation import NoiseModel, make_rng

POLICIES = {
    "hybrid": K.POLICY_HYBRID,
    "lqr": K.POLICY_LQR,
    "lqr-only": K.POLICY_LQR,
    "swing": K.POLICY_SWING,
    "swing-only": K.POLICY_SWING,
    "datagen-swing": K.POLICY_DATAGEN_SWING,
    "datagen-balance": K.POLICY_DATAGEN_BALANCE,
}

LOG_HEADER = "t,theta,alpha,theta_dot,alpha_dot,theta_meas,alpha_meas,u_cmd,u_sat,reward,mode"
DATASET_HEADER = "t,theta,alpha,theta_dot,alpha_dot,u_sat"
MODE_NAMES = {int(HybridMode.SWING_UP): "SwingUp", int(HybridMode.BALANCE): "Balance"}
SUCCESS_RATE = 0.9


def worker_count() -> int:
    raw = os.environ.get("FURUTA_BENCH_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class Setup:
    """Everything an episode needs besides its initial state and seed."""

    params: PendulumParams
    controller: ControllerConfig
    gain: np.ndarray
    f_s: float = 120.0
    substeps: int = 4
    max_substep: float = 1.0 / 480.0
    smoothing: float = 0.5

    def substeps_for(self, f_s: float) -> int:
        # long control periods still integrate with short physics steps
        return max(int(self.substeps), math.ceil(1.0 / (f_s * self.max_substep) - 1e-9))

    def context(self) -> HybridContext:
        return HybridContext(np.asarray(self.gain, dtype=float), self.params, self.controller)


def reward(s: State) -> float:
    """``(1 - 4/5 |alpha|/180deg - 1/5 |theta|/180deg)^2`` on wrapped angles."""
    return K.reward_value(float(s.theta), float(s.alpha))


def swing_reference(t: float, cfg: ControllerConfig) -> float:
    return math.radians(cfg.swing_ref_amp_deg) * math.sin(2 * math.pi * cfg.swing_ref_freq * t)


def balance_reference(t: float, cfg: ControllerConfig) -> State:
    return State(math.radians(cfg.balance_ref_amp_deg) * math.sin(2 * math.pi * cfg.balance_ref_freq * t), 0.0, 0.0, 0.0)


def oscillation(t: float, cfg: ControllerConfig) -> float:
    return cfg.osc_amp * math.sin(2 * math.pi * cfg.osc_freq * t)


def datagen_swing(t: float, s: State, ctx: HybridContext, pid: PidState | None = None, dt: float = 1 / 120):
    """Swing-up plus PID tracking of the slow arm reference; returns ``(u_sat, pid)``.

    The PID acts on ``theta_ref - theta`` so that a positive gain pulls the
    arm toward the reference for a positive input gain.
    """
    cfg = ctx.config
    if pid is None:
        pid = PidState(cfg.k_p, cfg.k_i, cfg.k_d, integral_limit=cfg.integral_limit)
    u_pid, pid = pid_step(pid, wrap_angle(swing_reference(t, cfg) - s.theta), dt)
    return saturate(swing_up(s, cfg.mu, ctx.params) + u_pid, cfg.u_max), pid


def datagen_balance(t: float, s: State, ctx: HybridContext) -> float:
    cfg = ctx.config
    return saturate(lqr_control(ctx.gain, s, balance_reference(t, cfg)) + oscillation(t, cfg), cfg.u_max)


@dataclass
class EpisodeLog:
    data: np.ndarray
    f_s: float
    measured: bool
    policy: str
    failed: bool = False

    def __len__(self) -> int:
        return self.data.shape[0]

    def column(self, idx: int) -> np.ndarray:
        return self.data[:, idx]

    t = property(lambda self: self.data[:, K.COL_T])
    theta = property(lambda self: self.data[:, K.COL_THETA])
    alpha = property(lambda self: self.data[:, K.COL_ALPHA])
    theta_dot = property(lambda self: self.data[:, K.COL_THETA_DOT])
    alpha_dot = property(lambda self: self.data[:, K.COL_ALPHA_DOT])
    u_cmd = property(lambda self: self.data[:, K.COL_U_CMD])
    u_sat = property(lambda self: self.data[:, K.COL_U_SAT])
    reward = property(lambda self: self.data[:, K.COL_REWARD])
    mode = property(lambda self: self.data[:, K.COL_MODE].astype(int))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(LOG_HEADER + "\n")
        for row in self.data:
            cells = []
            for j, v in enumerate(row):
                if j == K.COL_MODE:
                    cells.append(MODE_NAMES[int(v)])
                elif j in (K.COL_THETA_MEAS, K.COL_ALPHA_MEAS) and not self.measured:
                    cells.append("")
                else:
                    cells.append(f"{v:.9g}")
            buf.write(",".join(cells) + "\n")
        if self.failed:
            buf.write("# integration blowup\n")
        return buf.getvalue()


def run_episode(
    setup: Setup,
    policy: str,
    x0: State,
    duration: float,
    f_s: float | None = None,
    noise: NoiseModel | None = None,
    trial: int = 0,
) -> EpisodeLog:
    """Simulate one closed-loop run.

    With ``noise`` given the controller sees corrupted angles and filtered
    finite-difference velocities; without it, the true simulator state.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; choose from {sorted(POLICIES)}")
    f_s = setup.f_s if f_s is None else float(f_s)
    n_rows = int(round(duration * f_s))
    if not 0 < n_rows <= 10**7:
        raise ValueError(f"episode of {n_rows} rows is out of range")
    measured = noise is not None
    noise_arr = noise.angle_noise(n_rows, trial) if measured else np.zeros((0, 2))
    out = np.empty((n_rows, K.N_COLS))
    written, status = K.run_episode_kernel(
        np.asarray(x0, dtype=float), setup.params.as_array(), setup.controller.vector(setup.gain),
        POLICIES[policy], n_rows, f_s, setup.substeps_for(f_s), noise_arr, measured, float(setup.smoothing), out,
    )
    return EpisodeLog(out[:written].copy(), f_s, measured, policy, failed=status != K.STATUS_OK)


def success_criterion(log: EpisodeLog, hold: float = 3.0, threshold_deg: float = 10.0) -> bool:
    """Pendulum within ``threshold_deg`` of upright for the final ``hold`` seconds."""
    n = int(round(hold * log.f_s))
    if log.failed or n <= 0 or len(log) < n:
        return False
    return bool(np.all(np.abs(log.alpha[-n:]) < math.radians(threshold_deg)))


def settling_time(log: EpisodeLog, threshold_deg: float) -> float:
    """Time after which ``|alpha|`` stays below the threshold (inf if it never settles)."""
    outside = np.flatnonzero(np.abs(log.alpha) >= math.radians(threshold_deg))
    if log.failed or (outside.size and outside[-1] == len(log) - 1):
        return math.inf
    return 0.0 if outside.size == 0 else float(log.t[outside[-1] + 1])


def jittered(base: State, rng: np.random.Generator, angle_deg: float, rate: float) -> State:
    d = rng.uniform(-1.0, 1.0, 4) * [math.radians(angle_deg), math.radians(angle_deg), rate, rate]
    return State(*(np.asarray(base) + d))


@dataclass(frozen=True)
class SweepResult:
    param: float
    trials: int
    successes: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    def to_dict(self) -> dict:
        return {"param": self.param, "trials": self.trials, "successes": self.successes, "success_rate": self.success_rate}


def _map(fn, tasks):
    tasks = list(tasks)
    workers = min(worker_count(), len(tasks)) or 1
    if workers == 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _aggregate(values, outcomes, trials) -> list[SweepResult]:
    # outcomes arrive as (param index, trial, ok); order-independent count
    counts = [0] * len(values)
    for j, _, ok in sorted(outcomes):
        counts[j] += bool(ok)
    return [SweepResult(float(v), trials, counts[j]) for j, v in enumerate(values)]


@dataclass(frozen=True)
class SweepSettings:
    trials: int = 20
    seed: int = 0
    hold: float = 3.0
    jitter_angle_deg: float = 1.0
    jitter_rate: float = 0.05
    noise_duration: float = 10.0
    noise_success_deg: float = 10.0
    frequency_duration: float = 5.0
    frequency_success_deg: float = 2.0
    frequency_alpha0_deg: float = 10.0


def noise_sweep(setup: Setup, sigmas, settings: SweepSettings = SweepSettings()):
    """Hybrid swing-up + balance through the measured path at each noise level.

    Returns ``(results, sigma_star)`` where ``sigma_star`` is the largest grid
    value whose success rate is at least 0.9 (None if none is).
    """
    sigmas = [float(s) for s in sigmas]
    if sigmas != sorted(sigmas):
        raise ValueError("noise levels must be sorted ascending")

    def one(task):
        j, trial = task
        rng = make_rng(settings.seed, trial)
        x0 = jittered(State.hanging(), rng, settings.jitter_angle_deg, settings.jitter_rate)
        noise = NoiseModel(sigmas[j], settings.seed)
        log = run_episode(setup, "hybrid", x0, settings.noise_duration, noise=noise, trial=trial)
        return j, trial, success_criterion(log, settings.hold, settings.noise_success_deg)

    outcomes = _map(one, [(j, k) for j in range(len(sigmas)) for k in range(settings.trials)])
    results = _aggregate(sigmas, outcomes, settings.trials)
    passing = [r.param for r in results if r.success_rate >= SUCCESS_RATE]
    return results, (max(passing) if passing else None)


def frequency_sweep(setup: Setup, freqs, settings: SweepSettings = SweepSettings()):
    """Noise-free LQR balancing from ``|alpha0| = 10deg`` at each sample rate.

    Returns ``(results, fs_min)`` with ``fs_min`` the smallest rate whose
    success rate is at least 0.9 (None if none is).
    """
    freqs = [float(f) for f in freqs]

    def one(task):
        j, trial = task
        rng = make_rng(settings.seed, trial)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        base = State(0.0, sign * math.radians(settings.frequency_alpha0_deg), 0.0, 0.0)
        jit = jittered(State.upright(), rng, settings.jitter_angle_deg, settings.jitter_rate)
        x0 = State(jit.theta, base.alpha, jit.theta_dot, jit.alpha_dot)
        log = run_episode(setup, "lqr", x0, settings.frequency_duration, f_s=freqs[j])
        return j, trial, success_criterion(log, settings.hold, settings.frequency_success_deg)

    outcomes = _map(one, [(j, k) for j in range(len(freqs)) for k in range(settings.trials)])
    results = _aggregate(freqs, outcomes, settings.trials)
    passing = [r.param for r in results if r.success_rate >= SUCCESS_RATE]
    return results, (min(passing) if passing else None)


def is_monotone(results, decreasing: bool, z: float = 2.0) -> bool:
    """Success rates move in one direction up to ``z`` pooled binomial standard errors."""
    for a, b in zip(results, results[1:]):
        step = b.success_rate - a.success_rate
        if decreasing:
            step = -step
        pooled = (a.successes + b.successes) / (a.trials + b.trials)
        se = math.sqrt(pooled * (1 - pooled) * (1 / a.trials + 1 / b.trials))
        if step < -z * se - 1e-12:
            return False
    return True


def tune_mu(setup: Setup, factors=(1, 2, 5, 10, 20, 50, 100), duration: float = 10.0, hold: float = 3.0):
    """Smallest ``factor * u_max / E0`` that swings up from hanging rest within ``duration``."""
    from dataclasses import replace

    from .dynamics import upright_energy

    base = setup.controller.u_max / upright_energy(setup.params)
    for f in factors:
        trial = replace(setup, controller=replace(setup.controller, mu=f * base))
        if success_criterion(run_episode(trial, "hybrid", State.hanging(), duration), hold):
            return f * base, f
    return None, None


@dataclass
class StateHistogram:
    bin_deg: float
    counts: np.ndarray
    edges_deg: np.ndarray = field(repr=False)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_samples(cls, theta, alpha, bin_deg: float) -> "StateHistogram":
        n_bins = int(round(360.0 / bin_deg))
        edges = np.linspace(-180.0, 180.0, n_bins + 1)
        counts, _, _ = np.histogram2d(np.degrees(theta), np.degrees(alpha), bins=[edges, edges])
        return cls(float(bin_deg), counts.astype(np.int64), edges)

    def to_dict(self) -> dict:
        return {
            "bin_deg": self.bin_deg,
            "theta_edges_deg": self.edges_deg.tolist(),
            "alpha_edges_deg": self.edges_deg.tolist(),
            "counts": self.counts.tolist(),
            "total": self.total,
        }


@dataclass(frozen=True)
class DatasetSettings:
    target_count: int = 20_000
    seed: int = 0
    episode_duration: float = 60.0
    balance_share: float = 0.7
    window_deg: float = 15.0
    bin_deg: float = 10.0
    jitter_angle_deg: float = 1.0
    jitter_rate: float = 0.05
    max_episodes: int = 10_000


def _samples(log: EpisodeLog, keep=None) -> np.ndarray:
    cols = [K.COL_T, K.COL_THETA, K.COL_ALPHA, K.COL_THETA_DOT, K.COL_ALPHA_DOT, K.COL_U_SAT]
    rows = log.data[:, cols]
    return rows if keep is None else rows[keep]


def _fill(setup: Setup, policy: str, start: State, count: int, settings: DatasetSettings, stream: int, select=None):
    chunks, have = [], 0
    episode = 0
    while have < count:
        if episode >= settings.max_episodes:
            raise RuntimeError(f"{policy} episodes produced only {have} of {count} samples")
        rng = make_rng(settings.seed, stream * settings.max_episodes + episode)
        log = run_episode(setup, policy, jittered(start, rng, settings.jitter_angle_deg, settings.jitter_rate),
                          settings.episode_duration)
        rows = _samples(log, None if select is None else select(log))
        chunks.append(rows[: count - have])
        have += len(chunks[-1])
        episode += 1
    return np.concatenate(chunks) if chunks else np.empty((0, 6))


def collect_dataset(setup: Setup, mode: str, settings: DatasetSettings = DatasetSettings()):
    """State samples from the data-generation controllers plus their (theta, alpha) histogram.

    ``unbiased`` draws everything from swing-up episodes tracking the slow arm
    reference.  ``biased`` takes ``balance_share`` of the samples from the
    balancing episodes, recorded only while the balance controller holds the
    pendulum within ``window_deg`` of upright, and the rest from swing-up
    episodes.
    """
    n = int(settings.target_count)
    if not 0 < n <= 10**7:
        raise ValueError("target_count must be in [1, 1e7]")
    if mode == "unbiased":
        samples = _fill(setup, "datagen-swing", State.hanging(), n, settings, stream=0)
    elif mode == "biased":
        n_bal = int(round(settings.balance_share * n))
        window = math.radians(settings.window_deg)

        def recorded(log):
            return (log.mode == int(HybridMode.BALANCE)) & (np.abs(log.alpha) < window)

        bal = _fill(setup, "datagen-balance", State.upright(), n_bal, settings, stream=1, select=recorded)
        swing = _fill(setup, "datagen-swing", State.hanging(), n - n_bal, settings, stream=0)
        samples = np.concatenate([bal, swing])
    else:
        raise ValueError(f"mode must be 'biased' or 'unbiased', got {mode!r}")
    hist = StateHistogram.from_samples(samples[:, 1], samples[:, 2], settings.bin_deg)
    return samples, hist


def dataset_csv(samples: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(DATASET_HEADER + "\n")
    for row in samples:
        buf.write(",".join(f"{v:.9g}" for v in row) + "\n")
    return buf.getvalue()
