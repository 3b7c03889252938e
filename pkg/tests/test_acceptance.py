"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Runtimes are measured after a warm-up call so JIT compilation is not counted.
"""

import math
import time

import numpy as np
import pytest

from furuta_bench.cli import main
from furuta_bench.control_design import VENDOR_A, VENDOR_B, DESIGN_Q, DESIGN_R, LinearModel, care_residual, design_lqr, is_hurwitz, scalar_selftest
from furuta_bench.dynamics import PRIMARY_ENTRIES, PendulumParams, State, calibrate_params, linearize, mechanical_energy, simulate, upright_energy
from furuta_bench.estimation import velocity_noise
from furuta_bench.experiments import frequency_sweep, is_monotone, jittered, noise_sweep, reward, run_episode, settling_time, success_criterion
from furuta_bench.estimation import make_rng

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number:>2}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok

    return emit


def _timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def test_01_riccati(report):
    design_lqr(LinearModel.vendor(), DESIGN_Q, DESIGN_R)
    design, elapsed = _timed(design_lqr, LinearModel.vendor(), DESIGN_Q, DESIGN_R)
    P = design.P
    residual = care_residual(VENDOR_A, VENDOR_B, DESIGN_Q, DESIGN_R, P)
    symmetric = np.array_equal(P, P.T)
    psd = np.linalg.eigvalsh(P).min() >= 0
    hurwitz = is_hurwitz(VENDOR_A - np.outer(VENDOR_B, design.K))
    scalar_err = max(abs(c["P"] - c["expected"]) for c in scalar_selftest().values())
    ok = residual < 1e-8 and symmetric and psd and hurwitz and scalar_err < 1e-10 and elapsed < 1.0
    assert report(1, "Riccati correctness", ok,
                  f"residual={residual:.2e} symmetric={symmetric} psd={psd} hurwitz={hurwitz} "
                  f"scalar_err={scalar_err:.1e} time={elapsed:.3f}s")


def test_02_linearization(report, config):
    target = LinearModel.vendor()
    start = time.perf_counter()
    fitted = calibrate_params(target, config.initial_guess())
    lin = linearize(fitted)
    elapsed = time.perf_counter() - start
    errs = {}
    for name, i, j in PRIMARY_ENTRIES:
        val = lin.A[i, j] if name == "A" else lin.B[i]
        ref = target.A[i, j] if name == "A" else target.B[i]
        errs[f"{name}[{i}]" + ("" if j is None else f"[{j}]")] = abs(val - ref) / abs(ref)
    damping = [lin.A[2, 2] / VENDOR_A[2, 2], lin.A[3, 3] / VENDOR_A[3, 3]]
    same_order = all(0.1 <= d <= 10 for d in damping)
    ok = max(errs.values()) < 0.05 and same_order and elapsed < 10.0
    worst = max(errs, key=errs.get)
    assert report(2, "linearization fidelity", ok,
                  f"worst {worst} rel_err={errs[worst]:.1e} damping_ratios={damping[0]:.3f},{damping[1]:.3f} "
                  f"time={elapsed:.2f}s")


def test_03_energy(report, params):
    p = PendulumParams(**{**params.__dict__, "b_a": 0.0, "b_p": 0.0})
    s0 = State(0.0, math.pi / 2, 0.0, 0.0)
    e_start = mechanical_energy(s0, p)
    s = simulate(s0, 0.0, 1e-4, 100_000, p)
    drift = abs(mechanical_energy(s, p) - e_start) / upright_energy(p)
    assert report(3, "energy conservation", drift < 1e-6, f"|dE|/E0={drift:.2e} over 10 s at dt=1e-4")


def test_04_balancing(report, setup):
    run_episode(setup, "lqr", State.upright(), 0.1)
    worst, slowest = 0.0, 0.0
    for sign in (1.0, -1.0):
        log, elapsed = _timed(run_episode, setup, "lqr", State(0.0, sign * math.radians(10), 0.0, 0.0), 5.0)
        worst = max(worst, settling_time(log, 2.0))
        slowest = max(slowest, elapsed)
    ok = worst <= 2.0 and slowest < 1.0
    assert report(4, "LQR balancing at 120 Hz", ok, f"settle(|alpha|<2deg)={worst:.3f}s episode_time={slowest * 1e3:.1f}ms")


def test_05_bandwidth(report, setup, config):
    freqs = config.raw["sweep"]["frequencies_hz"]
    settings = config.sweep_settings()
    (results, fs_min), elapsed = _timed(frequency_sweep, setup, freqs, settings)
    rate = {r.param: r.success_rate for r in results}
    low = max(r.success_rate for r in results if r.param <= 20)
    monotone = is_monotone(results, decreasing=False)
    ok = (rate[120.0] == 1.0 and low <= 0.1 and monotone and fs_min is not None
          and 40.0 <= fs_min <= 160.0 and elapsed < 120)
    table = " ".join(f"{int(r.param)}:{r.successes}/{r.trials}" for r in results)
    assert report(5, "bandwidth property", ok, f"fs_min={fs_min} monotone={monotone} [{table}] time={elapsed:.2f}s")


def test_06_swing_up(report, setup, config):
    settings = config.sweep_settings()
    run_episode(setup, "hybrid", State.hanging(), 0.1)
    start = time.perf_counter()
    logs = []
    for seed in range(20):
        x0 = jittered(State.hanging(), make_rng(seed), settings.jitter_angle_deg, settings.jitter_rate)
        logs.append(run_episode(setup, "hybrid", x0, 10.0))
    elapsed = time.perf_counter() - start
    successes = sum(success_criterion(log, 3.0, 10.0) for log in logs)
    chatter = sum(_chatters(log.mode) for log in logs)
    ok = successes == 20 and chatter == 0 and elapsed < 30
    assert report(6, "hybrid swing-up", ok, f"{successes}/20 seeds, chatter_events={chatter}, time={elapsed:.2f}s")


def _chatters(modes, window=3):
    entries = np.flatnonzero(np.diff(modes) == 1) + 1
    exits = np.flatnonzero(np.diff(modes) == -1) + 1
    return sum(1 for e in exits if np.any((entries > e) & (entries - e <= window)))


def test_07_noise(report, setup, config):
    sigmas = config.raw["sweep"]["noise_sigmas_deg"]
    assert sigmas == [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
    settings = config.sweep_settings()
    assert settings.trials >= 20
    (results, star), elapsed = _timed(noise_sweep, setup, sigmas, settings)
    monotone = is_monotone(results, decreasing=True)
    ok = monotone and star is not None and 0.25 <= star <= 4.0 and results[0].success_rate == 1.0 and elapsed < 300
    table = " ".join(f"{r.param:g}:{r.successes}/{r.trials}" for r in results)
    assert report(7, "noise tolerance property", ok, f"sigma_star={star} monotone={monotone} [{table}] time={elapsed:.2f}s")


def test_08_noise_propagation(report):
    v = velocity_noise(1.0, 120.0, 100_000, seed=0, a=1.0)
    expected = math.radians(1.0) * math.sqrt(2.0) * 120.0
    measured = float(v[1:].std())
    rel = abs(measured / expected - 1)
    assert report(8, "noise propagation", rel < 0.05, f"std={measured:.4f} rad/s expected={expected:.4f} rel_err={rel:.2%}")


def test_09_reward(report):
    got = [reward(State(0, 0, 0, 0)), reward(State(0, math.pi, 0, 0)), reward(State(math.pi, math.pi, 0, 0))]
    ok = got == [1.0, (1 - 0.8) ** 2, 0.0]
    assert report(9, "reward substitution", ok, f"{got[0]:.6g}, {got[1]:.6g}, {got[2]:.6g}")


def _read_dataset(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data


def test_10_dataset_bias(report, tmp_path, config):
    out = tmp_path / "data"
    assert main(["collect", "--mode", "biased", "--out", str(out)]) == 0
    assert main(["collect", "--mode", "unbiased", "--out", str(out)]) == 0
    target = config.raw["dataset"]["target_count"]
    biased = _read_dataset(out / "dataset_biased.csv")
    unbiased = _read_dataset(out / "dataset_unbiased.csv")
    frac = float(np.mean(np.abs(biased[:, 2]) < math.radians(15)))
    bands, _ = np.histogram(np.degrees(unbiased[:, 2]), bins=np.arange(-180, 181, 30))
    ok = frac >= 0.6 and bands.min() > 0 and len(biased) == target and len(unbiased) == target
    assert report(10, "dataset bias", ok,
                  f"biased |alpha|<15deg fraction={frac:.3f}, unbiased min 30deg band count={bands.min()}, "
                  f"counts={len(biased)},{len(unbiased)}")


def test_11_determinism(report, tmp_path):
    commands = [
        ["design"],
        ["simulate", "--policy", "hybrid"],
        ["simulate", "--policy", "datagen-balance"],
        ["sweep", "--kind", "noise"],
        ["sweep", "--kind", "frequency"],
        ["collect", "--mode", "biased"],
        ["collect", "--mode", "unbiased"],
        ["calibrate"],
    ]
    trees = []
    for rep in range(2):
        out = tmp_path / f"run{rep}"
        for c in commands:
            assert main([*c, "--seed", "3", "--out", str(out)]) == 0
        trees.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = trees[0] == trees[1]
    assert report(11, "determinism", same, f"{len(trees[0])} files byte-identical across reruns={same}")
