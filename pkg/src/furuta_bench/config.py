"""Experiment configuration: one JSON document layered over the shipped defaults."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .control_design import LinearModel, design_lqr
from .controllers import ControllerConfig
from .dynamics import PendulumParams, State, load_params
from .errors import ConfigError, FurutaError
from .experiments import DatasetSettings, Setup, SweepSettings

BLOCKS = ("params_file", "design", "calibration", "controller", "noise", "run", "sweep", "dataset", "output_dir")


def default_config() -> dict:
    text = resources.files("furuta_bench.data").joinpath("default_config.json").read_text()
    return json.loads(text)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, f"{path}{key}.")
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    base_dir: Path

    @classmethod
    def load(cls, path: str | Path | None = None) -> "ExperimentConfig":
        base = default_config()
        if path is None:
            return cls(base, Path.cwd())
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        cfg = cls(_merge(base, doc), path.parent)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        run = self.raw["run"]
        if not 10 <= float(run["f_s"]) <= 1000:
            raise ConfigError("run.f_s must be in [10, 1000] Hz")
        if not 0 < float(run["duration"]) <= 600:
            raise ConfigError("run.duration must be in (0, 600] s")
        if self.raw["params_file"] is not None and not self._resolve(self.raw["params_file"]).exists():
            raise ConfigError(f"params file not found: {self.raw['params_file']}")
        target = self.raw["calibration"]["target_model_file"]
        if target is not None and not self._resolve(target).exists():
            raise ConfigError(f"target model file not found: {target}")
        try:
            self.controller()
            self.noise_smoothing()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def _resolve(self, p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        if seed is None:
            return self
        raw = copy.deepcopy(self.raw)
        raw["run"]["seed"] = int(seed)
        return ExperimentConfig(raw, self.base_dir)

    @property
    def seed(self) -> int:
        return int(self.raw["run"]["seed"])

    def params(self) -> PendulumParams:
        pf = self.raw["params_file"]
        return load_params(None if pf is None else self._resolve(pf))

    def design_model(self) -> LinearModel:
        d = self.raw["design"]
        return LinearModel(np.array(d["A"], dtype=float), np.array(d["B"], dtype=float))

    def design_weights(self):
        d = self.raw["design"]
        return np.array(d["Q"], dtype=float), float(d["R"])

    def target_model(self) -> LinearModel:
        target = self.raw["calibration"]["target_model_file"]
        if target is None:
            return self.design_model()
        try:
            return LinearModel.from_dict(json.loads(self._resolve(target).read_text()))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid target model file: {exc}") from exc

    def initial_guess(self) -> PendulumParams:
        return PendulumParams(**self.raw["calibration"]["initial"])

    def controller(self) -> ControllerConfig:
        return ControllerConfig.from_dict(self.raw["controller"])

    def noise_smoothing(self) -> float:
        a = float(self.raw["noise"]["smoothing"])
        if not 0 < a <= 1:
            raise ConfigError("noise.smoothing must be in (0, 1]")
        return a

    def setup(self) -> Setup:
        Q, R = self.design_weights()
        design = design_lqr(self.design_model(), Q, R)
        run = self.raw["run"]
        return Setup(
            params=self.params(),
            controller=self.controller(),
            gain=design.K,
            f_s=float(run["f_s"]),
            substeps=int(run["substeps"]),
            max_substep=float(run["max_substep"]),
            smoothing=self.noise_smoothing(),
        )

    def initial_state(self, policy: str) -> State:
        init = self.raw["run"]["initial_state"]
        if init == "auto":
            init = "upright" if policy in ("lqr", "lqr-only", "datagen-balance") else "hanging"
        if init == "upright":
            return State.upright()
        if init == "hanging":
            return State.hanging()
        try:
            return State(*(float(v) for v in init))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"run.initial_state must be 'auto', 'upright', 'hanging' or 4 numbers: {exc}") from exc

    def sweep_settings(self) -> SweepSettings:
        s = self.raw["sweep"]
        return SweepSettings(
            trials=int(s["trials"]),
            seed=self.seed,
            hold=float(s["hold_s"]),
            jitter_angle_deg=float(s["jitter_angle_deg"]),
            jitter_rate=float(s["jitter_rate"]),
            noise_duration=float(s["noise_duration_s"]),
            noise_success_deg=float(s["noise_success_deg"]),
            frequency_duration=float(s["frequency_duration_s"]),
            frequency_success_deg=float(s["frequency_success_deg"]),
            frequency_alpha0_deg=float(s["frequency_alpha0_deg"]),
        )

    def dataset_settings(self) -> DatasetSettings:
        d = self.raw["dataset"]
        return DatasetSettings(
            target_count=int(d["target_count"]),
            seed=self.seed,
            episode_duration=float(d["episode_duration_s"]),
            balance_share=float(d["balance_share"]),
            window_deg=float(d["window_deg"]),
            bin_deg=float(d["bin_deg"]),
            jitter_angle_deg=float(d["jitter_angle_deg"]),
            jitter_rate=float(d["jitter_rate"]),
        )


__all__ = ["ExperimentConfig", "ConfigError", "FurutaError", "default_config"]
