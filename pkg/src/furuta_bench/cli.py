"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 design failure, 3 simulation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .control_design import design_lqr, scalar_selftest
from .dynamics import calibrate_params, linearize, params_document, relative_errors, CALIBRATION_ENTRIES
from .errors import CalibrationError, CareError, ConfigError, RootFindingError
from .estimation import NoiseModel
from .experiments import POLICIES, collect_dataset, dataset_csv, frequency_sweep, noise_sweep, run_episode

EXIT_OK, EXIT_CONFIG, EXIT_DESIGN, EXIT_SIM = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def write_atomic(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _out_dir(args, cfg) -> Path:
    return Path(args.out) if args.out else cfg._resolve(cfg.raw["output_dir"])


def _load(args):
    from .config import ExperimentConfig

    return ExperimentConfig.load(args.config).with_seed(args.seed)


def cmd_design(args) -> int:
    if args.selftest:
        report = scalar_selftest()
        print(_json(report), end="")
        ok = all(abs(v["P"] - v["expected"]) < 1e-10 for v in report.values())
        return EXIT_OK if ok else EXIT_DESIGN
    cfg = _load(args)
    Q, R = cfg.design_weights()
    try:
        design = design_lqr(cfg.design_model(), Q, R)
    except (CareError, RootFindingError, ValueError) as exc:
        print(f"design failed: {exc}", file=sys.stderr)
        return EXIT_DESIGN
    report = design.report()
    text = _json(report)
    write_atomic(_out_dir(args, cfg) / "design.json", text)
    print(text, end="")
    return EXIT_OK if report["hurwitz"] else EXIT_DESIGN


def cmd_simulate(args) -> int:
    cfg = _load(args)
    policy = args.policy
    if policy not in POLICIES:
        raise ConfigError(f"unknown policy {policy!r}; choose from {sorted(POLICIES)}")
    setup = cfg.setup()
    noise_block = cfg.raw["noise"]
    sigma = float(noise_block["sigma_deg"])
    noise = NoiseModel(sigma, cfg.seed) if (sigma > 0 or noise_block["measured"]) else None
    log = run_episode(setup, policy, cfg.initial_state(policy), float(cfg.raw["run"]["duration"]), noise=noise)
    path = write_atomic(_out_dir(args, cfg) / f"episode_{policy}_seed{cfg.seed}.csv", log.to_csv())
    print(path)
    if log.failed:
        print("simulation aborted: integration blowup", file=sys.stderr)
        return EXIT_SIM
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    setup = cfg.setup()
    settings = cfg.sweep_settings()
    if args.kind == "noise":
        results, star = noise_sweep(setup, cfg.raw["sweep"]["noise_sigmas_deg"], settings)
        summary = {"sigma_star": star}
    else:
        results, star = frequency_sweep(setup, cfg.raw["sweep"]["frequencies_hz"], settings)
        summary = {"fs_min": star}
    doc = [r.to_dict() for r in results] + [summary]
    path = write_atomic(_out_dir(args, cfg) / f"sweep_{args.kind}.json", _json(doc))
    print(path)
    return EXIT_OK


def cmd_collect(args) -> int:
    cfg = _load(args)
    samples, hist = collect_dataset(cfg.setup(), args.mode, cfg.dataset_settings())
    out = _out_dir(args, cfg)
    data_path = write_atomic(out / f"dataset_{args.mode}.csv", dataset_csv(samples))
    hist_path = write_atomic(out / f"histogram_{args.mode}.json", _json(hist.to_dict()))
    print(data_path)
    print(hist_path)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    if args.target:
        raw = dict(cfg.raw)
        raw["calibration"] = dict(raw["calibration"], target_model_file=str(Path(args.target).resolve()))
        cfg = type(cfg)(raw, cfg.base_dir)
    target = cfg.target_model()
    try:
        fitted = calibrate_params(target, cfg.initial_guess())
    except CalibrationError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DESIGN
    errors = relative_errors(linearize(fitted), target, CALIBRATION_ENTRIES)
    doc = params_document(
        fitted,
        "least-squares fit of the upright linearization to the target linear model "
        "(A[2][1], A[3][1], A[2][2], A[3][3], B[2], B[3]; A[3][2] excluded)",
        relative_errors=errors,
    )
    path = write_atomic(_out_dir(args, cfg) / "params.json", _json(doc))
    print(path)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .dynamics import State, dynamics_derivative, load_params

    checks = {}
    for name, v in scalar_selftest().items():
        checks[f"care {name}"] = abs(v["P"] - v["expected"]) < 1e-10
    p = load_params()
    for name, s in (("upright", State.upright()), ("hanging", State.hanging())):
        checks[f"equilibrium {name}"] = max(abs(d) for d in dynamics_derivative(s, 0.0, p)) < 1e-12
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK if all(checks.values()) else EXIT_DESIGN


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="furuta-bench", description="Furuta pendulum baseline control experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="experiment config (JSON); defaults apply to missing keys")
        p.add_argument("--seed", type=int, help="master seed, overrides run.seed")
        p.add_argument("--out", metavar="DIR", help="output directory, overrides output_dir")
        return p

    d = common(sub.add_parser("design", help="LQR design from the configured linear model"))
    d.add_argument("--selftest", action="store_true", help="solve the scalar closed-form cases instead")
    d.set_defaults(func=cmd_design)

    s = common(sub.add_parser("simulate", help="run one closed-loop episode and write its CSV log"))
    s.add_argument("--policy", default="hybrid", choices=["hybrid", "lqr", "swing", "datagen-swing", "datagen-balance"])
    s.set_defaults(func=cmd_simulate)

    w = common(sub.add_parser("sweep", help="noise or sample-frequency robustness sweep"))
    w.add_argument("--kind", required=True, choices=["noise", "frequency"])
    w.set_defaults(func=cmd_sweep)

    c = common(sub.add_parser("collect", help="collect a state dataset and its histogram"))
    c.add_argument("--mode", required=True, choices=["biased", "unbiased"])
    c.set_defaults(func=cmd_collect)

    k = common(sub.add_parser("calibrate", help="fit physical parameters to a linear model"))
    k.add_argument("--target", metavar="PATH", help="linear model JSON with keys A and B (default: the design model)")
    k.set_defaults(func=cmd_calibrate)

    t = sub.add_parser("selftest", help="quick numerical sanity checks")
    t.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CareError as exc:
        print(f"design failed: {exc}", file=sys.stderr)
        return EXIT_DESIGN


if __name__ == "__main__":
    sys.exit(main())
