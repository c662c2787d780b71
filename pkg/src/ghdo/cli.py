"""Batch driver: run, estimate, oracle and verify subcommands.

Configuration lives in a TOML file with [model], [physics], [tdvp] and
[output] sections; any value can be overridden on the command line with
repeated --set section.key=value flags. Runs write a diagnostics CSV row
per step, periodic checkpoints, and a summary JSON document.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import GhdoError, InputError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

_SECTION_KEYS = {
    "model": {"sites", "local_rank", "feature_densities", "init_width", "seed"},
    "physics": {"V", "g", "gamma", "periodic", "operators_file"},
    "tdvp": {
        "dt", "regularization", "cg_tol", "cg_max_iters", "samples_per_step",
        "alpha", "max_steps", "convergence_window", "convergence_tol",
        "alpha_update_interval",
    },
    "output": {"directory", "checkpoint_interval", "dump_samples", "estimate_samples"},
}

_DEFAULTS = {
    "model": {"sites": 4, "local_rank": 8, "feature_densities": [8, 4], "init_width": 1e-2, "seed": 0},
    "physics": {"V": 2.0, "g": 1.0, "gamma": 1.0, "periodic": True},
    "tdvp": {
        "dt": 1e-3, "regularization": 1e-3, "cg_tol": 1e-6, "cg_max_iters": 400,
        "samples_per_step": 4096, "alpha": 0.5, "max_steps": 2000,
        "convergence_window": 200, "convergence_tol": 1e-3, "alpha_update_interval": 50,
    },
    "output": {"directory": ".", "checkpoint_interval": 500, "dump_samples": False,
               "estimate_samples": 16384},
}


class ConfigError(GhdoError, ValueError):
    pass


def _validate_sections(doc: dict) -> dict:
    cfg = {section: dict(defaults) for section, defaults in _DEFAULTS.items()}
    for section, values in doc.items():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section '{section}'")
        if not isinstance(values, dict):
            raise ConfigError(f"section '{section}' must be a table of keys")
        for key, value in values.items():
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown config key '{section}.{key}'")
            cfg[section][key] = value
    _check_ranges(cfg)
    return cfg


def _check_ranges(cfg: dict) -> None:
    model = cfg["model"]
    if int(model["sites"]) < 1:
        raise ConfigError(f"model.sites must be >= 1, got {model['sites']}")
    if int(model["local_rank"]) < 1:
        raise ConfigError(f"model.local_rank must be >= 1, got {model['local_rank']}")
    feats = model["feature_densities"]
    if not isinstance(feats, (list, tuple)) or not feats or any(int(f) < 1 for f in feats):
        raise ConfigError(f"model.feature_densities must be a non-empty list of positive ints, got {feats}")
    if not 0.0 < float(model["init_width"]) <= 1.0:
        raise ConfigError(f"model.init_width must lie in (0, 1], got {model['init_width']}")
    phys = cfg["physics"]
    if float(phys["gamma"]) < 0:
        raise ConfigError(f"physics.gamma must be >= 0, got {phys['gamma']}")
    tdvp_sec = cfg["tdvp"]
    alpha = tdvp_sec["alpha"]
    if isinstance(alpha, str):
        if alpha != "adaptive":
            raise ConfigError(f"tdvp.alpha must be a number in [0, 1] or 'adaptive', got {alpha!r}")
    elif not 0.0 <= float(alpha) <= 1.0:
        raise ConfigError(f"tdvp.alpha must lie in [0, 1], got {alpha}")
    for key in ("dt", "regularization", "cg_tol", "convergence_tol"):
        if float(tdvp_sec[key]) < 0:
            raise ConfigError(f"tdvp.{key} must be >= 0, got {tdvp_sec[key]}")
    for key in ("cg_max_iters", "samples_per_step", "max_steps", "convergence_window",
                "alpha_update_interval"):
        if int(tdvp_sec[key]) < 1:
            raise ConfigError(f"tdvp.{key} must be >= 1, got {tdvp_sec[key]}")
    out = cfg["output"]
    if int(out["checkpoint_interval"]) < 0:
        raise ConfigError(f"output.checkpoint_interval must be >= 0, got {out['checkpoint_interval']}")
    if int(out["estimate_samples"]) < 1:
        raise ConfigError(f"output.estimate_samples must be >= 1, got {out['estimate_samples']}")


def _coerce(text: str):
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered == "adaptive":
        return "adaptive"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.startswith("["):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse list override {text!r}: {exc}") from exc
    return text


def load_config(path: str | None, overrides: list[str]) -> dict:
    doc = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed TOML in {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        doc.setdefault(section, {})[key.strip()] = _coerce(value.strip())
    return _validate_sections(doc)


def _build_lindblad(cfg: dict):
    from .fileio import load_lindblad
    from .lindblad import build_tfim

    phys = cfg["physics"]
    if "operators_file" in phys and phys.get("operators_file"):
        return load_lindblad(phys["operators_file"])
    return build_tfim(int(cfg["model"]["sites"]), float(phys["V"]), float(phys["g"]),
                      float(phys["gamma"]), bool(phys["periodic"]))


def _network_spec(cfg: dict):
    from .network import NetworkSpec

    model = cfg["model"]
    return NetworkSpec(
        sites=int(model["sites"]),
        local_rank=int(model["local_rank"]),
        feature_densities=tuple(int(f) for f in model["feature_densities"]),
        init_width=float(model["init_width"]),
        seed=int(model["seed"]),
    )


def _tdvp_config(cfg: dict):
    from .tdvp import TdvpConfig

    sec = cfg["tdvp"]
    alpha = sec["alpha"] if isinstance(sec["alpha"], str) else float(sec["alpha"])
    return TdvpConfig(
        dt=float(sec["dt"]),
        regularization=float(sec["regularization"]),
        cg_tol=float(sec["cg_tol"]),
        cg_max_iters=int(sec["cg_max_iters"]),
        samples_per_step=int(sec["samples_per_step"]),
        alpha=alpha,
        max_steps=int(sec["max_steps"]),
        convergence_window=int(sec["convergence_window"]),
        convergence_tol=float(sec["convergence_tol"]),
        alpha_update_interval=int(sec["alpha_update_interval"]),
    )


def _estimate_block(model, n_samples: int, alpha: float, seed: int) -> dict:
    import numpy as np

    from .sampling import estimate_magnetization, estimate_purity_renyi2, sample_diagonal

    rng = np.random.default_rng(seed)
    configs = sample_diagonal(model, n_samples, rng)
    out = {"n_samples": n_samples, "alpha": alpha}
    for axis in ("x", "y", "z"):
        est = estimate_magnetization(model, configs, axis)
        out[f"mag_{axis}"] = {"mean": est.mean.real, "std_error": est.std_error}
    pur = estimate_purity_renyi2(model, alpha, n_samples, rng)
    out["purity"] = {"mean": pur.purity, "std_error": pur.purity_error}
    out["renyi2"] = {"mean": pur.renyi2, "std_error": pur.renyi2_error}
    return out


def cmd_run(args) -> int:
    import numpy as np

    from .fileio import load_checkpoint, save_checkpoint
    from .models import NetworkAghdo
    from .tdvp import DIAGNOSTICS_COLUMNS, run_to_steady_state

    cfg = load_config(args.config, args.set or [])
    lind = _build_lindblad(cfg)
    seed = int(cfg["model"]["seed"])
    if args.init_checkpoint:
        model, _ = load_checkpoint(args.init_checkpoint)
        if model.n_sites != lind.sites:
            raise InputError(
                f"checkpoint has {model.n_sites} sites but the physics section asks for {lind.sites}"
            )
    else:
        model = NetworkAghdo.random(_network_spec(cfg))
    out_dir = cfg["output"]["directory"]
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "diagnostics.csv")
    ckpt_path = os.path.join(out_dir, "checkpoint.json")
    interval = int(cfg["output"]["checkpoint_interval"])

    columns = [*DIAGNOSTICS_COLUMNS, "wall_time"]
    csv_file = open(csv_path, "w", newline="", encoding="utf-8")
    writer = csv.DictWriter(csv_file, fieldnames=columns, extrasaction="ignore")
    writer.writeheader()

    def on_step(k, step_model, row):
        writer.writerow(row)
        if interval and (k + 1) % interval == 0:
            save_checkpoint(ckpt_path, step_model, rng_seed=seed)

    rng = np.random.default_rng(seed)
    try:
        result = run_to_steady_state(model, lind, _tdvp_config(cfg), rng, on_step=on_step)
    finally:
        csv_file.close()
    save_checkpoint(ckpt_path, result.model, rng_seed=seed)

    alpha_cfg = cfg["tdvp"]["alpha"]
    est_alpha = 0.5 if isinstance(alpha_cfg, str) else float(alpha_cfg)
    if isinstance(alpha_cfg, str) and result.diagnostics:
        est_alpha = float(result.diagnostics[-1]["alpha"])
    summary = {
        "config": cfg,
        "steps": result.steps,
        "converged": result.converged,
        "estimates": _estimate_block(result.model, int(cfg["output"]["estimate_samples"]),
                                     est_alpha, seed + 1),
        "checkpoint": ckpt_path,
        "diagnostics_csv": csv_path,
    }
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    print(json.dumps(summary["estimates"], indent=2))
    print(f"summary written to {summary_path}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    import numpy as np

    from .fileio import load_checkpoint
    from .sampling import dump_samples, sample_joint_alpha

    model, _ = load_checkpoint(args.checkpoint)
    block = _estimate_block(model, args.samples, args.alpha, args.seed)
    if args.dump_samples:
        batch = sample_joint_alpha(model, args.alpha, args.samples,
                                   np.random.default_rng(args.seed + 1))
        dump_samples(batch, args.dump_samples)
        block["sample_dump"] = args.dump_samples
    text = json.dumps(block, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    from . import oracle

    cfg = load_config(args.config, args.set or [])
    lind = _build_lindblad(cfg)
    rho = oracle.steady_state_dense(lind)
    doc = {
        "sites": lind.sites,
        "magnetization": oracle.dense_magnetizations(rho, lind.sites),
        "renyi2": oracle.dense_renyi2(rho),
        "purity": float((abs(rho) ** 2).sum()),
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import SUITES

    if args.suite not in SUITES:
        print(f"unknown suite '{args.suite}'; available: {', '.join(sorted(SUITES))}", file=sys.stderr)
        return EXIT_USAGE
    checks = SUITES[args.suite]()
    n_pass = sum(ok for _, ok, _ in checks)
    for name, ok, detail in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    print(f"{n_pass}/{len(checks)} checks passed")
    return EXIT_OK if n_pass == len(checks) else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghdo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evolve a model to its steady state")
    run.add_argument("--config", help="TOML configuration file")
    run.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                     help="override a config value (repeatable)")
    run.add_argument("--init-checkpoint", help="warm-start from an existing checkpoint")
    run.set_defaults(func=cmd_run)

    est = sub.add_parser("estimate", help="estimate observables from a checkpoint")
    est.add_argument("checkpoint")
    est.add_argument("--samples", type=int, default=16384)
    est.add_argument("--alpha", type=float, default=0.5)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--out", help="write the JSON document here as well")
    est.add_argument("--dump-samples", help="write the joint sample batch to this path")
    est.set_defaults(func=cmd_estimate)

    orc = sub.add_parser("oracle", help="dense steady-state observables (N <= 6)")
    orc.add_argument("--config", help="TOML configuration file")
    orc.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    orc.add_argument("--out")
    orc.set_defaults(func=cmd_oracle)

    ver = sub.add_parser("verify", help="run a named verification suite")
    ver.add_argument("suite")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GhdoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
