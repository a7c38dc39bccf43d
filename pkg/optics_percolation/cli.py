#!/usr/bin/env python3

"""
Command-line entry point: ``python -m optics_percolation.cli <command> ...``.

Commands:
    percolate   largest-component sweep over eta and N for one architecture
    sample      noisy samples of a circuit file with restart accounting
    threshold   simulability verdict, y*, tail bounds and dimension bound
    verify      end-to-end acceptance checks, JSON report
    mps-check   MPS evolution of a circuit with bond-dimension report

Parameters come from the YAML config (``--config``); flags override it.
"""

import os
import sys
import json
import math
import argparse
import logging
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from .circuit_graph import Circuit, InputSpec, lightcone_bipartite
from .errors import EXIT_OK, EXIT_VERIFY_FAILED, ParameterError, SimulationError
from .mps import dense_evolve, evolve_circuit, fidelity, schmidt_rank_check
from .noise import NoiseSpec, classical_threshold, general_input_threshold
from .percolation import (
    AGGREGATION,
    LARGEST_PERMANENT_MARKER,
    binomial_tail_bound,
    percolation_experiment,
    summarize_experiment,
    tail_bound,
    y_star,
)
from .sampler import PercolationSampler, hilbert_dim_bound
from .utils import ARTIFACT_VERSION, load_config, make_absolute, setup_logger
from .verify import FAULTS, run_verification

logger = logging.getLogger(__name__)

ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_CONFIG = os.path.join(ROOT_DIR, "config", "config.yml")

REQUIRED_SECTIONS = {
    "percolate": ("run", "output", "percolation"),
    "sample": ("run", "output", "noise", "sampling"),
    "threshold": ("threshold",),
    "verify": ("verify",),
    "mps-check": ("mps",),
}

DENSE_CHECK_LIMIT = 2 ** 20


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated numbers, got '{text}'")


def _int_list(text: str) -> List[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated integers, got '{text}'")


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=DEFAULT_CONFIG, help="Path to YAML (or JSON) config file")
    common.add_argument("--seed", type=int, help="Master seed (non-negative, up to 64 bits)")
    common.add_argument("--out", help="Output path; '-' writes the data body to stdout")
    common.add_argument("--format", choices=["csv", "jsonl"], help="Record format")
    common.add_argument("--log", help="Log file path (default from the config logging section)")
    common.add_argument("--workers", type=int, help="Worker processes for trial sweeps")
    common.add_argument("--progress", action="store_true", help="Show progress bars")

    parser = argparse.ArgumentParser(
        prog="optics_percolation",
        description="Percolation-based simulation of noisy constant-depth linear optics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("percolate", parents=[common], help="Largest-component sweep")
    p.add_argument("--arch", choices=["nonlocal", "1d"])
    p.add_argument("--delta", type=int)
    p.add_argument("--eta", type=_float_list, help="Comma-separated survival probabilities")
    p.add_argument("--n", type=_int_list, help="Comma-separated input counts N")
    p.add_argument("--trials", type=int)
    p.add_argument("--spacing", type=int, help="Input spacing of the 1d generator")

    s = sub.add_parser("sample", parents=[common], help="Noisy percolation sampling")
    s.add_argument("--circuit", help="Circuit JSON file")
    s.add_argument("--input", help="Input occupation JSON file")
    s.add_argument("--eta", type=float)
    s.add_argument("--x", type=float)
    s.add_argument("--eta-per-layer", type=float)
    s.add_argument("--epsilon", type=float, help="Failure budget; output TVD <= 2*epsilon")
    s.add_argument("--num-samples", type=int)
    s.add_argument("--y-star", type=float, help="Override the component cap")
    s.add_argument("--force", action="store_true", help="Sample even when the threshold fails")

    t = sub.add_parser("threshold", parents=[common], help="Simulability report")
    t.add_argument("--delta", type=int)
    t.add_argument("--eta", type=float)
    t.add_argument("--x", type=float)
    t.add_argument("--eta-per-layer", type=float)
    t.add_argument("--depth", type=int)
    t.add_argument("--fock-n", type=int)
    t.add_argument("--general-p", type=float, help="Vacuum-mixture weight of general inputs")
    t.add_argument("--n", type=int, help="Number of inputs N for y*")
    t.add_argument("--epsilon", type=float)

    v = sub.add_parser("verify", parents=[common], help="Acceptance checks")
    v.add_argument("--inject-fault", choices=FAULTS)

    m = sub.add_parser("mps-check", parents=[common], help="MPS bond-dimension report")
    m.add_argument("--circuit", help="Circuit JSON file")
    m.add_argument("--input", help="Input occupation JSON file")
    m.add_argument("--threshold", type=float, help="Singular-value cutoff")
    m.add_argument("--max-bond", type=int)
    m.add_argument("--local-dim", type=int)

    return parser.parse_args(argv)


def _pick(value, section: dict, key: str, default=None):
    if value is not None:
        return value
    return section.get(key, default)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"Not JSON serializable: {type(obj)}")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        f.write(text)


def _stem(path: str) -> str:
    return os.path.splitext(path)[0]


def _default_out(config: dict, config_dir: str, key: str, **fields) -> str:
    output_cfg = config.get("output", {})
    base_dir = make_absolute(output_cfg.get("base_dir", "."), config_dir)
    return os.path.join(base_dir, output_cfg[key].format(**fields))


def _metadata(command: str, seed: int, parameters: dict, **extra) -> dict:
    return {
        "artifact_version": ARTIFACT_VERSION,
        "command": command,
        "seed": seed,
        "parameters": parameters,
        **extra,
    }


def _log_parameters(parameters: dict) -> None:
    for key, value in parameters.items():
        logger.info(f"  {key}: {value}")


def cmd_percolate(args, config: dict, config_dir: str) -> int:
    run_cfg = config["run"]
    perc_cfg = config["percolation"]
    params = {
        "arch": _pick(args.arch, perc_cfg, "arch", "nonlocal"),
        "delta": int(_pick(args.delta, perc_cfg, "delta", 9)),
        "etas": [float(e) for e in _pick(args.eta, perc_cfg, "etas", [])],
        "ns": [int(n) for n in _pick(args.n, perc_cfg, "ns", [])],
        "trials": int(_pick(args.trials, perc_cfg, "trials", 20)),
        "spacing": int(_pick(args.spacing, perc_cfg, "spacing", 1)),
    }
    seed = int(_pick(args.seed, run_cfg, "seed", 0))
    workers = int(_pick(args.workers, run_cfg, "workers", 1))
    fmt = _pick(args.format, run_cfg, "format", "csv")
    logger.info("Percolation parameters:")
    _log_parameters({**params, "seed": seed, "workers": workers, "format": fmt})

    records = percolation_experiment(
        params["arch"], params["delta"], params["etas"], params["ns"], params["trials"],
        seed=seed, workers=workers, spacing=params["spacing"], progress=args.progress,
    )
    out = args.out or _default_out(
        config, config_dir, "percolation_csv", arch=params["arch"], delta=params["delta"], seed=seed
    )
    if fmt == "jsonl":
        body = records.to_json(orient="records", lines=True)
    else:
        body = records.to_csv(index=False)
    _write_text(out, body)

    summary = summarize_experiment(records)
    meta = _metadata(
        "percolate", seed, params,
        generator=params["arch"], trials=params["trials"],
        aggregation=AGGREGATION, marker=LARGEST_PERMANENT_MARKER,
    )
    if out != "-":
        summary.to_csv(f"{_stem(out)}_summary.csv", index=False)
        _write_text(f"{_stem(out)}.meta.json", _dumps(meta) + "\n")
        logger.info(f"Saved {len(records)} records to {out}")
    for row in summary.itertuples(index=False):
        logger.info(
            f"N={row.N} eta={row.eta}: mean max component {row.mean_max_component:.3f} "
            f"(median {row.median_max_component}, max {row.max_max_component})"
        )
    return EXIT_OK


def _load_circuit_and_input(args, section: dict, config_dir: str):
    circuit_path = _pick(args.circuit, section, "circuit")
    input_path = _pick(args.input, section, "input")
    if not circuit_path or not input_path:
        raise ParameterError("Both a circuit file and an input file are required")
    if args.circuit is None:
        circuit_path = make_absolute(circuit_path, config_dir)
    if args.input is None:
        input_path = make_absolute(input_path, config_dir)
    return Circuit.from_json(circuit_path), InputSpec.from_json(input_path)


def cmd_sample(args, config: dict, config_dir: str) -> int:
    run_cfg = config["run"]
    sample_cfg = config["sampling"]
    noise_cfg = dict(config["noise"] or {})
    for key, value in (("eta", args.eta), ("x", args.x), ("eta_per_layer", args.eta_per_layer)):
        if value is not None:
            noise_cfg[key] = value
            noise_cfg.pop("kind", None)
    noise = NoiseSpec.from_dict(noise_cfg)
    circuit, input_spec = _load_circuit_and_input(args, sample_cfg, config_dir)

    seed = int(_pick(args.seed, run_cfg, "seed", 0))
    epsilon = float(_pick(args.epsilon, sample_cfg, "epsilon", 0.01))
    num_samples = int(_pick(args.num_samples, sample_cfg, "num_samples", 1000))
    override = _pick(args.y_star, sample_cfg, "y_star")
    force = bool(args.force or sample_cfg.get("force", False))
    fmt = _pick(args.format, run_cfg, "format", "jsonl")
    params = {
        "circuit_modes": circuit.num_modes,
        "depth": circuit.depth,
        "inputs": {str(k): v for k, v in input_spec.occupations.items()},
        "noise": noise.to_dict(),
        "epsilon": epsilon,
        "num_samples": num_samples,
        "y_star_override": override,
        "force": force,
    }
    logger.info("Sampling parameters:")
    _log_parameters({**params, "seed": seed, "format": fmt})

    runner = PercolationSampler(
        circuit, input_spec, noise, epsilon,
        y_star=None if override is None else float(override),
        force=force,
        table_cap=int(sample_cfg.get("table_cap", 4096)),
    )
    records = runner.sample(num_samples, seed=seed, progress=args.progress)

    out = args.out or _default_out(config, config_dir, "samples_jsonl", seed=seed)
    if fmt == "csv":
        frame = pd.DataFrame(
            {
                "outcome": [" ".join(map(str, r.outcome)) for r in records],
                "lost": [r.lost_photons for r in records],
                "restarts": [r.restarts for r in records],
                "component_sizes": [" ".join(map(str, r.component_sizes)) for r in records],
                "distinguishable": [r.distinguishable for r in records],
            }
        )
        body = frame.to_csv(index=False)
    else:
        body = "".join(json.dumps(r.to_dict()) + "\n" for r in records)
    _write_text(out, body)

    summary = runner.summary()
    logger.info(
        f"{summary['samples']} samples, restart rate {summary['restart_rate']:.4g}, "
        f"measured 1/p(E) {summary['overhead']:.4g}, TVD guarantee {summary['tvd_guarantee']:.4g}"
    )
    if out != "-":
        _write_text(f"{_stem(out)}.meta.json", _dumps(_metadata("sample", seed, params, summary=summary)) + "\n")
    return EXIT_OK


def cmd_threshold(args, config: dict, config_dir: str) -> int:
    cfg = config["threshold"]
    delta = int(_pick(args.delta, cfg, "delta", 1))
    epsilon = float(_pick(args.epsilon, cfg, "epsilon", 0.01))
    n = _pick(args.n, cfg, "n")
    fock_n = _pick(args.fock_n, cfg, "fock_n")
    depth = _pick(args.depth, cfg, "depth")
    general_p = _pick(args.general_p, cfg, "general_p")

    flags = {"eta": args.eta, "x": args.x, "eta_per_layer": args.eta_per_layer}
    if any(v is not None for v in flags.values()):
        noise = NoiseSpec.from_dict({k: v for k, v in flags.items() if v is not None})
    else:
        noise = NoiseSpec.from_dict(cfg.get("noise", {}))
    seed = int(_pick(args.seed, config.get("run", {}), "seed", 0))
    params = {
        "delta": delta,
        "noise": noise.to_dict(),
        "fock_n": fock_n,
        "depth": depth,
        "general_p": general_p,
        "n": n,
        "epsilon": epsilon,
    }
    logger.info("Threshold parameters:")
    _log_parameters(params)

    if general_p is not None:
        report = general_input_threshold(float(general_p), delta)
    else:
        report = classical_threshold(delta, noise, fock_n=fock_n, depth=depth)
    result = {**_metadata("threshold", seed, params), **report.to_dict()}
    result.update({"y_star": None, "tail_bound": None, "binomial_tail_bound": None, "hilbert_dim": None})

    if report.simulable and n is not None and report.condition not in ("per_layer", "general_input"):
        cap = y_star(int(n), epsilon, report.parameter, delta)
        result["y_star"] = cap
        result["tail_bound"] = tail_bound(int(n), cap, report.parameter, delta)
        result["binomial_tail_bound"] = binomial_tail_bound(int(n), cap, report.parameter, delta)
        bound = hilbert_dim_bound(max(cap, 1.0), delta, int(fock_n or 1))
        result["hilbert_dim"] = {
            "exact": bound.exact,
            "relaxation": None if math.isinf(bound.relaxation) else bound.relaxation,
        }
    logger.info(
        f"{report.condition}: load {report.load:.6g}, margin {report.margin:.6g}, "
        f"simulable={report.simulable}"
    )
    _write_text(args.out or "-", _dumps(result) + "\n")
    return EXIT_OK


def cmd_verify(args, config: dict, config_dir: str) -> int:
    seed = int(_pick(args.seed, config.get("run", {}), "seed", 0))
    settings = dict(config["verify"] or {})
    logger.info("Verification settings:")
    _log_parameters({**settings, "seed": seed, "inject_fault": args.inject_fault})
    results = run_verification(settings, seed=seed, inject_fault=args.inject_fault)
    report = {
        "artifact_version": ARTIFACT_VERSION,
        "seed": seed,
        "parameters": settings,
        "inject_fault": args.inject_fault,
        "passed": all(r.passed for r in results),
        "checks": [r.to_dict() for r in results],
    }
    _write_text(args.out or "-", _dumps(report) + "\n")
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"Failed checks: {', '.join(failed)}")
        return EXIT_VERIFY_FAILED
    logger.info("All checks passed")
    return EXIT_OK


def cmd_mps_check(args, config: dict, config_dir: str) -> int:
    cfg = config["mps"]
    circuit, input_spec = _load_circuit_and_input(args, cfg, config_dir)
    threshold = float(_pick(args.threshold, cfg, "threshold", 0.0))
    max_bond = _pick(args.max_bond, cfg, "max_bond")
    local_dim = _pick(args.local_dim, cfg, "local_dim")
    seed = int(_pick(args.seed, config.get("run", {}), "seed", 0))
    params = {
        "circuit_modes": circuit.num_modes,
        "depth": circuit.depth,
        "inputs": {str(k): v for k, v in input_spec.occupations.items()},
        "threshold": threshold,
        "max_bond": max_bond,
        "local_dim": local_dim,
    }
    logger.info("MPS parameters:")
    _log_parameters(params)

    state = evolve_circuit(
        circuit, input_spec, local_dim=local_dim, trunc_threshold=threshold,
        max_bond=None if max_bond is None else int(max_bond),
    )
    report = {**_metadata("mps-check", seed, params), **state.report()}
    report["photons"] = input_spec.n_photons
    report["delta"] = lightcone_bipartite(circuit, input_spec).delta
    if state.local_dim ** circuit.num_modes <= DENSE_CHECK_LIMIT:
        psi = dense_evolve(circuit, input_spec, state.local_dim)
        report["fidelity"] = fidelity(state, psi)
        report["schmidt_ranks"] = [
            schmidt_rank_check(psi, cut, input_spec.num_inputs, n_max=input_spec.max_photon)
            for cut in range(1, circuit.num_modes)
        ]
    _write_text(args.out or "-", _dumps(report) + "\n")
    return EXIT_OK


COMMANDS: Dict[str, Callable] = {
    "percolate": cmd_percolate,
    "sample": cmd_sample,
    "threshold": cmd_threshold,
    "verify": cmd_verify,
    "mps-check": cmd_mps_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    tag = args.command.upper()
    setup_logger(args.log, tag)
    try:
        config_path = os.path.abspath(args.config)
        config_dir = os.path.dirname(config_path)
        config = load_config(config_path, REQUIRED_SECTIONS[args.command])
        if args.log is None and "logging" in config:
            log_cfg = config["logging"]
            log_dir = make_absolute(log_cfg.get("log_dir", "."), config_dir)
            setup_logger(os.path.join(log_dir, log_cfg.get("process_log", "process_log.txt")), tag)
        logger.info(f"Running {args.command} with config {config_path}")
        return COMMANDS[args.command](args, config, config_dir)
    except SimulationError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
