# optics_percolation/utils.py

import os
import sys
import json
import logging
from typing import Any, Callable, Mapping, Optional

import numpy as np
import yaml

from .errors import ParameterError, StructureError

try:
    from numba import njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args: Any, **kwargs: Any) -> Callable:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


ARTIFACT_VERSION = "0.1.0"

LOG_FORMAT = "%(asctime)s [%(levelname)s] [{tag}] %(message)s"


def setup_logger(log_path: Optional[str], tag: str, level=logging.INFO) -> None:
    """Configure the root logger with a stderr handler and an optional log file."""
    log_format = LOG_FORMAT.format(tag=tag)
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_path:
        os.makedirs(os.path.dirname(os.path.abspath(log_path)), exist_ok=True)
        handlers.append(logging.FileHandler(log_path))
    logging.basicConfig(level=level, format=log_format, handlers=handlers, force=True)


def make_absolute(path, base_dir):
    return (
        path if os.path.isabs(path) else os.path.abspath(os.path.join(base_dir, path))
    )


def load_config(config_path: str, required_sections=()) -> dict:
    """Load a YAML (or JSON) config file and check its required sections."""
    if not os.path.exists(config_path):
        raise ParameterError(f"Config file does not exist: {config_path}")
    try:
        with open(config_path, "r") as f:
            config = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ParameterError(f"Config file {config_path} is not valid YAML or JSON: {e}")
    if not isinstance(config, dict):
        raise ParameterError(f"Config file {config_path} must contain a mapping")

    for section in required_sections:
        if section not in config:
            raise ParameterError(
                f"Missing required section '{section}' in config file {config_path}"
            )
    return config


def load_json(path: str, what: str) -> Mapping:
    """Read a JSON object from ``path``; ``what`` names the file in error messages."""
    if not os.path.exists(path):
        raise ParameterError(f"{what} file not found: {path}")
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise StructureError(f"{what} file {path} is not valid JSON: {e}")
    if not isinstance(data, Mapping):
        raise StructureError(f"{what} file {path} must contain a JSON object")
    return data


def stream_rng(seed: int, *indices: int) -> np.random.Generator:
    """Independent generator for one (seed, index...) cell of an experiment.

    Streams are derived with ``SeedSequence(seed, spawn_key=indices)`` so the
    draws of a cell never depend on how many cells ran before it or on which
    worker ran it.
    """
    if seed < 0:
        raise ParameterError(f"Seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(i) for i in indices))
    return np.random.default_rng(sequence)


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed or None and return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
