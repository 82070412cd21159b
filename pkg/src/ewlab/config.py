"""Experiment configuration: JSON documents, defaults, and fingerprints.

Each CLI subcommand reads a single JSON object.  Unknown fields are an
error (they usually mean a typo that would silently run the wrong
experiment).  The fingerprint is a sha256 over the canonicalized
physics-relevant configuration plus the master seed; it keys the
per-realization checkpoints and is embedded in every output file, so
outputs from different configurations can never be mixed up silently.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import ConfigurationError
from .fields import LatticeGrid, TestFunction
from .mollifier import MollifierSpec

_G_DEFAULT = {"kind": "gaussian-bump", "scale": 1.0, "amplitude": 1.0}

DEFAULTS = {
    "theory": {
        "seed": 0,
        "beta": 0.2,
        "truncation_T": 64.0,
        "n_paths": 20000,
        "x_quadrature_nodes": 16,
        "dt_paths": 0.01,
        "t_values": [1.0],
        "g": _G_DEFAULT,
        "mollifier_radius": 0.5,
    },
    "fluctuations": {
        "seed": 0,
        "beta": 0.2,
        "t": 1.0,
        "g": {"kind": "gaussian-bump", "scale": 0.125, "amplitude": 1.0},
        "eps_ladder": [0.5, 0.25, 0.125],
        "n_realizations": [200, 200, 200],
        "spacing": 0.5,
        "dt": 0.03125,
        "f_tags": ["log", "identity", "log-minus-y"],
        "wrap_tol": 0.05,
        "floor": 1e-8,
        "nu_eff_sq": None,
        "nu_paths": 20000,
        "nu_truncation_T": 64.0,
        "nu_dt": 0.01,
        "sigma_f_sq": {"log": 1.0, "identity": 1.0, "log-minus-y": 0.0},
        "mollifier_radius": 0.5,
    },
    "polymer": {
        "seed": 0,
        "beta": 0.2,
        "T": 64.0,
        "n_realizations": 200,
        "grid": {"spacing": 0.5, "n_cells": 32},
        "dt": 0.03125,
        "checkpoint_times": [8.0, 16.0, 32.0],
        "orders": [1, 2],
        "horizons": [32.0, 64.0],
        "floor": 1e-8,
        "f_tags": ["identity", "log", "log-minus-y", "square"],
        "mollifier_radius": 0.5,
    },
    "toy": {
        "seed": 0,
        "f_tags": ["identity", "square", "cube", "log", "log-minus-y"],
        "deltas": [0.1, 0.05, 0.01],
    },
    "covdecay": {
        "seed": 0,
        "beta": 0.4,
        "T": 320.0,
        "grid": {"spacing": 1.0, "n_cells": 48},
        "dt": 0.125,
        "offsets": [4, 6, 8, 12, 16],
        "block": 2,
        "n_realizations": 200,
        "f_tags": ["identity", "square"],
        "mollifier_radius": 0.5,
    },
}

#: fields that never affect the numbers, hence stay out of the fingerprint
_NON_PHYSICS = {"out"}


def load_config(command: str, path=None, seed=None) -> dict:
    """Defaults for `command`, overridden by the JSON file at `path` and the
    explicit `seed`.  Unknown fields raise ConfigurationError naming them."""
    if command not in DEFAULTS:
        raise ConfigurationError(f"unknown command {command!r}")
    cfg = json.loads(json.dumps(DEFAULTS[command]))  # deep copy
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigurationError("config must be a JSON object")
        for key, val in user.items():
            if key in _NON_PHYSICS:
                continue
            if key not in cfg:
                raise ConfigurationError(
                    f"unknown config field {key!r} for command {command!r}"
                )
            cfg[key] = val
    if seed is not None:
        cfg["seed"] = int(seed)
    _validate(command, cfg)
    return cfg


def _validate(command: str, cfg: dict):
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigurationError("field 'seed' must be a nonnegative integer")
    for key in ("beta", "t", "T", "dt", "floor", "wrap_tol"):
        if key in cfg and not isinstance(cfg[key], (int, float)):
            raise ConfigurationError(f"field {key!r} must be a number")
    if command == "fluctuations":
        if len(cfg["eps_ladder"]) != len(cfg["n_realizations"]):
            raise ConfigurationError(
                "'n_realizations' must list one budget per ladder rung"
            )
        for tag in cfg["f_tags"]:
            if tag not in cfg["sigma_f_sq"]:
                raise ConfigurationError(
                    f"field 'sigma_f_sq' is missing an entry for f_tag {tag!r}"
                )
    if command == "polymer":
        missing = set(map(float, cfg["horizons"])) - (
            set(map(float, cfg["checkpoint_times"])) | {float(cfg["T"])}
        )
        if missing:
            raise ConfigurationError(
                f"'horizons' {sorted(missing)} not covered by "
                "'checkpoint_times' or 'T'"
            )


def fingerprint(command: str, cfg: dict) -> str:
    """Stable sha256 of the canonicalized physics-relevant configuration."""
    physics = {k: v for k, v in cfg.items() if k not in _NON_PHYSICS}
    doc = json.dumps(
        {"command": command, "config": physics},
        sort_keys=True, separators=(",", ":"),
    )
    return hashlib.sha256(doc.encode()).hexdigest()


def test_function_from(spec: dict) -> TestFunction:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigurationError("field 'g' must be an object with a 'kind'")
    known = {"kind", "scale", "amplitude", "center"}
    extra = set(spec) - known
    if extra:
        raise ConfigurationError(f"unknown test-function fields {sorted(extra)}")
    kwargs = {"kind": spec["kind"]}
    for key in ("scale", "amplitude"):
        if key in spec:
            kwargs[key] = float(spec[key])
    if "center" in spec:
        kwargs["center"] = tuple(float(c) for c in spec["center"])
    return TestFunction(**kwargs)


def grid_from(spec: dict) -> LatticeGrid:
    if not isinstance(spec, dict) or set(spec) - {"spacing", "n_cells"}:
        raise ConfigurationError(
            "field 'grid' must be {'spacing': h, 'n_cells': n}"
        )
    return LatticeGrid(dim=3, spacing=float(spec["spacing"]),
                       n_cells=int(spec["n_cells"]))


def mollifier_from(cfg: dict) -> MollifierSpec:
    return MollifierSpec(support_radius=float(cfg.get("mollifier_radius", 0.5)))
