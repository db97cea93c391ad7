"""Experiment configuration: one JSON document, defaults live here only."""
from __future__ import annotations

import copy
import json
import math
from pathlib import Path
from typing import List

from . import geometry
from .errors import PWGaussError
from .nodes import NodeRecipe
from .pwspace import BandlimitedFunction, random_bandlimited, zero_function

DEFAULTS = {
    "domain": {"shape": "box", "halfwidths": [1.0], "dim": 1},
    "nodes": {
        "kind": "lattice",          # lattice | kadec | file
        "spacing": math.pi,
        "extent": 64,
        "magnitude": 0.0,
        "seed": 7,
        "file": None,
    },
    "function": {
        "kind": "random",           # random | explicit | file | zero | samples
        "beta": 0.5,
        "n_atoms": 3,
        "seed": 42,
        "real_valued": True,
        "atoms": None,
        "path": None,
        "values": None,
    },
    "lambdas": [0.5, 0.35, 0.25, 0.18, 0.125, 0.09, 0.0625],
    "lambda": None,
    "truncation": {
        "enabled": True,
        "base_radius": None,        # None + certify: found by the doubling test
        "c": 12.0,
        "certify": True,
        "start_spacings": 20,
        "tolerance": 0.05,
        "max_doublings": 6,
    },
    "window": None,
    "grid_density": None,
    "quadrature_points": 96,
    "rate_tolerance": 0.15,
    "dump_gram": False,
    "output_dir": "pwgauss-out",
    "threads": 1,
}


class ConfigError(PWGaussError, ValueError):
    """Malformed or inconsistent experiment configuration."""


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge(base[key], val, path + key + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve(raw: dict) -> dict:
    """Merge a user document over the defaults and validate it."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = _merge(DEFAULTS, raw)
    try:
        dom = geometry.SpectrumDomain.from_dict(cfg["domain"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad domain: {exc}") from None
    cfg["domain"] = dom.to_dict()
    nodes = cfg["nodes"]
    if nodes["kind"] not in ("lattice", "kadec", "file"):
        raise ConfigError(f"unknown node kind {nodes['kind']!r}")
    if nodes["kind"] == "file" and not nodes["file"]:
        raise ConfigError("node kind 'file' needs nodes.file")
    if nodes["kind"] != "file" and not (nodes["spacing"] and nodes["spacing"] > 0):
        raise ConfigError("nodes.spacing must be positive")
    fn = cfg["function"]
    if fn["kind"] not in ("random", "explicit", "file", "zero", "samples"):
        raise ConfigError(f"unknown function kind {fn['kind']!r}")
    if int(cfg["threads"]) < 1:
        raise ConfigError("threads must be >= 1")
    return cfg


def load(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return resolve(raw)


def domain_of(cfg) -> geometry.SpectrumDomain:
    return geometry.SpectrumDomain.from_dict(cfg["domain"])


def recipe_of(cfg) -> NodeRecipe:
    n = cfg["nodes"]
    dim = int(cfg["domain"]["dim"])
    magnitude = float(n["magnitude"]) if n["kind"] == "kadec" else 0.0
    return NodeRecipe(dim, float(n["spacing"]), int(n["extent"]) if n["extent"] else None,
                      magnitude, int(n["seed"]))


def function_of(cfg) -> BandlimitedFunction:
    fn = cfg["function"]
    dim = int(cfg["domain"]["dim"])
    kind = fn["kind"]
    if kind == "random":
        return random_bandlimited(dim, float(fn["beta"]), int(fn["n_atoms"]), int(fn["seed"]),
                                  bool(fn["real_valued"]))
    if kind == "zero":
        return zero_function(dim, float(fn["beta"]))
    if kind == "explicit":
        spec = {"dim": dim, "beta": fn["beta"], "real_valued": fn["real_valued"],
                "atoms": fn["atoms"] or []}
        return BandlimitedFunction.from_dict(spec)
    if kind == "file":
        if not fn["path"] or not Path(fn["path"]).exists():
            raise ConfigError(f"function file {fn['path']!r} not found")
        return BandlimitedFunction.load(fn["path"])
    raise ConfigError(f"function kind {kind!r} does not describe a bandlimited function")


def hypothesis_warnings(domain: geometry.SpectrumDomain, beta: float,
                        node_kind: str = "lattice") -> List[str]:
    """Which hypotheses of the flat-limit convergence theorem this setup violates."""
    out = []
    delta = geometry.inscribed_delta(domain)
    if not (math.sqrt(2.0 / 3.0) < delta <= 1.0):
        out.append(f"hypothesis 'delta in (sqrt(2/3), 1]' violated: delta = {delta:.6g}")
    if not geometry.circumscribed_in_unit_ball(domain):
        out.append("hypothesis 'delta*B_2 subset Z subset B_2' violated: Z is not inside B_2")
    window = 3.0 * delta * delta - 2.0
    if window <= 0 or not (0 < beta < math.sqrt(window)):
        limit = "empty" if window <= 0 else f"{math.sqrt(window):.6g}"
        out.append(f"hypothesis '0 < beta < sqrt(3 delta^2 - 2)' violated: beta = {beta:.6g}, "
                   f"bound = {limit}")
    if node_kind == "kadec" and domain.dim >= 2:
        out.append("per-axis Kadec bound L < h/4 is a conservative stand-in in d >= 2, "
                   "not a proven Riesz-basis criterion")
    return out
