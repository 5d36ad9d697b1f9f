"""Experiment configuration loading and command-line overrides."""

from __future__ import annotations

import json

from .errors import ConfigError

SCHEMA_HINT = """\
expected config shape:
{
  "model": {"family": "uniform_binary|dirac_binary|dissipative_uniform_binary|beta_binary",
             "params": {...}, "eps": <beta_binary truncation>},
  "alpha": 0.0,
  "eta_grid": [0.0625, ..., 0.0009765625],   # strictly decreasing, in (0,1)
  "replicas": 200,
  "master_seed": 20260810,
  "functionals": [
    {"kind": "energy", "psi": {"name": "const|mass_power|excess_power|deficit", ...}, "p": -0.5},
    {"kind": "empirical", "f": {"name": "const|power", ...}},
    {"kind": "lambda", "p": "p_star"},
    {"kind": "m_mart", "p": "p_star", "times": [0.25, 0.5, 1.0]},
    {"kind": "count", "rho": 0.5},
    {"kind": "sigma"}
  ],
  "tolerances": {"se_multiplier": 4.0, "contraction_fraction": 0.9,
                  "exact_tol": 1e-9, "quarantine_fraction": 0.01,
                  "trend_alpha": 0.05},
  "batch_size": 32, "event_budget": 100000000, "workers": 1
}"""


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply `a.b.c=value` overrides; values parse as JSON, else strings."""
    out = json.loads(json.dumps(cfg))  # deep copy, JSON types only
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        path, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        keys = path.split(".")
        node = out
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ConfigError(f"override path {path!r} not in config")
            node = node[k]
        if not isinstance(node, dict):
            raise ConfigError(f"override path {path!r} not in config")
        node[keys[-1]] = value
    return out
