"""Scenario configuration: TOML files with dotted sections.

A config names one scenario and overrides any of its defaults.  Unknown
keys, wrong types and out-of-range values are rejected with the line they
appear on.  The resolved config (defaults merged in) is what gets echoed
into run reports, and it re-parses to itself.
"""
from __future__ import annotations

import copy
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid config; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = path or "<config>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.reason = message


GRID = {"dim": 3, "n": 32, "spacing": 0.5, "bc": "isolated"}
INITIAL = {"width": 1.5, "center": [-0.25, -0.25, -0.25], "velocity": [0.0, 0.0, 0.0]}

SCHEMAS: dict[str, dict[str, dict]] = {
    "kernel-verify": {
        "kernel": {"sigmas": [0.01, 0.1, 1.0, 4.0], "r_over_sigma_max": 100.0, "n_scan": 10000},
        "poisson": {"n": 32, "spacing": 1.0, "G": 1.0},
    },
    "nse-evolve": {
        "physics": {"mass": 1.0, "G": 2.0},
        "grid": dict(GRID),
        "initial": dict(INITIAL),
        "evolution": {"dt": 0.0, "steps": 200, "record_every": 10, "snapshot": True},
        "assert": {"energy_drift": 1e-3, "norm_drift_per_step": 1e-12},
    },
    "nse-ground": {
        "physics": {"mass": 1.0, "G": 1.0},
        "grid": dict(GRID),
        "initial": {"width": 1.5, "center": [-0.25, -0.25, -0.25]},
        "solver": {"itol": 1e-9, "max_iter": 5000},
        "stationarity": {"steps": 100, "dt_fraction": 0.125},
        "assert": {"density_drift": 1e-6},
    },
    "hartree-coulomb": {
        "physics": {"mass": 1.0, "e2": 4.0},
        "grid": dict(GRID),
        "initial": {"width": 1.0, "center": [-0.25, -0.25, -0.25]},
        "evolution": {"dt": 0.0, "steps": 40, "record_every": 4, "snapshot": False},
        "assert": {"norm_drift_per_step": 1e-12},
    },
    "fock-sectors": {
        "lattice": {"dim": 1, "sites": 4, "spacing": 1.0, "stencil": "fourth"},
        "physics": {"mass": 1.0, "G": 1.0, "e2": 4.0, "sigma": 2.0},
        "check": {"n_random": 20, "t": 1.0},
    },
    "meanfield-converge": {
        "lattice": {"sites": 4, "spacing": 1.0, "stencil": "fourth"},
        "physics": {"mass": 1.0, "sigma": 2.0, "kind": "gravity"},
        "meanfield": {"N": [2, 3, 4, 5, 6], "g_total": 20.0, "t": 2.0, "dt": 0.005,
                      "n_records": 4},
    },
    "sce-misstep": {
        "lattice": {"dim": 1, "sites": 16, "spacing": 1.0, "stencil": "fourth"},
        "physics": {"mass": 1.0, "G": 1.0, "sigma": 2.0},
        "initial": {"width": 1.5},
        "evolution": {"t": 10.0, "dt": 0.01, "fixed_source": False},
        "assert": {"threshold": 0.01, "cross_solver": 1e-10, "density_independence": 1e-12},
    },
    "hydrogen-wrong-nse": {
        "physics": {"reduced_mass": 1.0, "alpha": 1.0},
        "radial": {"r_max": 60.0, "n_points": 4000, "mixing": 0.5},
        "assert": {"hydrogen_rel": 1e-3, "wrong_rel": 0.1},
    },
}

TOP_LEVEL = {"scenario", "output", "seed"}

# keys whose values (or every list element) must be > 0, or >= 0
_POSITIVE = {"mass", "spacing", "sigma", "width", "reduced_mass", "r_max", "itol", "t",
             "n", "steps", "record_every", "sites", "n_scan", "r_over_sigma_max", "max_iter",
             "n_points", "n_records", "dt_fraction", "threshold", "mixing"}
_NON_NEGATIVE = {"G", "e2", "alpha", "g_total", "dt", "n_random"}
_CHOICES = {"bc": ("isolated", "periodic"), "stencil": ("nn", "fourth"),
            "kind": ("gravity", "coulomb"), "dim": (1, 3)}


def key_lines(text: str) -> dict[str, int]:
    """Map dotted key paths (and section headers) to their 1-based line numbers."""
    lines: dict[str, int] = {}
    section = ""
    header = re.compile(r"^\s*\[\s*([^\]]+?)\s*\]")
    assign = re.compile(r"^\s*([A-Za-z0-9_\-\.\"' ]+?)\s*=")
    for no, raw in enumerate(text.splitlines(), start=1):
        m = header.match(raw)
        if m:
            section = m.group(1).replace('"', "").replace("'", "").replace(" ", "")
            lines.setdefault(section, no)
            continue
        m = assign.match(raw)
        if m:
            key = m.group(1).replace('"', "").replace("'", "").replace(" ", "")
            lines.setdefault(f"{section}.{key}" if section else key, no)
    return lines


def _type_ok(default, value) -> bool:
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list) and all(
            _type_ok(default[0], v) for v in value) if default else isinstance(value, list)
    return False


def _type_name(default) -> str:
    if isinstance(default, list):
        return f"list of {_type_name(default[0])}" if default else "list"
    return {bool: "boolean", int: "integer", float: "number", str: "string"}[type(default)]


@dataclass
class ScenarioConfig:
    scenario: str
    output: str
    seed: int
    params: dict[str, dict] = field(default_factory=dict)
    source: str | None = None

    def __getitem__(self, section: str) -> dict:
        return self.params[section]

    def as_dict(self) -> dict:
        out = {"scenario": self.scenario, "output": self.output, "seed": self.seed}
        out.update(copy.deepcopy(self.params))
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.as_dict())

    def content_hash(self) -> str:
        """Git blob hash of the canonical TOML echo."""
        data = self.to_toml().encode()
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def parse_config(text: str, path: str | None = None) -> ScenarioConfig:
    if not text.strip():
        raise ConfigError("config is empty", 1, path)
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"parse error: {exc}", int(m.group(1)) if m else None, path) from None
    lines = key_lines(text)
    if "scenario" not in raw:
        raise ConfigError("missing required key 'scenario'", 1, path)
    scenario = raw["scenario"]
    if scenario not in SCHEMAS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of "
                          f"{', '.join(sorted(SCHEMAS))}", lines.get("scenario"), path)
    schema = SCHEMAS[scenario]
    for key, value in raw.items():
        if key in TOP_LEVEL:
            continue
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for scenario {scenario!r}",
                              lines.get(key), path)
        if not isinstance(value, dict):
            raise ConfigError(f"{key!r} must be a [section]", lines.get(key), path)
    output = raw.get("output", f"runs/{scenario}")
    if not isinstance(output, str) or not output:
        raise ConfigError("'output' must be a non-empty string", lines.get("output"), path)
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("'seed' must be a non-negative integer", lines.get("seed"), path)

    params: dict[str, dict] = {}
    for section, defaults in schema.items():
        given = raw.get(section, {})
        merged = copy.deepcopy(defaults)
        for key, value in given.items():
            dotted = f"{section}.{key}"
            line = lines.get(dotted, lines.get(section))
            if key not in defaults:
                raise ConfigError(f"unknown key {dotted!r}", line, path)
            if not _type_ok(defaults[key], value):
                raise ConfigError(f"{dotted} must be a {_type_name(defaults[key])}, "
                                  f"got {value!r}", line, path)
            if isinstance(defaults[key], float):
                value = float(value)
            elif isinstance(defaults[key], list) and defaults[key] and isinstance(
                    defaults[key][0], float):
                value = [float(v) for v in value]
            merged[key] = value
        for key, value in merged.items():
            dotted = f"{section}.{key}"
            line = lines.get(dotted, lines.get(section))
            values = value if isinstance(value, list) else [value]
            if key in _POSITIVE and not all(v > 0 for v in values):
                raise ConfigError(f"{dotted} must be > 0, got {value!r}", line, path)
            if key in _NON_NEGATIVE and not all(v >= 0 for v in values):
                raise ConfigError(f"{dotted} must be >= 0, got {value!r}", line, path)
            if key in _CHOICES and value not in _CHOICES[key]:
                raise ConfigError(f"{dotted} must be one of {_CHOICES[key]}, got {value!r}",
                                  line, path)
            if key == "n" and section == "grid" and value & (value - 1):
                raise ConfigError(f"{dotted} must be a power of two, got {value}", line, path)
            if key == "N" and (not value or min(value) < 2):
                raise ConfigError(f"{dotted} must list particle numbers >= 2", line, path)
        params[section] = merged
    if "grid" in params and params["grid"]["dim"] == 1 and params["grid"]["bc"] == "isolated":
        raise ConfigError("grid.bc = 'isolated' needs dim = 3; use 'periodic' in 1D",
                          lines.get("grid.bc", lines.get("grid.dim", lines.get("grid"))), path)
    if "grid" in params and "initial" in params:
        dim = params["grid"]["dim"]
        for key in ("center", "velocity"):
            if key in params["initial"] and len(params["initial"][key]) != dim:
                raise ConfigError(f"initial.{key} needs {dim} components",
                                  lines.get(f"initial.{key}", lines.get("initial")), path)
    return ScenarioConfig(scenario, output, seed, params, path)


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(p)) from None
    return parse_config(text, str(p))


def default_config(scenario: str, output: str | None = None) -> ScenarioConfig:
    if scenario not in SCHEMAS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    return ScenarioConfig(scenario, output or f"runs/{scenario}", 0,
                          copy.deepcopy(SCHEMAS[scenario]))
