"""Run configuration: TOML-syntax ``.cfg`` files with fixed sections.

Every section has a closed key set; unknown sections or keys are errors.
Loading fills defaults, so ``loads(dumps(cfg)) == cfg`` holds for any
loaded configuration.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomli
import tomli_w

from .newton import NewtonConfig
from .scenarios import LBIC_DEFAULTS, PSC_DEFAULTS, ScenarioError, build_scenario

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "loads_config",
    "dumps_config",
    "bundled_configs",
    "resolve_config_path",
    "parse_override",
    "parse_values",
]


class ConfigError(ValueError):
    pass


SOLVER_DEFAULTS = {
    "max_iter": 60,
    "atol": 1e-11,
    "rtol": 0.0,
    "damping_initial": 0.1,
    "damping_growth": 2.0,
    "damping_min": 1e-4,
    "voltage_steps": 9,
    "g_start": 1e-2,
}

BOUNDS_DEFAULTS = {"p": math.inf, "K": 1.0, "K_q": 1.0, "K_r": 1.0}

OUTPUT_DEFAULTS = {"directory": "out", "profile": True, "manifest": True}

SWEEP_DEFAULTS = {"parameter": "G0", "values": [1e-2, 1e-1, 1.0, 10.0, 100.0]}

SCAN_DEFAULTS = {"line_y": 2.0, "full_grid": False, "contact": "contact2"}

_FAMILY_DEFAULTS = {"psc": PSC_DEFAULTS, "lbic": LBIC_DEFAULTS}

_SECTIONS = {
    "solver": SOLVER_DEFAULTS,
    "bounds": BOUNDS_DEFAULTS,
    "output": OUTPUT_DEFAULTS,
    "sweep": SWEEP_DEFAULTS,
    "scan": SCAN_DEFAULTS,
}


def _normalize_scenario(raw):
    if "family" not in raw:
        raise ConfigError("[scenario] needs a 'family' key (psc or lbic)")
    family = raw["family"]
    if family not in _FAMILY_DEFAULTS:
        raise ConfigError(f"unknown scenario family {family!r}")
    defaults = _FAMILY_DEFAULTS[family]
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown keys in [scenario]: {unknown}")
    out = dict(defaults)
    out.update(raw)
    if family == "lbic":
        out["center"] = [float(c) for c in out["center"]]
    return out


def _normalize_section(name, raw):
    defaults = _SECTIONS[name]
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {unknown}")
    out = copy.deepcopy(defaults)
    out.update(raw)
    for key, default in defaults.items():
        val = out[key]
        if isinstance(default, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"[{name}] {key} must be true or false")
        elif isinstance(default, float) and isinstance(val, int) and not isinstance(val, bool):
            out[key] = float(val)
        elif isinstance(default, (int, float)) and not isinstance(val, (int, float)):
            raise ConfigError(f"[{name}] {key} must be a number")
    if name == "sweep":
        out["values"] = [float(v) for v in out["values"]]
    return out


@dataclass
class RunConfig:
    scenario: dict
    solver: dict = field(default_factory=lambda: dict(SOLVER_DEFAULTS))
    bounds: dict = field(default_factory=lambda: dict(BOUNDS_DEFAULTS))
    output: dict = field(default_factory=lambda: dict(OUTPUT_DEFAULTS))
    sweep: dict = field(default_factory=lambda: copy.deepcopy(SWEEP_DEFAULTS))
    scan: dict = field(default_factory=lambda: dict(SCAN_DEFAULTS))

    @classmethod
    def from_dict(cls, data):
        unknown = sorted(set(data) - {"scenario", *_SECTIONS})
        if unknown:
            raise ConfigError(f"unknown sections: {unknown}")
        if "scenario" not in data:
            raise ConfigError("missing [scenario] section")
        kw = {"scenario": _normalize_scenario(dict(data["scenario"]))}
        for name in _SECTIONS:
            kw[name] = _normalize_section(name, dict(data.get(name, {})))
        cfg = cls(**kw)
        cfg.newton()  # validates solver values early
        return cfg

    def to_dict(self):
        scen = {k: v for k, v in self.scenario.items() if v is not None}
        if "center" in scen:
            scen["center"] = list(scen["center"])
        return {"scenario": scen, **{n: copy.deepcopy(getattr(self, n)) for n in _SECTIONS}}

    def newton(self):
        s = self.solver
        try:
            return NewtonConfig(
                max_iter=int(s["max_iter"]), atol=float(s["atol"]), rtol=float(s["rtol"]),
                damping_initial=float(s["damping_initial"]),
                damping_growth=float(s["damping_growth"]),
                damping_min=float(s["damping_min"]),
            )
        except ValueError as exc:
            raise ConfigError(f"[solver] {exc}") from exc

    def build_scenario(self):
        params = dict(self.scenario)
        if params["family"] == "lbic":
            params["center"] = tuple(params["center"])
        try:
            return build_scenario(params)
        except (ScenarioError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def bound_kw(self):
        b = self.bounds
        return {"p": float(b["p"]), "K": float(b["K"]), "K_q": float(b["K_q"]),
                "K_r": float(b["K_r"])}

    def with_overrides(self, overrides):
        data = self.to_dict()
        for item in overrides:
            key, value = parse_override(item)
            section, _, name = key.partition(".")
            if not name:
                raise ConfigError(f"override {item!r} must look like section.key=value")
            data.setdefault(section, {})[name] = value
        return RunConfig.from_dict(data)


def loads_config(text):
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    return RunConfig.from_dict(data)


def dumps_config(cfg):
    return tomli_w.dumps(cfg.to_dict())


def bundled_configs():
    root = resources.files("ddbounds.configs")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def resolve_config_path(name):
    """A filesystem path, or the name of a bundled config (with or without .cfg)."""
    path = Path(name)
    if path.is_file():
        return path.read_text()
    root = resources.files("ddbounds.configs")
    for cand in (name, f"{name}.cfg"):
        res = root.joinpath(cand)
        if res.is_file():
            return res.read_text()
    raise ConfigError(f"config {name!r} not found (bundled: {', '.join(bundled_configs())})")


def load_config(name):
    return loads_config(resolve_config_path(name))


def parse_override(item):
    """``section.key=value`` with a TOML value; bare words become strings."""
    key, sep, raw = item.partition("=")
    if not sep:
        raise ConfigError(f"override {item!r} lacks '='")
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw
    return key.strip(), value


def parse_values(spec):
    """``a:b:logN``, ``a:b:linN`` or a comma list into a list of floats."""
    import numpy as np

    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad value range {spec!r}")
        a, b, mode = float(parts[0]), float(parts[1]), parts[2]
        if mode.startswith("log"):
            n = int(mode[3:])
            if a <= 0 or b <= 0:
                raise ConfigError("log ranges need positive ends")
            vals = np.logspace(np.log10(a), np.log10(b), n)
            vals[0], vals[-1] = a, b
        elif mode.startswith("lin"):
            vals = np.linspace(a, b, int(mode[3:]))
        else:
            raise ConfigError(f"bad range mode {mode!r}")
        # round to 15 significant digits so 1e-2:1e2:log5 gives 0.1, 1, 10 exactly
        return [float(f"{v:.15g}") for v in vals]
    try:
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad value list {spec!r}") from exc
