"""Flat key-value run configurations for the renewal solver and the simulator.

Files are TOML restricted to top-level ``key = value`` pairs.  Unknown keys
are rejected, defaults are materialised, and the resolved dictionary is
itself a valid configuration, so loading a manifest's ``[config]`` table
reproduces the run exactly.
"""
from __future__ import annotations

import dataclasses
import os
import sys
from pathlib import Path

from .errors import ConfigError
from .params import PhysParams
from .renewal import RenewalProblem
from .spectral import GridSpec
from .spde import SimConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "parse_toml",
    "load_config",
    "resolve_renewal",
    "resolve_spde",
    "renewal_problem",
    "sim_config",
    "env_overrides",
    "ENV_SEED",
    "ENV_ENSEMBLE",
    "ENV_THREADS",
]

ENV_SEED = "FRACBURST_SEED"
ENV_ENSEMBLE = "FRACBURST_ENSEMBLE"
ENV_THREADS = "FRACBURST_THREADS"

_PROBLEM_KEYS = tuple(f.name for f in dataclasses.fields(RenewalProblem))
_RENEWAL_EXTRA = ("alpha", "beta", "nu", "p", "relaxed")
_GRID_KEYS = ("dim", "n", "L")
_PHYS_KEYS = ("alpha", "beta", "gamma", "nu", "relaxed")
_SIM_KEYS = tuple(f.name for f in dataclasses.fields(SimConfig) if f.name not in ("grid", "params"))
_SPDE_DEFAULTS = {"dim": 3, "n": 16, "L": GridSpec.L, "alpha": 1.2, "beta": 0.4, "gamma": 0.25, "nu": 1.0}


def _key_line(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), start=1):
        head = line.split("=", 1)[0].strip().strip("\"'")
        if "=" in line and head == key:
            return i
    return None


def _where(source: str, text: str, key: str) -> str:
    line = _key_line(text, key)
    return f"{source}: line {line}" if line else source


def parse_toml(text: str, source: str = "<config>") -> dict:
    """Parse flat TOML, raising :class:`ConfigError` with the offending line."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            raise ConfigError(f"{source}: {exc}") from None
        raise ConfigError(f"{source}: line {line}: {getattr(exc, 'msg', exc)}") from None
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(f"{_where(source, text, key)}: tables are not supported, found [{key}]")
    return data


def load_config(path) -> dict:
    """Read and parse a configuration file (an empty file is valid)."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    data = parse_toml(text, str(p))
    data["__text__"] = text
    data["__source__"] = str(p)
    return data


def _split_meta(raw: dict) -> tuple[dict, str, str]:
    raw = dict(raw)
    text = raw.pop("__text__", "")
    source = raw.pop("__source__", "<config>")
    return raw, text, source


def _reject_unknown(raw: dict, allowed, text: str, source: str) -> None:
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"{_where(source, text, key)}: unknown key '{key}' (allowed: {', '.join(sorted(allowed))})")


def resolve_renewal(raw: dict, relaxed: bool = False) -> dict:
    """Resolved flat renewal configuration with every default materialised.

    Given ``alpha`` and ``beta``, the exponents ``sigma``, ``delta``,
    ``gamma`` and ``delta0`` are derived from them unless set explicitly.
    """
    raw, text, source = _split_meta(raw)
    _reject_unknown(raw, _PROBLEM_KEYS + _RENEWAL_EXTRA, text, source)
    relaxed = bool(raw.pop("relaxed", False)) or relaxed
    phys = {k: raw.pop(k) for k in ("alpha", "beta", "nu", "p") if k in raw}
    if ("alpha" in phys) != ("beta" in phys):
        raise ConfigError(f"{source}: alpha and beta must be given together")
    if "alpha" in phys:
        params = PhysParams(
            phys["alpha"], phys["beta"], raw.get("gamma", PhysParams.gamma), phys.get("nu", 1.0), relaxed
        )
        prob = RenewalProblem.from_params(params, phys.get("p", 4.0), **raw)
    else:
        if "nu" in phys or "p" in phys:
            raise ConfigError(f"{source}: nu and p only apply together with alpha and beta")
        prob = RenewalProblem(**raw)
    out = prob.as_dict()
    out.update(phys)
    out["relaxed"] = relaxed
    return out


def renewal_problem(resolved: dict) -> RenewalProblem:
    return RenewalProblem(**{k: resolved[k] for k in _PROBLEM_KEYS})


def resolve_spde(raw: dict, relaxed: bool = False) -> dict:
    """Resolved flat simulator configuration with every default materialised."""
    raw, text, source = _split_meta(raw)
    _reject_unknown(raw, _GRID_KEYS + _PHYS_KEYS + _SIM_KEYS, text, source)
    merged = dict(_SPDE_DEFAULTS)
    merged.update(raw)
    merged["relaxed"] = bool(merged.get("relaxed", False)) or relaxed
    cfg = sim_config(merged)
    out = {"dim": cfg.grid.dim, "n": cfg.grid.n, "L": cfg.grid.L}
    out.update(cfg.params.as_dict())
    sim = cfg.as_dict()
    out.update({k: sim[k] for k in _SIM_KEYS if k in sim})
    return out


def sim_config(resolved: dict) -> SimConfig:
    """Build a :class:`SimConfig` from a flat (possibly partial) configuration."""
    try:
        grid = GridSpec(int(resolved["dim"]), int(resolved["n"]), float(resolved["L"]))
        params = PhysParams(*(resolved[k] for k in _PHYS_KEYS[:4]), relaxed=bool(resolved["relaxed"]))
        sim = {k: resolved[k] for k in _SIM_KEYS if k in resolved}
        if "init_mode" in sim:
            sim["init_mode"] = tuple(int(v) for v in sim["init_mode"])
        return SimConfig(grid, params, **sim)
    except TypeError as exc:
        raise ConfigError(f"invalid simulator configuration: {exc}") from None


def _env_int(name: str, minimum: int) -> int | None:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from None
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def env_overrides() -> dict:
    """Environment overrides: ``seed``, ``ensemble`` and ``workers`` when set."""
    out = {}
    for key, name, low in (("seed", ENV_SEED, 0), ("ensemble", ENV_ENSEMBLE, 1), ("workers", ENV_THREADS, 1)):
        v = _env_int(name, low)
        if v is not None:
            out[key] = v
    return out
