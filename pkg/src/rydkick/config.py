"""Strict TOML run configuration.

Sections: ``[physical]`` (optional), ``[protocol]``, ``[numerics]``, ``[analysis]``.
Unknown sections or keys are rejected.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from rydkick import engine, phasespace
from rydkick.engine import GridSpec
from rydkick.gate import GateParams
from rydkick.physpar import DerivedScales, PhysicalConfig, derive_scales

MODES = ("gate", "sweep", "thermal", "cycles", "validity")
TWO_PI = 2 * math.pi


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


_KEYS = {
    "physical": {"atom_mass_amu", "trap_freq", "rydberg_trap_freq", "n1", "q1", "n2", "q2",
                 "rabi_freq", "lattice_wavelength"},
    "protocol": {"phi_target", "theta", "theta_range", "theta_units", "x0", "x0_range",
                 "param_sets", "dt1", "dt1_units", "alpha_plus_sq", "lambda", "design",
                 "impulse_exact"},
    "numerics": {"x_min", "x_max", "half_width", "n_points", "dt", "kick_steps", "n_max"},
    "analysis": {"mode", "temperatures", "N_max", "contour_levels"},
}

_UNIT_SCALE = {"rad": 1.0, "osc": 1.0, "T_ho": TWO_PI}


def _number(section: str, key: str, value: Any, positive=False, nonneg=False) -> float:
    where = f"[{section}].{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    if positive and value <= 0:
        raise ConfigError(f"{where}: must be > 0, got {value:g}")
    if nonneg and value < 0:
        raise ConfigError(f"{where}: must be >= 0, got {value:g}")
    return value


def _integer(section: str, key: str, value: Any, minimum: int) -> int:
    where = f"[{section}].{key}"
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}, got {value}")
    return value


def _range(section: str, key: str, value: Any) -> np.ndarray:
    where = f"[{section}].{key}"
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(f"{where}: expected [start, stop, count]")
    start = _number(section, key, value[0])
    stop = _number(section, key, value[1])
    count = _integer(section, key, value[2], 2)
    return np.linspace(start, stop, count)


@dataclass(frozen=True)
class NumericsSection:
    x_min: float | None = None
    x_max: float | None = None
    half_width: float = engine.DEFAULT_HALF_WIDTH
    n_points: int = engine.DEFAULT_POINTS
    dt: float = engine.DEFAULT_FREE_DT
    kick_steps: int = engine.DEFAULT_KICK_STEPS
    n_max: int = 25

    def grid(self, x0: float) -> GridSpec:
        lo = self.x_min if self.x_min is not None else max(x0 - self.half_width, 0.1 * x0)
        hi = self.x_max if self.x_max is not None else x0 + self.half_width
        return GridSpec(lo, hi, self.n_points, self.dt)


@dataclass(frozen=True)
class ProtocolSection:
    phi_target: float = -math.pi
    thetas: tuple[float, ...] = ()
    x0s: tuple[float, ...] = ()
    param_sets: tuple[tuple[float, float], ...] = ()
    dt1: float | None = None
    alpha_plus_sq: float | None = None
    quartic: float = 0.0
    design: str | None = None
    impulse_exact: bool = False


@dataclass(frozen=True)
class AnalysisSection:
    mode: str | None = None
    temperatures: tuple[float, ...] = ()
    n_cycles: int = 25
    contour_levels: tuple[float, ...] = (0.9, 0.99, 0.999)


@dataclass(frozen=True)
class RunConfig:
    physical: PhysicalConfig | None
    protocol: ProtocolSection
    numerics: NumericsSection = field(default_factory=NumericsSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)

    @property
    def scales(self) -> DerivedScales | None:
        return derive_scales(self.physical) if self.physical is not None else None

    @property
    def rabi(self) -> float | None:
        return self.physical.rabi_dimensionless if self.physical is not None else None

    def alpha_plus_sq(self) -> float | None:
        if self.physical is not None:
            return self.scales.alpha_plus_sq
        return self.protocol.alpha_plus_sq

    def points(self) -> list[tuple[float, float]]:
        """(theta, x0) pairs in row-major order: theta outer, x0 inner."""
        p = self.protocol
        if p.param_sets:
            return list(p.param_sets)
        return [(t, x) for t in p.thetas for x in p.x0s]

    def design_point(self) -> phasespace.FastGateDesign | None:
        if self.protocol.design is None:
            return None
        return phasespace.factor_ten_design(self.alpha_plus_sq(), self.protocol.phi_target)

    def gate_params(self, theta: float, x0: float) -> GateParams:
        p, n = self.protocol, self.numerics
        try:
            grid = n.grid(x0)
        except ValueError as exc:
            raise ConfigError(f"[numerics].x_min/x_max/n_points: {exc}") from None
        return GateParams(theta=theta, x0=x0, dt1=p.dt1, alpha_plus_sq=self.alpha_plus_sq()
                          if p.dt1 is None else None, phi_target=p.phi_target,
                          quartic=p.quartic, grid=grid, n_max=n.n_max,
                          kick_steps=n.kick_steps, impulse_exact=p.impulse_exact)

    def all_params(self) -> list[GateParams]:
        return [self.gate_params(t, x) for t, x in self.points()]


def _check_keys(section: str, table: Any) -> dict:
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}]: expected a table")
    unknown = sorted(set(table) - _KEYS[section])
    if unknown:
        raise ConfigError(f"[{section}].{unknown[0]}: unknown key")
    return table


def _parse_physical(t: dict) -> PhysicalConfig:
    s = "physical"
    required = ("atom_mass_amu", "trap_freq", "n1", "q1", "n2", "q2", "rabi_freq")
    for key in required:
        if key not in t:
            raise ConfigError(f"[{s}].{key}: missing")
    trap = _number(s, "trap_freq", t["trap_freq"], positive=True)
    kwargs = dict(
        trap_freq=trap,
        rydberg_trap_freq=_number(s, "rydberg_trap_freq", t.get("rydberg_trap_freq", trap),
                                  positive=True),
        rabi_freq=_number(s, "rabi_freq", t["rabi_freq"], positive=True),
        lattice_wavelength=(_number(s, "lattice_wavelength", t["lattice_wavelength"],
                                    positive=True) if "lattice_wavelength" in t else None),
    )
    for key in ("n1", "q1", "n2", "q2"):
        kwargs[key] = _integer(s, key, t[key], 0)
    try:
        return PhysicalConfig.from_amu(
            _number(s, "atom_mass_amu", t["atom_mass_amu"], positive=True), **kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{s}]: {exc}") from None


def _parse_protocol(t: dict, physical: bool) -> ProtocolSection:
    s = "protocol"
    theta_units = t.get("theta_units", "rad")
    dt1_units = t.get("dt1_units", "osc")
    if theta_units not in ("rad", "T_ho"):
        raise ConfigError(f"[{s}].theta_units: expected 'rad' or 'T_ho', got {theta_units!r}")
    if dt1_units not in ("osc", "T_ho"):
        raise ConfigError(f"[{s}].dt1_units: expected 'osc' or 'T_ho', got {dt1_units!r}")
    tscale = _UNIT_SCALE[theta_units]

    def thetas(key):
        vals = _range(s, key, t[key]) if key == "theta_range" else [_number(s, key, t[key])]
        vals = tuple(float(v) * tscale for v in vals)
        for v in vals:
            if not 0 < v <= math.pi / 2:
                raise ConfigError(f"[{s}].{key}: theta must lie in (0, pi/2] rad, got {v:g}")
        return vals

    def x0s(key):
        vals = _range(s, key, t[key]) if key == "x0_range" else [_number(s, key, t[key])]
        for v in vals:
            if v <= 0:
                raise ConfigError(f"[{s}].{key}: x0 must be > 0, got {v:g}")
        return tuple(float(v) for v in vals)

    for a, b in (("theta", "theta_range"), ("x0", "x0_range")):
        if a in t and b in t:
            raise ConfigError(f"[{s}].{b}: conflicts with [{s}].{a}")
    th = thetas("theta") if "theta" in t else thetas("theta_range") if "theta_range" in t else ()
    xs = x0s("x0") if "x0" in t else x0s("x0_range") if "x0_range" in t else ()

    sets = ()
    if "param_sets" in t:
        if th or xs:
            raise ConfigError(f"[{s}].param_sets: conflicts with theta/x0 keys")
        raw = t["param_sets"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"[{s}].param_sets: expected a list of [theta, x0] pairs")
        out = []
        for pair in raw:
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(f"[{s}].param_sets: expected [theta, x0] pairs")
            theta = _number(s, "param_sets", pair[0], positive=True) * tscale
            x0 = _number(s, "param_sets", pair[1], positive=True)
            if theta > math.pi / 2:
                raise ConfigError(f"[{s}].param_sets: theta must lie in (0, pi/2] rad")
            out.append((theta, x0))
        sets = tuple(out)

    dt1 = None
    if "dt1" in t:
        dt1 = _number(s, "dt1", t["dt1"], nonneg=True) * _UNIT_SCALE[dt1_units]
    alpha = None
    if "alpha_plus_sq" in t:
        if physical:
            raise ConfigError(f"[{s}].alpha_plus_sq: not allowed with a [physical] section")
        alpha = _number(s, "alpha_plus_sq", t["alpha_plus_sq"], nonneg=True)
    if physical and dt1 is not None:
        raise ConfigError(f"[{s}].dt1: fixed by the [physical] coupling; remove it")
    if not physical and (dt1 is None) == (alpha is None):
        raise ConfigError(f"[{s}].dt1: give exactly one of dt1 and alpha_plus_sq "
                          "when there is no [physical] section")
    design = t.get("design")
    if design not in (None, "factor_ten"):
        raise ConfigError(f"[{s}].design: only 'factor_ten' is supported, got {design!r}")
    if design is not None and alpha is None and not physical:
        raise ConfigError(f"[{s}].design: needs alpha_plus_sq or a [physical] section")
    impulse = t.get("impulse_exact", False)
    if not isinstance(impulse, bool):
        raise ConfigError(f"[{s}].impulse_exact: expected true or false")
    return ProtocolSection(
        phi_target=_number(s, "phi_target", t.get("phi_target", -math.pi)),
        thetas=th, x0s=xs, param_sets=sets, dt1=dt1, alpha_plus_sq=alpha,
        quartic=_number(s, "lambda", t.get("lambda", 0.0), nonneg=True),
        design=design, impulse_exact=impulse)


def _parse_numerics(t: dict) -> NumericsSection:
    s = "numerics"
    kw = {}
    for key in ("x_min", "x_max"):
        if key in t:
            kw[key] = _number(s, key, t[key], positive=True)
    if "half_width" in t:
        kw["half_width"] = _number(s, "half_width", t["half_width"], positive=True)
    if "dt" in t:
        kw["dt"] = _number(s, "dt", t["dt"], positive=True)
    if "n_points" in t:
        n = _integer(s, "n_points", t["n_points"], 256)
        if n & (n - 1):
            raise ConfigError(f"[{s}].n_points: must be a power of two, got {n}")
        kw["n_points"] = n
    if "kick_steps" in t:
        kw["kick_steps"] = _integer(s, "kick_steps", t["kick_steps"], 1)
    if "n_max" in t:
        kw["n_max"] = _integer(s, "n_max", t["n_max"], 0)
    if "x_min" in kw and "x_max" in kw and kw["x_min"] >= kw["x_max"]:
        raise ConfigError(f"[{s}].x_max: must exceed x_min")
    return NumericsSection(**kw)


def _parse_analysis(t: dict) -> AnalysisSection:
    s = "analysis"
    kw = {}
    if "mode" in t:
        if t["mode"] not in MODES:
            raise ConfigError(f"[{s}].mode: expected one of {MODES}, got {t['mode']!r}")
        kw["mode"] = t["mode"]
    if "temperatures" in t:
        temps = t["temperatures"]
        if not isinstance(temps, list) or not temps:
            raise ConfigError(f"[{s}].temperatures: expected a non-empty list")
        kw["temperatures"] = tuple(_number(s, "temperatures", v, positive=True) for v in temps)
    if "N_max" in t:
        kw["n_cycles"] = _integer(s, "N_max", t["N_max"], 1)
    if "contour_levels" in t:
        levels = t["contour_levels"]
        if not isinstance(levels, list) or not levels:
            raise ConfigError(f"[{s}].contour_levels: expected a non-empty list")
        vals = tuple(_number(s, "contour_levels", v) for v in levels)
        if any(not 0 < v < 1 for v in vals):
            raise ConfigError(f"[{s}].contour_levels: levels must lie in (0, 1)")
        kw["contour_levels"] = vals
    return AnalysisSection(**kw)


def parse_config(data: dict) -> RunConfig:
    unknown = sorted(set(data) - set(_KEYS))
    if unknown:
        raise ConfigError(f"[{unknown[0]}]: unknown section")
    if "protocol" not in data:
        raise ConfigError("[protocol]: missing section")
    physical = None
    if "physical" in data:
        physical = _parse_physical(_check_keys("physical", data["physical"]))
    protocol = _parse_protocol(_check_keys("protocol", data["protocol"]), physical is not None)
    numerics = _parse_numerics(_check_keys("numerics", data.get("numerics", {})))
    analysis = _parse_analysis(_check_keys("analysis", data.get("analysis", {})))
    return RunConfig(physical, protocol, numerics, analysis)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)
