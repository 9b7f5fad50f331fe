"""Run configuration: INI file + flag overrides resolved to canonical units.

Keys may carry a unit suffix (``_meV``, ``_ueV``, ``_K``, ``_ps``, ``_ps2``); values
are converted to meV / K / ps.  Example::

    [bath]
    alpha_p_ps2 = 0.06
    omega_b_meV = 1.0
    temperature_K = 4

    [system]
    g_prime_ueV = 100
    drive_mode = cavity
    eta_c_meV = 0.3
    delta_cx_meV = 1.6
    laser_detuning_meV = 1.6
    n_max = 60
"""
from __future__ import annotations

import configparser
import dataclasses
import platform
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .liouvillian import SystemConfig
from .phonon_bath import BathParams

SECTIONS = ("bath", "system", "sweep", "trajectory")
_UNIT = {"ueV": 1e-3, "meV": 1.0, "K": 1.0, "ps": 1.0, "ps2": 1.0}
_BOOL = ("phonons_enabled", "jc_coupling", "renormalize_with_b", "paired", "preview")
_STR = ("drive_mode", "scenario", "drive_detuning", "axes")
_INT = ("n_max", "seed", "n_traj", "stride")

DEFAULT_SYSTEM = {
    "g_prime": 0.1, "kappa": 0.05, "gamma": 0.5e-3, "gamma_prime": 2e-3,
    "drive_mode": "cavity", "eta_c": 0.3, "eta_x_prime": 0.0,
    "delta_cx": 1.6, "laser_detuning": 1.6, "phonons_enabled": True,
    "jc_coupling": True, "renormalize_with_b": False, "n_max": 60,
}
DEFAULT_BATH = {"alpha_p": 0.06, "omega_b": 1.0, "temperature": 4.0}
DEFAULT_TRAJECTORY = {"seed": 7, "t_final": 200.0, "dt": 0.01, "n_traj": 1, "stride": 10}
DEFAULT_SWEEP = {"step": 0.01, "paired": False, "p": 2.5, "drive_detuning": "lx"}

ALLOWED = {
    "bath": set(DEFAULT_BATH),
    "system": {f.name for f in dataclasses.fields(SystemConfig)} | {"delta_cx", "laser_detuning"},
    "sweep": set(DEFAULT_SWEEP) | {"scenario", "axes", "preview", "n_list", "tol"},
    "trajectory": set(DEFAULT_TRAJECTORY),
}


class ConfigError(ValueError):
    """Invalid configuration file or flag (CLI exit code 2)."""


def parse_value(key: str, raw: str):
    """Return ``(canonical_key, value)`` with unit suffix stripped and applied."""
    raw = raw.strip()
    base, scale = key, 1.0
    for suffix, factor in _UNIT.items():
        if key.endswith("_" + suffix):
            base, scale = key[: -len(suffix) - 1], factor
            break
    if base in _BOOL:
        low = raw.lower()
        if low not in ("true", "false", "yes", "no", "on", "off", "1", "0"):
            raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
        return base, low in ("true", "yes", "on", "1")
    if base in _STR:
        return base, raw
    try:
        if base in _INT:
            return base, int(raw)
        if "," in raw:
            return base, [float(x) * scale for x in raw.split(",") if x.strip()]
        return base, float(raw) * scale
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from exc


@dataclass
class RunConfig:
    command: str = ""
    bath: dict = field(default_factory=lambda: dict(DEFAULT_BATH))
    system: dict = field(default_factory=lambda: dict(DEFAULT_SYSTEM))
    sweep: dict = field(default_factory=lambda: dict(DEFAULT_SWEEP))
    trajectory: dict = field(default_factory=lambda: dict(DEFAULT_TRAJECTORY))
    workers: int = 1
    argv: list = field(default_factory=list)
    explicit: set = field(default_factory=set)

    def section(self, name: str) -> dict:
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        return getattr(self, name)

    def set(self, dotted: str, raw: str) -> None:
        """Apply an override ``section.key=value``."""
        if "." not in dotted:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        sec, key = dotted.split(".", 1)
        section = self.section(sec)
        k, v = parse_value(key, raw)
        if k not in ALLOWED[sec]:
            raise ConfigError(f"unknown key {key!r} in [{sec}]")
        section[k] = v
        self.explicit.add(f"{sec}.{k}")

    def bath_params(self) -> BathParams:
        try:
            return BathParams(**self.bath)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[bath]: {exc}") from exc

    def system_point(self) -> dict:
        """Flat parameter dict for :func:`sweep.resolve_point`."""
        return {**self.system, **self.bath}

    def system_config(self) -> SystemConfig:
        from .sweep import resolve_point
        try:
            cfg, _ = resolve_point(self.system_point())
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[system]: {exc}") from exc
        return cfg

    def provenance(self, **extra) -> dict:
        return {
            "code_version": __version__,
            "command": self.command,
            "argv": list(self.argv),
            "bath": dict(self.bath),
            "system": dict(self.system),
            "sweep": dict(self.sweep),
            "trajectory": dict(self.trajectory),
            "units": {"energy": "meV", "time": "ps", "temperature": "K"},
            "environment": {"python": platform.python_version(), "numpy": np.__version__,
                            "scipy": scipy.__version__},
            **extra,
        }


def load_config(path=None, overrides=(), command: str = "", argv=None) -> RunConfig:
    rc = RunConfig(command=command, argv=list(sys.argv if argv is None else argv))
    if path:
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep unit-suffix case (meV vs MeV)
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for sec in parser.sections():
            if sec not in SECTIONS:
                raise ConfigError(f"unknown section [{sec}] in {path}")
            for key, raw in parser.items(sec):
                rc.set(f"{sec}.{key}", raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must be section.key=value")
        dotted, raw = item.split("=", 1)
        rc.set(dotted.strip(), raw)
    # the drive not selected by drive_mode defaults to zero unless set explicitly
    other = "eta_c" if rc.system.get("drive_mode") == "exciton" else "eta_x_prime"
    if f"system.{other}" not in rc.explicit:
        rc.system[other] = 0.0
    if (rc.system.get("drive_mode") == "exciton" and "system.eta_x_prime" not in rc.explicit
            and not rc.system.get("eta_x_prime")):
        rc.system["eta_x_prime"] = 0.3
    rc.bath_params()
    rc.system_config()
    return rc
