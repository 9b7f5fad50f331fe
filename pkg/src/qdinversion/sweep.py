"""Parameter sweeps over steady states with deterministic row order.

A grid point is a flat dict of parameters.  Bath keys are ``alpha_p``,
``omega_b`` and ``temperature``; ``laser_detuning`` (w_L - w_x) and
``delta_cx`` (w_c - w_x) fix the two rotating-frame detunings; every other
key is a :class:`SystemConfig` field.
"""
from __future__ import annotations

import dataclasses
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .liouvillian import SystemConfig, build_liouvillian, compute_rates
from .phonon_bath import BathParams
from .solver import steady_state

BATH_KEYS = ("alpha_p", "omega_b", "temperature")
DETUNING_KEYS = ("laser_detuning", "delta_cx")
CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(SystemConfig))
WORKERS_ENV = "QDINV_WORKERS"


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple

    @classmethod
    def linspace(cls, name: str, vmin: float, vmax: float, step: float) -> "Axis":
        if step <= 0:
            raise ValueError("axis step must be > 0")
        n = int(np.floor((vmax - vmin) / step + 1e-9)) + 1
        if n < 1:
            raise ValueError(f"empty axis {name}: [{vmin}, {vmax}]")
        # rounding keeps grid labels stable across platforms
        return cls(name, tuple(round(vmin + i * step, 12) for i in range(n)))

    @classmethod
    def of(cls, name: str, values) -> "Axis":
        values = tuple(float(v) for v in values)
        if not values:
            raise ValueError(f"empty axis {name}")
        return cls(name, values)


@dataclass
class SweepPlan:
    scenario: str
    axes: list
    fixed: dict = field(default_factory=dict)
    paired: bool = False  # run every point with phonons on and off
    output: str | None = None

    def __post_init__(self):
        for ax in self.axes:
            if not ax.values:
                raise ValueError(f"axis {ax.name} is empty")
            _check_key(ax.name)
        for k in self.fixed:
            _check_key(k)

    def points(self) -> list[dict]:
        names = [ax.name for ax in self.axes]
        out = []
        for combo in itertools.product(*(ax.values for ax in self.axes)):
            base = dict(self.fixed)
            base.update(zip(names, combo))
            if self.paired:
                out.append({**base, "phonons_enabled": True})
                out.append({**base, "phonons_enabled": False})
            else:
                out.append(base)
        return out

    @property
    def columns(self) -> list[str]:
        cols = [ax.name for ax in self.axes]
        if self.paired:
            cols.append("phonons_enabled")
        return cols + ["n_x", "n_c", "gamma_up_cav_ueV", "gamma_down_cav_ueV",
                       "gamma_up_x_ueV", "gamma_down_x_ueV", "residual", "error"]


def _check_key(k):
    if k not in BATH_KEYS + DETUNING_KEYS + CONFIG_KEYS:
        raise ValueError(f"unknown sweep parameter {k!r}")


def resolve_point(params: dict) -> tuple[SystemConfig, BathParams]:
    bath = BathParams(**{k: params[k] for k in BATH_KEYS if k in params})
    cfg_kw = {k: params[k] for k in CONFIG_KEYS if k in params}
    if "laser_detuning" in params or "delta_cx" in params:
        lx = params.get("laser_detuning", 0.0)
        dcx = params.get("delta_cx", 0.0)
        cfg_kw.update(delta_xL=-lx, delta_cL=dcx - lx)
    if "n_max" in cfg_kw:
        cfg_kw["n_max"] = int(cfg_kw["n_max"])
    return SystemConfig(**cfg_kw), bath


def solve_point(params: dict) -> dict:
    """Steady state at one grid point; failures are recorded, not raised."""
    row = {"n_x": np.nan, "n_c": np.nan, "residual": np.nan, "error": ""}
    try:
        cfg, bath = resolve_point(params)
        cfg = cfg.effective(bath)
        rates = compute_rates(cfg, bath)
        for k, v in rates.as_dict().items():
            if k.endswith("_ueV"):
                row[k] = v
        res = steady_state(build_liouvillian(cfg, rates))
        row.update(n_x=res.n_x, n_c=res.n_c, residual=res.residual)
    except Exception as exc:  # noqa: BLE001 - recorded in-row, sweep continues
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity")
               else os.cpu_count() or 1)


def run_sweep(plan: SweepPlan, workers: int | None = None) -> list[dict]:
    """One row per grid point, in axis order, independent of ``workers``."""
    points = plan.points()
    workers = default_workers() if workers is None else max(1, workers)
    if workers == 1 or len(points) == 1:
        results = [solve_point(p) for p in points]
    else:
        with ProcessPoolExecutor(min(workers, len(points))) as pool:
            results = list(pool.map(solve_point, points, chunksize=1))
    rows = []
    for p, r in zip(points, results):
        row = {ax.name: p[ax.name] for ax in plan.axes}
        if plan.paired:
            row["phonons_enabled"] = p["phonons_enabled"]
        row.update(r)
        rows.append(row)
    return rows


def jc_term_toggle(plan: SweepPlan, workers: int | None = None) -> list[dict]:
    """The same sweep with the coherent g' coupling dropped from H.

    Phonon Lindblads keep g', leaving two photon ladders coupled only by
    phonon scattering.
    """
    if plan.fixed.get("drive_mode", "cavity") != "cavity":
        raise ValueError("the coupling toggle is defined for cavity-driven scenarios")
    toggled = dataclasses.replace(plan, fixed={**plan.fixed, "jc_coupling": False},
                                  scenario=plan.scenario + "_no_jc")
    return run_sweep(toggled, workers)


def laser_axis(delta_cx: float, step: float = 0.01) -> Axis:
    """Default laser axis w_L - w_x in [-3, max(3, delta_cx + 2)] meV."""
    return Axis.linspace("laser_detuning", -3.0, max(3.0, delta_cx + 2.0), step)
