"""Figure presets: each returns ``{panel_name: (header, rows)}``.

The presets share every physical parameter with the run configuration and
only pin what the figure itself fixes (drive type and strength, cavity
detunings, temperatures).
"""
from __future__ import annotations

import numpy as np

from .analytic import EffectiveModelParams, nx_cavity_driven_effective, nx_no_cavity, nx_thermal
from .config import RunConfig
from .liouvillian import compute_rates
from .phonon_bath import BathParams, phase_grid, scattering_rates
from .sweep import Axis, SweepPlan, jc_term_toggle, laser_axis, resolve_point, run_sweep
from .trajectory import run_trajectory

FIGURES = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8")
RATES_HEADER = ["delta_meV", "T_K", "gamma_up_ueV", "gamma_down_ueV"]
CORRELATION_HEADER = ["t_ps", "T_K", "re_C", "im_C"]
FIG6_DETUNINGS = (-1.6, -0.8, 0.0, 0.8, 1.6, 3.0)


def rates_table(bath: BathParams, temperatures, dmin=-4.0, dmax=4.0, step=0.01,
                coupling=0.1) -> list[dict]:
    deltas = np.array(Axis.linspace("delta", dmin, dmax, step).values)
    rows = []
    for T in temperatures:
        up, down = scattering_rates(deltas, coupling, bath.with_temperature(float(T)))
        rows += [{"delta_meV": float(d), "T_K": float(T), "gamma_up_ueV": u * 1e3,
                  "gamma_down_ueV": w * 1e3} for d, u, w in zip(deltas, up, down)]
    return rows


def correlation_table(bath: BathParams, temperatures, t_max=5.0, step=0.01) -> list[dict]:
    rows = []
    for T in temperatures:
        tau, phi = phase_grid(bath.with_temperature(float(T)), float(t_max), float(step))
        c = np.expm1(phi)
        rows += [{"t_ps": float(t), "T_K": float(T), "re_C": float(v.real),
                  "im_C": float(v.imag)} for t, v in zip(tau, c)]
    return rows


def _step(rc: RunConfig) -> float:
    return 0.05 if rc.sweep.get("preview") else float(rc.sweep.get("step", 0.01))


def _base(rc: RunConfig, **pins) -> dict:
    base = {**rc.system, **rc.bath}
    base.pop("laser_detuning", None)
    base.update(pins)
    return base


def _panel(plan, rows):
    return plan.columns, rows


def fig3(rc: RunConfig, workers=None) -> dict:
    bath = rc.bath_params()
    return {
        "fig3a_rates": (RATES_HEADER, rates_table(bath, (4.0, 10.0), coupling=0.1)),
        "fig3b_correlation": (CORRELATION_HEADER, correlation_table(bath, (4.0, 10.0))),
    }


def fig4(rc: RunConfig, workers=None) -> dict:
    """No cavity coupling (g' = 0), exciton drive 0.03 and 0.3 meV, 4 K."""
    fixed = _base(rc, drive_mode="exciton", eta_c=0.0, g_prime=0.0, n_max=1,
                  temperature=4.0)
    fixed.pop("eta_x_prime", None)
    plan = SweepPlan("fig4", [Axis.of("eta_x_prime", (0.03, 0.3)),
                              Axis.linspace("laser_detuning", -3.0, 3.0, _step(rc))],
                     fixed, paired=True)
    rows = run_sweep(plan, workers)
    cfg, _ = resolve_point(fixed)
    for r in rows:
        r["nx_eq11"] = nx_no_cavity(r["eta_x_prime"], r["laser_detuning"], cfg.gamma,
                                    cfg.gamma_prime, r["gamma_up_x_ueV"] * 1e-3,
                                    r["gamma_down_x_ueV"] * 1e-3)
        r["nx_thermal"] = nx_thermal(r["eta_x_prime"], r["laser_detuning"], 4.0)
    header = plan.columns + ["nx_eq11", "nx_thermal"]
    return {
        "fig4a_no_phonons": (header, [r for r in rows if not r["phonons_enabled"]]),
        "fig4b_phonons": (header, [r for r in rows if r["phonons_enabled"]]),
    }


def fig5(rc: RunConfig, workers=None) -> dict:
    """Exciton drive 0.3 meV with the cavity at -1.6 and +1.6 meV."""
    out = {}
    for dcx in (-1.6, 1.6):
        fixed = _base(rc, drive_mode="exciton", eta_c=0.0, eta_x_prime=0.3, delta_cx=dcx,
                      temperature=4.0)
        plan = SweepPlan(f"fig5_dcx{dcx:+.1f}", [laser_axis(dcx, _step(rc))], fixed,
                         paired=True)
        out[plan.scenario] = _panel(plan, run_sweep(plan, workers))
    return out


def fig6(rc: RunConfig, workers=None) -> dict:
    """Cavity drive 0.3 meV at six cavity detunings, plus the no-coupling curve."""
    out = {}
    for dcx in FIG6_DETUNINGS:
        fixed = _base(rc, drive_mode="cavity", eta_x_prime=0.0, eta_c=0.3, delta_cx=dcx,
                      temperature=4.0)
        plan = SweepPlan(f"fig6_dcx{dcx:+.1f}", [laser_axis(dcx, _step(rc))], fixed,
                         paired=True)
        out[plan.scenario] = _panel(plan, run_sweep(plan, workers))
    fixed = _base(rc, drive_mode="cavity", eta_x_prime=0.0, eta_c=0.3, delta_cx=1.6,
                  temperature=4.0, phonons_enabled=True)
    plan = SweepPlan("fig6_dcx+1.6", [laser_axis(1.6, _step(rc))], fixed)
    rows = jc_term_toggle(plan, workers)
    out["fig6_dcx+1.6_no_jc"] = _panel(plan, rows)
    return out


def fig7(rc: RunConfig, workers=None) -> dict:
    """Single trajectories at 4 K and 10 K, cavity drive, laser on the cavity."""
    tr = rc.trajectory
    out = {}
    for label, T in (("fig7a_4K", 4.0), ("fig7b_10K", 10.0)):
        p = _base(rc, drive_mode="cavity", eta_x_prime=0.0, eta_c=0.3, delta_cx=1.6,
                  laser_detuning=1.6, temperature=T)
        cfg, bath = resolve_point(p)
        cfg = cfg.effective(bath)
        rec = run_trajectory(cfg, compute_rates(cfg, bath), int(tr["seed"]),
                             float(tr["t_final"]), float(tr["dt"]))
        out[label] = rec
    return out


def fig8(rc: RunConfig, workers=None) -> dict:
    """Full master equation against the cavity-filtered effective model."""
    out = {}
    params = EffectiveModelParams(
        g_prime=rc.system["g_prime"], eta_c=0.3, kappa=rc.system["kappa"],
        gamma=rc.system["gamma"], gamma_prime=rc.system["gamma_prime"],
        p=float(rc.sweep.get("p", 2.5)), drive_detuning=rc.sweep.get("drive_detuning", "lx"))
    for dcx in (1.6, -1.6):
        fixed = _base(rc, drive_mode="cavity", eta_x_prime=0.0, eta_c=0.3, delta_cx=dcx,
                      temperature=4.0, phonons_enabled=True)
        plan = SweepPlan(f"fig8_dcx{dcx:+.1f}", [laser_axis(dcx, _step(rc))], fixed)
        rows = run_sweep(plan, workers)
        for r in rows:
            r["nx_effective"] = nx_cavity_driven_effective(
                params, r["laser_detuning"], dcx, r["gamma_up_cav_ueV"] * 1e-3,
                r["gamma_down_cav_ueV"] * 1e-3)
        out[plan.scenario] = (plan.columns + ["nx_effective"], rows)
    return out


def run_figure(name: str, rc: RunConfig, workers=None) -> dict:
    if name not in FIGURES:
        raise KeyError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    return globals()[name](rc, workers)
