"""Monte-Carlo wavefunction unraveling with tagged jump records.

The waiting-time algorithm evolves the unnormalised state under
``H_eff = H - (i hbar / 2) sum_k c_k^dag c_k`` until its squared norm falls to
a uniform threshold, then applies a jump.  Inside each output step the jump
time is located by bisection on a dyadic ladder of precomputed propagators,
so the waiting-time statistics do not depend on the output step.

Each trajectory draws from its own Philox stream keyed by its seed.
"""
from __future__ import annotations

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la

from .hilbert import basis_ket, build_operators
from .liouvillian import SystemConfig, build_hamiltonian, collapse_channels
from .phonon_bath import PhononRateSet
from .units import HBAR

BISECTION_LEVELS = 24
OVERLAY_EXCLUDED = ("dephasing",)


class TrajectoryWarning(RuntimeWarning):
    pass


@dataclass
class TrajectoryRecord:
    seed: int
    t: np.ndarray
    n_x: np.ndarray
    n_c: np.ndarray
    jumps: list = field(default_factory=list)  # (t_ps, channel)
    flags: list = field(default_factory=list)

    def counts(self) -> dict:
        out = {}
        for _, tag in self.jumps:
            out[tag] = out.get(tag, 0) + 1
        return out

    def overlay_events(self) -> list:
        """Jumps shown on a population plot (dephasing jumps left out)."""
        return [(t, tag) for t, tag in self.jumps if tag not in OVERLAY_EXCLUDED]

    def time_average(self, t_min: float = 0.0) -> tuple:
        sel = self.t >= t_min
        return float(self.n_x[sel].mean()), float(self.n_c[sel].mean())

    def write(self, csv_path, json_path=None, stride: int = 1) -> None:
        from .io import write_csv
        rows = [{"t_ps": t, "n_x": x, "n_c": c}
                for t, x, c in zip(self.t[::stride], self.n_x[::stride], self.n_c[::stride])]
        write_csv(csv_path, ["t_ps", "n_x", "n_c"], rows)
        json_path = json_path or Path(csv_path).with_suffix(".jumps.json")
        Path(json_path).write_text(json.dumps(
            [{"t_ps": float(t), "channel": tag} for t, tag in self.jumps], indent=1) + "\n")


class Unraveling:
    """Precomputed propagators and collapse operators for one configuration."""

    def __init__(self, config: SystemConfig, rates: PhononRateSet, dt: float,
                 levels: int = BISECTION_LEVELS):
        if dt <= 0:
            raise ValueError("dt must be > 0")
        ops = build_operators(config.space)
        self.config = config
        self.dt = dt
        self.levels = levels
        self.channels = collapse_channels(config, rates, ops)
        self.tags = [tag for tag, _ in self.channels]
        self.c_dense = [c.toarray() for _, c in self.channels]
        h = build_hamiltonian(config, ops).toarray()
        decay = sum((c.conj().T @ c for c in self.c_dense), np.zeros_like(h))
        gen = -1j * h / HBAR - 0.5 * decay  # d psi/dt, 1/ps
        # U[k] advances by dt / 2**k
        self.props = [la.expm(gen * (dt / 2**k)) for k in range(levels + 1)]
        self.see = ops.see.diagonal().real
        self.num = ops.n.diagonal().real
        self.max_rate = float(np.linalg.eigvalsh(decay).max()) if self.c_dense else 0.0
        self.flags = []
        if self.max_rate * dt > 0.1:
            msg = (f"dt={dt} ps is coarse: up to {self.max_rate * dt:.2f} expected jumps "
                   "per output step")
            self.flags.append(msg)
            warnings.warn(msg, TrajectoryWarning, stacklevel=2)

    def _jump(self, psi, rng):
        weights = np.array([np.vdot(cp, cp).real for cp in (c @ psi for c in self.c_dense)])
        total = weights.sum()
        k = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
        k = min(k, len(weights) - 1)
        new = self.c_dense[k] @ psi
        return new / np.linalg.norm(new), k

    def run(self, psi0, t_final: float, seed: int) -> TrajectoryRecord:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        n_steps = int(np.floor(t_final / self.dt + 1e-9))
        t_grid = np.arange(n_steps + 1) * self.dt
        nx = np.empty(n_steps + 1)
        nc = np.empty(n_steps + 1)
        psi = np.asarray(psi0, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        jumps = []
        threshold = rng.random()
        full = 1 << self.levels
        props = self.props
        levels = self.levels
        can_jump = bool(self.c_dense)

        def record(i, state):
            p = state.real**2 + state.imag**2
            norm = p.sum()
            nx[i] = (self.see @ p) / norm
            nc[i] = (self.num @ p) / norm

        record(0, psi)
        for step in range(n_steps):
            t0 = t_grid[step]
            nxt = props[0] @ psi
            if not can_jump or np.vdot(nxt, nxt).real > threshold:
                psi = nxt
            else:
                # dyadic search for the first threshold crossing inside the step
                m, j = 0, levels
                while m < full:
                    while j > 0 and (m % (1 << j) or m + (1 << j) > full):
                        j -= 1
                    trial = props[levels - j] @ psi
                    if np.vdot(trial, trial).real > threshold:
                        psi = trial
                        m += 1 << j
                        j = levels
                    elif j > 0:
                        j -= 1
                    else:
                        m += 1
                        psi, k = self._jump(trial, rng)
                        jumps.append((t0 + m * self.dt / full, self.tags[k]))
                        threshold = rng.random()
                        j = levels
            record(step + 1, psi)
        return TrajectoryRecord(seed, t_grid, nx, nc, jumps, list(self.flags))


def run_trajectory(config: SystemConfig, rates: PhononRateSet, seed: int, t_final: float,
                   dt: float, psi0=None) -> TrajectoryRecord:
    """One conditioned record starting (by default) from |g, 0>."""
    unr = Unraveling(config, rates, dt)
    if psi0 is None:
        psi0 = basis_ket(config.space, 0, 0)
    return unr.run(psi0, t_final, seed)


def _run_chunk(args):
    config, rates, seeds, t_final, dt, psi0 = args
    unr = Unraveling(config, rates, dt)
    if psi0 is None:
        psi0 = basis_ket(config.space, 0, 0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TrajectoryWarning)
        return [unr.run(psi0, t_final, s) for s in seeds]


@dataclass
class EnsembleResult:
    t: np.ndarray
    n_x: np.ndarray
    n_c: np.ndarray
    n_x_se: np.ndarray
    n_c_se: np.ndarray
    n_traj: int
    seeds: list
    jump_counts: dict


def ensemble_average(config: SystemConfig, rates: PhononRateSet, n_traj: int, seed0: int,
                     t_final: float, dt: float, psi0=None, workers: int = 1,
                     keep_records: bool = False):
    """Mean and standard error of conditioned populations over ``n_traj``
    trajectories seeded ``seed0 .. seed0 + n_traj - 1``.

    The reduction runs over a fixed trajectory order, so the result does not
    depend on ``workers``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    seeds = list(range(seed0, seed0 + n_traj))
    if workers <= 1:
        records = _run_chunk((config, rates, seeds, t_final, dt, psi0))
    else:
        chunks = [seeds[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_chunk, [(config, rates, c, t_final, dt, psi0)
                                               for c in chunks]))
        by_seed = {r.seed: r for part in parts for r in part}
        records = [by_seed[s] for s in seeds]
    nx = np.stack([r.n_x for r in records])
    nc = np.stack([r.n_c for r in records])
    if n_traj > 1:
        nx_se = nx.std(axis=0, ddof=1) / np.sqrt(n_traj)
        nc_se = nc.std(axis=0, ddof=1) / np.sqrt(n_traj)
    else:
        nx_se = np.full(nx.shape[1], np.nan)
        nc_se = np.full(nc.shape[1], np.nan)
    counts = {}
    for r in records:
        for tag, c in r.counts().items():
            counts[tag] = counts.get(tag, 0) + c
    res = EnsembleResult(records[0].t, nx.mean(axis=0), nc.mean(axis=0), nx_se, nc_se,
                         n_traj, seeds, counts)
    return (res, records) if keep_records else res
