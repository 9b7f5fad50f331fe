"""Steady states, time evolution and Fock-truncation certification."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .hilbert import build_operators, check_density_matrix, expectation
from .liouvillian import Liouvillian, SystemConfig, build_liouvillian, compute_rates
from .phonon_bath import BathParams, PhononRateSet

DIRECT_MAX_UNKNOWNS = 14884  # dim^2 at n_max = 60
RESIDUAL_TOL = 1e-9


class SteadyStateError(RuntimeError):
    """The constrained steady-state system could not be solved."""


class DegenerateSteadyStateError(SteadyStateError):
    """The generator has more than one stationary state."""


@dataclass
class SteadyStateResult:
    rho_ss: np.ndarray
    residual: float
    n_x: float
    n_c: float
    metadata: dict = field(default_factory=dict)

    def check(self, **tols) -> dict:
        """Trace / Hermiticity / positivity / residual checks; raises on failure."""
        report = check_density_matrix(self.rho_ss, **tols)
        if self.residual >= RESIDUAL_TOL:
            raise SteadyStateError(f"residual {self.residual:.3e} >= {RESIDUAL_TOL}")
        report["residual"] = self.residual
        return report


def _trace_row(dim):
    # column-stacked index of rho_ii is i*dim + i
    idx = np.arange(dim) * (dim + 1)
    return sp.csr_matrix((np.ones(dim, dtype=complex), (np.zeros(dim, int), idx)),
                         shape=(1, dim * dim))


def constrained_system(gen: sp.spmatrix, dim: int):
    """Replace the rho_00 equation of L v = 0 by tr(rho) = 1.

    Returns ``(A, b)``.
    """
    a = sp.vstack([_trace_row(dim), sp.csr_matrix(gen)[1:]]).tocsc()
    b = np.zeros(dim * dim, dtype=complex)
    b[0] = 1.0
    return a, b


def relative_residual(gen, v) -> float:
    """||L v|| / (||L||_1 ||v||)."""
    scale = spla.norm(gen, 1) * np.linalg.norm(v)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(gen @ v) / scale)


def steady_state(L: Liouvillian, method: str = "auto", condition: bool = False,
                 check: bool = True) -> SteadyStateResult:
    """Unique stationary state of ``L``.

    Parameters
    ----------
    method : {"auto", "direct", "iterative"}
        ``auto`` uses sparse LU up to ``DIRECT_MAX_UNKNOWNS`` unknowns and
        ILU-preconditioned GMRES above.
    condition : bool
        Also estimate the 1-norm condition number of the constrained system.
    check : bool
        Assert the physicality invariants before returning.
    """
    dim = L.dim
    n_unknowns = dim * dim
    if method == "auto":
        method = "direct" if n_unknowns <= DIRECT_MAX_UNKNOWNS else "iterative"
    a, b = constrained_system(L.matrix, dim)
    t0 = time.perf_counter()
    meta = {"method": method, "unknowns": n_unknowns}
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            if method == "direct":
                lu = spla.splu(a, permc_spec="COLAMD")
                v = lu.solve(b)
                meta["iterations"] = 1
                if condition:
                    inv = spla.LinearOperator(a.shape, matvec=lu.solve,
                                              rmatvec=lambda x: lu.solve(x, trans="H"),
                                              dtype=complex)
                    meta["condition_1norm"] = float(spla.onenormest(a) * spla.onenormest(inv))
            elif method == "iterative":
                v, meta["iterations"] = _iterative(a, b)
            else:
                raise ValueError(f"unknown method {method!r}")
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            raise DegenerateSteadyStateError(
                f"constrained system is singular ({exc}); the stationary manifold "
                "is degenerate") from exc
    if not np.all(np.isfinite(v)):
        raise DegenerateSteadyStateError("non-finite steady state; stationary manifold "
                                         "is likely degenerate")
    meta["wall_time_s"] = time.perf_counter() - t0
    rho = v.reshape(dim, dim, order="F")
    residual = relative_residual(L.matrix, v)
    ops = build_operators(L.space)
    res = SteadyStateResult(rho, residual, expectation(rho, ops.see), expectation(rho, ops.n),
                            meta)
    if residual > 1e-6:
        raise DegenerateSteadyStateError(f"residual {residual:.2e}: no unique stationary state")
    if check:
        meta["checks"] = res.check()
    return res


def _iterative(a, b, tol=1e-13):
    ilu = spla.spilu(a, drop_tol=1e-8, fill_factor=20)
    m = spla.LinearOperator(a.shape, ilu.solve, dtype=complex)
    count = [0]

    def cb(_):
        count[0] += 1

    v, info = spla.gmres(a, b, M=m, rtol=tol, atol=0.0, restart=200, maxiter=2000,
                         callback=cb, callback_type="pr_norm")
    if info != 0:
        raise SteadyStateError(f"GMRES did not converge (info={info})")
    return v, count[0]


def time_evolve(rho0, L: Liouvillian, t_final: float, dt_out: float,
                rtol: float = 1e-8, atol: float = 1e-10, store_states: bool = False):
    """Integrate d rho/dt = L rho on ``[0, t_final]`` (ps).

    Returns a dict with ``t``, ``n_x``, ``n_c`` and, when requested,
    ``states`` (array of density matrices).
    """
    if t_final <= 0:
        raise ValueError("t_final must be > 0")
    dim = L.dim
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (dim, dim):
        raise ValueError(f"rho0 has shape {rho0.shape}, expected {(dim, dim)}")
    n_out = int(np.floor(t_final / dt_out + 1e-9)) + 1
    t_eval = np.arange(n_out) * dt_out
    gen = L.matrix

    sol = solve_ivp(lambda t, y: gen @ y, (0.0, t_eval[-1] if n_out > 1 else t_final),
                    rho0.reshape(-1, order="F"), method="DOP853", t_eval=t_eval,
                    rtol=rtol, atol=atol)
    if sol.status != 0:
        raise RuntimeError(f"time integration failed: {sol.message}")
    ops = build_operators(L.space)
    see = ops.see.diagonal().real
    nn = ops.n.diagonal().real
    idx = np.arange(dim) * (dim + 1)
    pops = sol.y[idx, :].real
    out = {"t": sol.t, "n_x": see @ pops, "n_c": nn @ pops,
           "trace": pops.sum(axis=0)}
    if store_states:
        out["states"] = np.moveaxis(sol.y.reshape(dim, dim, -1, order="F"), -1, 0)
    return out


@dataclass
class TruncationReport:
    rows: list  # dicts: n_max, n_x, n_c, delta_n_x
    tolerance: float
    converged: bool
    converged_at: int | None
    flags: list


def truncation_certify(config: SystemConfig, rates: PhononRateSet | BathParams,
                       n_list, tol: float = 1e-3) -> TruncationReport:
    """Steady-state populations at each Fock cap in ``n_list``.

    ``converged_at`` is the smallest cap from which every further step up the
    list changes n_x by less than ``tol``.
    """
    n_list = list(n_list)
    if sorted(n_list) != n_list or len(set(n_list)) != len(n_list):
        raise ValueError("n_list must be strictly ascending")
    rows, flags = [], []
    prev = None
    for n in n_list:
        cfg = config.replace(n_max=n)
        r = rates if isinstance(rates, PhononRateSet) else compute_rates(cfg, rates)
        if isinstance(rates, BathParams):
            cfg = cfg.effective(rates)
        res = steady_state(build_liouvillian(cfg, r))
        diff = None if prev is None else abs(res.n_x - prev)
        rows.append({"n_max": n, "n_x": res.n_x, "n_c": res.n_c, "delta_n_x": diff,
                     "residual": res.residual})
        prev = res.n_x
    diffs = [r["delta_n_x"] for r in rows[1:]]
    converged_at = None
    if diffs:
        for i in range(len(rows) - 1):
            if all(d < tol for d in diffs[i:]):
                converged_at = rows[i]["n_max"]
                break
    else:
        flags.append("single truncation: convergence cannot be assessed")
    if diffs and diffs[-1] >= tol:
        if any(b > a for a, b in zip(diffs, diffs[1:])):
            flags.append("non-monotone non-convergence")
        else:
            flags.append("not converged at largest cap")
    return TruncationReport(rows, tol, converged_at is not None, converged_at, flags)
