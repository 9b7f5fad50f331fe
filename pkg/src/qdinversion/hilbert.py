"""Truncated exciton (x) photon Fock space and operators on it.

Basis ordering is photon-major with the exciton index fastest::

    |g,0>, |e,0>, |g,1>, |e,1>, ..., |g,n_max>, |e,n_max>

so the state |s, n> sits at index ``2 n + s`` (s = 0 for g, 1 for e) and a
product operator is ``kron(photon_part, exciton_part)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

BASIS_ORDERING = "photon-major/exciton-fastest"


class PhysicalityError(ValueError):
    """A density matrix violates trace, Hermiticity or positivity bounds."""


@dataclass(frozen=True)
class SpaceSpec:
    n_max: int = 60

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max}")

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    def index(self, exciton: int, n: int) -> int:
        if exciton not in (0, 1) or not 0 <= n <= self.n_max:
            raise IndexError(f"no basis state |{exciton},{n}> for n_max={self.n_max}")
        return 2 * n + exciton


@dataclass(frozen=True)
class OperatorSet:
    space: SpaceSpec
    a: sp.csr_matrix
    adag: sp.csr_matrix
    sm: sp.csr_matrix
    sp: sp.csr_matrix
    see: sp.csr_matrix
    n: sp.csr_matrix
    identity: sp.csr_matrix

    def __getitem__(self, name):
        return getattr(self, name)


def _photon_destroy(n_max):
    return sp.diags(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1,
                    shape=(n_max + 1, n_max + 1), format="csr", dtype=complex)


def build_operators(space: SpaceSpec) -> OperatorSet:
    """Sparse a, a^dag, sigma-, sigma+, sigma_ee and a^dag a on ``space``.

    ``a^dag`` maps the top Fock level to zero (hard cap).
    """
    i_ph = sp.identity(space.n_max + 1, dtype=complex, format="csr")
    i_x = sp.identity(2, dtype=complex, format="csr")
    lower = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))  # |g><e|
    a = sp.kron(_photon_destroy(space.n_max), i_x, format="csr")
    sm = sp.kron(i_ph, lower, format="csr")
    ops = dict(
        a=a,
        adag=a.conj().T.tocsr(),
        sm=sm,
        sp=sm.conj().T.tocsr(),
        see=sp.kron(i_ph, sp.csr_matrix(np.diag([0, 1]).astype(complex)), format="csr"),
        n=(a.conj().T @ a).tocsr(),
        identity=sp.identity(space.dim, dtype=complex, format="csr"),
    )
    for m in ops.values():
        m.eliminate_zeros()
    return OperatorSet(space=space, **ops)


def basis_ket(space: SpaceSpec, exciton: int, n: int) -> np.ndarray:
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.index(exciton, n)] = 1.0
    return psi


def coherent_ket(space: SpaceSpec, alpha: complex, exciton: int = 0) -> np.ndarray:
    """|alpha> (x) |exciton>, Fock amplitudes truncated at n_max (not renormalised)."""
    n = np.arange(space.n_max + 1)
    log_fact = np.cumsum(np.log(np.maximum(n, 1)))
    amp = np.exp(-abs(alpha) ** 2 / 2 - 0.5 * log_fact) * np.power(complex(alpha), n)
    psi = np.zeros(space.dim, dtype=complex)
    psi[2 * n + exciton] = amp
    return psi


def ket_to_dm(psi) -> np.ndarray:
    psi = np.asarray(psi)
    return np.outer(psi, psi.conj())


def expectation(rho, op, hermitian: bool = True):
    """tr(rho op).  Real part for Hermitian observables (imaginary residue checked)."""
    if rho.shape != op.shape:
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs op {op.shape}")
    if sp.issparse(rho):
        rho = rho.toarray()
    # tr(rho op) = sum_ij rho_ij op_ji
    val = (op.T.multiply(rho).sum() if sp.issparse(op)
           else np.einsum("ij,ji->", rho, op))
    val = complex(val)
    if not hermitian:
        return val
    if abs(val.imag) > 1e-8:
        raise ValueError(f"expectation of Hermitian observable has imaginary part {val.imag:.3e}")
    return val.real


def check_density_matrix(rho, trace_tol=1e-10, herm_tol=1e-10, eig_floor=-1e-8) -> dict:
    """Assert trace, Hermiticity and positivity; never repairs.

    Returns the measured deviations.
    """
    rho = rho.toarray() if sp.issparse(rho) else np.asarray(rho)
    tr = np.trace(rho)
    herm = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    report = {"trace_error": float(abs(tr - 1)), "hermiticity_error": float(herm),
              "min_eigenvalue": min_eig}
    if abs(tr - 1) > trace_tol:
        raise PhysicalityError(f"trace {tr} deviates from 1 by more than {trace_tol}")
    if herm > herm_tol:
        raise PhysicalityError(f"non-Hermitian by {herm:.3e}")
    if min_eig < eig_floor:
        raise PhysicalityError(f"minimum eigenvalue {min_eig:.3e} below {eig_floor}")
    return report


def dump_triplets(matrix, path, space: SpaceSpec | None = None) -> None:
    """Write a sparse matrix as text triplets ``row col re im`` with an ordering header."""
    m = sp.coo_matrix(matrix)
    lines = [f"# ordering: {BASIS_ORDERING}",
             f"# shape: {m.shape[0]} {m.shape[1]}"]
    if space is not None:
        lines.append(f"# n_max: {space.n_max}")
    order = np.lexsort((m.col, m.row))
    for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
        lines.append(f"{r} {c} {v.real:.17g} {v.imag:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_triplets(path) -> sp.csr_matrix:
    rows, cols, vals, shape = [], [], [], None
    for line in Path(path).read_text().splitlines():
        if line.startswith("# shape:"):
            shape = tuple(int(x) for x in line.split(":")[1].split())
        elif line and not line.startswith("#"):
            r, c, re, im = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(re) + 1j * float(im))
    return sp.csr_matrix((vals, (rows, cols)), shape=shape, dtype=complex)
