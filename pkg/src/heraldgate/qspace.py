"""Hilbert-space layout and sparse operator construction.

The composite system is one four-level emitter (the "quartit") in resonator A,
``n_qutrits`` three-level emitters in resonator B, and the two delocalized
field modes built from the symmetric/antisymmetric combinations of the two
resonator amplitudes.  Sites are ordered

    0              quartit           (levels g1, g2, e1, e2)
    1 .. N         qutrits           (levels 0, 1, 2)
    N+1, N+2       modes +, -        (Fock levels 0 .. n_max)

Operators act on the full space as Kronecker products in this site order and
are kept as ``scipy.sparse`` CSR matrices; states are plain dense arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

# quartit level indices
G1, G2, E1, E2 = 0, 1, 2, 3
QUARTIT_DIM = 4
QUTRIT_DIM = 3


@dataclass(frozen=True)
class HilbertSpace:
    """Dimensions and site bookkeeping for the composite system.

    Parameters
    ----------
    n_qutrits : int
        Number of three-level emitters in resonator B.
    n_max : int
        Highest Fock state kept per field mode (mode dimension is n_max + 1).
    """

    n_qutrits: int
    n_max: int = 2

    def __post_init__(self) -> None:
        if self.n_qutrits < 1:
            raise ValueError(f"need at least one qutrit, got {self.n_qutrits}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def dims(self) -> tuple[int, ...]:
        d = self.n_max + 1
        return (QUARTIT_DIM, *([QUTRIT_DIM] * self.n_qutrits), d, d)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_sites(self) -> int:
        return self.n_qutrits + 3

    @property
    def qutrit_sites(self) -> range:
        return range(1, 1 + self.n_qutrits)

    @property
    def mode_plus_site(self) -> int:
        return self.n_qutrits + 1

    @property
    def mode_minus_site(self) -> int:
        return self.n_qutrits + 2

    def basis_index(self, levels: Sequence[int]) -> int:
        """Flat index of the product basis state with the given site levels."""
        if len(levels) != self.n_sites:
            raise ValueError(f"expected {self.n_sites} levels, got {len(levels)}")
        idx = 0
        for lvl, d in zip(levels, self.dims):
            if not 0 <= lvl < d:
                raise ValueError(f"level {lvl} out of range for dimension {d}")
            idx = idx * d + lvl
        return idx


def transition(dim: int, i: int, j: int) -> sp.csr_matrix:
    """Single-site transition operator |i><j| as a sparse matrix."""
    return sp.csr_matrix(([1.0 + 0.0j], ([i], [j])), shape=(dim, dim))


def destroy(dim: int) -> sp.csr_matrix:
    """Bosonic annihilation operator truncated to ``dim`` Fock states."""
    return sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1,
                    dtype=complex, format="csr")


def dag(op: sp.spmatrix) -> sp.csr_matrix:
    return op.conj().T.tocsr()


def lift(space: HilbertSpace, ops: Mapping[int, sp.spmatrix]) -> sp.csr_matrix:
    """Embed single-site operators into the full space.

    Parameters
    ----------
    space : HilbertSpace
    ops : mapping site -> operator
        Sites not present act as identity.  Multiple sites give the Kronecker
        product of the per-site factors (site order fixed by the space).

    Returns
    -------
    scipy.sparse.csr_matrix of shape (space.dim, space.dim)
    """
    dims = space.dims
    for site, op in ops.items():
        if not 0 <= site < space.n_sites:
            raise ValueError(f"site {site} out of range")
        if op.shape != (dims[site], dims[site]):
            raise ValueError(
                f"operator at site {site} has shape {op.shape}, "
                f"expected {(dims[site], dims[site])}")
    out = None
    for site, d in enumerate(dims):
        factor = ops.get(site)
        if factor is None:
            factor = sp.identity(d, dtype=complex, format="csr")
        out = factor if out is None else sp.kron(out, factor, format="csr")
    return out.tocsr()


def basis_ket(space: HilbertSpace, levels: Sequence[int]) -> np.ndarray:
    """Dense product basis vector with the given per-site levels."""
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.basis_index(levels)] = 1.0
    return psi


def product_state(space: HilbertSpace, quartit: np.ndarray,
                  qutrits: Sequence[np.ndarray],
                  modes: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """Dense product state vector from per-site kets (modes default to vacuum)."""
    if len(qutrits) != space.n_qutrits:
        raise ValueError(f"expected {space.n_qutrits} qutrit kets, got {len(qutrits)}")
    if modes is None:
        vac = np.zeros(space.n_max + 1, dtype=complex)
        vac[0] = 1.0
        modes = (vac, vac)
    psi = np.asarray(quartit, dtype=complex)
    for q in qutrits:
        psi = np.kron(psi, np.asarray(q, dtype=complex))
    psi = np.kron(psi, np.asarray(modes[0], dtype=complex))
    psi = np.kron(psi, np.asarray(modes[1], dtype=complex))
    return psi


def expect(op: sp.spmatrix, rho: np.ndarray) -> complex:
    """Tr(op rho) for a sparse operator and dense density matrix."""
    return complex((op @ rho).diagonal().sum())
