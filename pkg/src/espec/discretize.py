"""Finite-difference matrices for the Lamé operator and its perturbations.

Unknowns are ordered node-major, component-minor: entry ``node * d + comp``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import AllocationTooLarge, GridMismatch, KindMismatch
from .model import DampingField, FieldKind, Grid, LameParams

MAX_SIZE = 4_000_000


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Sparse (CSR) operator with its provenance.

    ``params`` and ``grid`` are ``None`` for matrices built directly from
    arrays (small test pencils, companion linearizations).
    """

    matrix: sp.csr_matrix
    hermitian: bool
    params: Optional[LameParams] = None
    grid: Optional[Grid] = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.matrix.data) ** 2)))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    @classmethod
    def from_array(cls, a, params=None, grid=None) -> "OperatorMatrix":
        m = sp.csr_matrix(a)
        return cls(m, is_hermitian(m), params, grid)


def is_hermitian(m) -> bool:
    """Exact entrywise check ``m == m^H``."""
    m = sp.csr_matrix(m)
    diff = m - m.conj().T
    return diff.count_nonzero() == 0 if diff.nnz else True


def _second_difference(n: int, h: float, periodic: bool = False) -> sp.csr_matrix:
    """``-d^2/dx^2`` as ``tridiag(-1, 2, -1) / h^2``."""
    m = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="lil")
    if periodic:
        m[0, n - 1] = -1
        m[n - 1, 0] = -1
    return (m / (h * h)).tocsr()


def _centered_difference(n: int, h: float, periodic: bool = False) -> sp.csr_matrix:
    m = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1], format="lil")
    if periodic:
        m[0, n - 1] = -1
        m[n - 1, 0] = 1
    return (m / (2 * h)).tocsr()


def _along_axis(op1d, axis: int, dim: int, n: int) -> sp.csr_matrix:
    """Embed a 1D operator acting on ``axis`` into the node space (first axis slowest)."""
    eye = sp.identity(n, format="csr")
    out = None
    for k in range(dim):
        factor = op1d if k == axis else eye
        out = factor if out is None else sp.kron(out, factor, format="csr")
    return out


def assemble_lame(params: LameParams, grid: Grid, max_size: int = MAX_SIZE,
                  periodic: bool = False) -> OperatorMatrix:
    """Discrete ``-mu Lap u - (lambda + mu) grad div u`` with Dirichlet rows eliminated.

    In 1D this is ``(lambda + 2 mu) tridiag(-1, 2, -1) / h^2``. Mixed second
    derivatives use the product of centered first differences (corner weights
    ``1 / 4h^2``), which keeps the matrix symmetric. ``periodic`` wraps the
    stencils around the box and exists for plane-wave checks.
    """
    d, n, h = grid.dim, grid.points_per_axis, grid.spacing
    size = d * grid.num_nodes
    if size > max_size:
        raise AllocationTooLarge(f"operator size {size} exceeds cap {max_size}")
    if d == 1:
        k = params.p_speed_sq * _second_difference(n, h, periodic)
        return OperatorMatrix(k.tocsr(), True, params, grid)

    second = [_along_axis(_second_difference(n, h, periodic), i, d, n) for i in range(d)]
    first = [_along_axis(_centered_difference(n, h, periodic), i, d, n) for i in range(d)]
    neg_lap = sum(second[1:], second[0])
    k = params.mu * sp.kron(neg_lap, sp.identity(d), format="csr")
    coupling = params.lam + params.mu
    if coupling != 0:
        for p in range(d):
            for q in range(d):
                block = second[p] if p == q else -(first[p] @ first[q])
                unit = sp.csr_matrix(([1.0], ([p], [q])), shape=(d, d))
                k = k + coupling * sp.kron(block, unit, format="csr")
    k = sp.csr_matrix(k)
    k.eliminate_zeros()
    return OperatorMatrix(k, is_hermitian(k), params, grid)


def potential_blocks(v: DampingField, scale: complex = 1.0) -> sp.csr_matrix:
    """Block-diagonal multiplication operator ``scale * V`` in the unknown ordering."""
    d = v.grid.dim
    if v.kind is FieldKind.MATRIX_COMPLEX:
        if d == 1:
            raise KindMismatch("matrix-valued fields need the d >= 2 block layout")
        blocks = scale * v.samples
        return sp.block_diag(list(blocks), format="csr")
    vals = scale * v.samples
    return sp.diags(np.repeat(vals, d), 0, format="csr")


def add_potential(a: OperatorMatrix, v: DampingField, scale: complex = 1.0) -> OperatorMatrix:
    """Return ``A + scale * diag-block(V)``."""
    if a.grid is None or v.grid != a.grid:
        raise GridMismatch("potential grid differs from operator grid")
    if scale == 0:
        return a
    if np.isreal(scale):
        scale = float(np.real(scale))
    m = (a.matrix + potential_blocks(v, scale)).tocsr()
    return OperatorMatrix(m, is_hermitian(m), a.params, a.grid)


@dataclass(frozen=True)
class SymbolEigenvalues:
    xi: np.ndarray
    shear_value: float
    pressure_value: float
    shear_multiplicity: int

    @property
    def values(self) -> np.ndarray:
        """All ``d`` eigenvalues, ascending."""
        return np.array([self.shear_value] * self.shear_multiplicity + [self.pressure_value])


def symbol_matrix(params: LameParams, xi) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    d = xi.size
    if d == 1:
        return np.array([[params.p_speed_sq * xi[0] ** 2]])
    return params.mu * (xi @ xi) * np.eye(d) + (params.lam + params.mu) * np.outer(xi, xi)


def symbol_eigenvalues(params: LameParams, xi) -> SymbolEigenvalues:
    """Shear ``mu |xi|^2`` (multiplicity ``d - 1``) and pressure ``(lambda + 2 mu) |xi|^2``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    r2 = float(xi @ xi)
    return SymbolEigenvalues(xi, params.mu * r2, params.p_speed_sq * r2, xi.size - 1)


def export_coordinate_text(op: OperatorMatrix, path) -> None:
    """Write ``row col re im`` per stored entry (zero-based indices)."""
    coo = op.matrix.tocoo()
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            v = complex(v)
            fh.write(f"{r} {c} {v.real!r} {v.imag!r}\n")


def read_coordinate_text(path, size: int) -> sp.csr_matrix:
    data = np.loadtxt(path, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((size, size))
    vals = data[:, 2] + 1j * data[:, 3]
    return sp.csr_matrix((vals, (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(size, size))
