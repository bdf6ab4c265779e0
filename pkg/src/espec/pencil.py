"""Quadratic pencil ``z^2 + z a - Lame`` and its first companion linearization.

The companion is the block matrix ``[[0, I], [-K, -A]]`` where ``K`` is the
discrete (positive) Lamé matrix and ``A`` the block-diagonal damping. An
eigenvector ``(psi, z psi)`` of the companion carries an eigenvector ``psi``
of ``K + z A`` at the eigenvalue ``-z^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp

from .discretize import OperatorMatrix, assemble_lame, is_hermitian, potential_blocks
from .eigensolve import EigenResult, SolveOptions, dense_cap, solve_arnoldi, solve_dense
from .errors import FactorizationSingular, GridMismatch, NoConvergence
from .model import DampingField, Grid, LameParams

LOCALIZATION_THRESHOLD = 0.05
OUTER_FRACTION = 0.25


@dataclass(frozen=True, eq=False)
class DampedPencil:
    lame_matrix: OperatorMatrix
    damping_matrix: sp.csr_matrix
    companion: OperatorMatrix
    damping: Optional[DampingField] = None

    @property
    def size(self) -> int:
        """``N``, the size of the Lamé block."""
        return self.lame_matrix.size

    @property
    def grid(self) -> Optional[Grid]:
        return self.lame_matrix.grid

    @property
    def params(self) -> Optional[LameParams]:
        return self.lame_matrix.params

    @property
    def norm(self) -> float:
        """Infinity norm of the companion matrix (at least 1)."""
        rows = np.asarray(abs(self.companion.matrix).sum(axis=1)).ravel()
        return float(max(rows.max(initial=0.0), 1.0))

    @classmethod
    def from_matrices(cls, stiffness, damping) -> "DampedPencil":
        """Pencil from explicit ``K`` and ``A`` (no grid attached)."""
        k = sp.csr_matrix(np.atleast_2d(stiffness) if not sp.issparse(stiffness) else stiffness)
        a = sp.csr_matrix(np.atleast_2d(damping) if not sp.issparse(damping) else damping)
        lame = OperatorMatrix(k, is_hermitian(k))
        return cls(lame, a, _companion(k, a))


def _companion(k, a) -> OperatorMatrix:
    n = k.shape[0]
    eye = sp.identity(n, format="csr")
    c = sp.bmat([[None, eye], [-k, -a]], format="csr")
    return OperatorMatrix(c, is_hermitian(c))


def build_pencil(params: LameParams, grid: Grid, a: DampingField) -> DampedPencil:
    if a.grid != grid:
        raise GridMismatch("damping grid differs from pencil grid")
    lame = assemble_lame(params, grid)
    blocks = potential_blocks(a)
    return DampedPencil(lame, blocks, _companion(lame.matrix, blocks), a)


@dataclass
class PencilEigenpair:
    z: complex
    residual: float
    localization: float
    converged: bool
    companion_gap: float = 0.0
    drift: Optional[float] = None
    psi: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {"re": float(self.z.real), "im": float(self.z.imag), "residual": self.residual,
                "localization": self.localization, "converged": self.converged,
                "drift": self.drift}


def outer_mask(grid: Grid) -> np.ndarray:
    """Nodes in the outer quarter of the box, ``max_i |x_i| > 0.75 L``."""
    far = np.max(np.abs(grid.nodes), axis=1)
    return far > (1.0 - OUTER_FRACTION) * grid.half_width


def localization(grid: Optional[Grid], psi: np.ndarray) -> np.ndarray:
    """Fraction of the squared l2 mass of each column of ``psi`` near the boundary."""
    psi = np.asarray(psi)
    if psi.ndim == 1:
        return localization(grid, psi[:, None])[0]
    if grid is None:
        return np.zeros(psi.shape[1])
    d = grid.dim
    mass = np.abs(psi) ** 2
    per_node = mass.reshape(grid.num_nodes, d, -1).sum(axis=1)
    total = per_node.sum(axis=0)
    outer = per_node[outer_mask(grid)].sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(total > 0, outer / total, 0.0)
    return np.clip(frac, 0.0, 1.0)


def correspondence_residual(p: DampedPencil, z: complex, psi: np.ndarray) -> float:
    """``||(K + z A + z^2) psi||_2``, the residual of the equivalent Lamé problem."""
    r = p.lame_matrix.matrix @ psi + z * (p.damping_matrix @ psi) + (z * z) * psi
    return float(np.linalg.norm(r))


def correspondence_residuals(p: DampedPencil, z: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Column-wise :func:`correspondence_residual`."""
    r = p.lame_matrix.matrix @ psi + (p.damping_matrix @ psi) * z[None, :] + psi * (z * z)[None, :]
    return np.linalg.norm(r, axis=0)


def companion_residual(p: DampedPencil, z: complex, psi: np.ndarray) -> float:
    """Residual of ``(psi, z psi)`` as an eigenvector of the companion, normalized."""
    u = np.concatenate([psi, z * psi])
    u = u / np.linalg.norm(u)
    return float(np.linalg.norm(p.companion.matrix @ u - z * u))


def _pairs_from(p: DampedPencil, values, vectors) -> List[PencilEigenpair]:
    n = p.size
    psi1 = vectors[:n, :]
    psi2 = vectors[n:, :]
    gaps = np.linalg.norm(psi2 - psi1 * values[None, :], axis=0)
    norms = np.linalg.norm(psi1, axis=0)
    psi = psi1 / np.where(norms > 0, norms, 1.0)[None, :]
    res = correspondence_residuals(p, values, psi)
    loc = localization(p.grid, psi)
    pairs = []
    for i, z in enumerate(values):
        pairs.append(PencilEigenpair(complex(z), float(res[i]), float(loc[i]),
                                     bool(loc[i] <= LOCALIZATION_THRESHOLD and z != 0),
                                     float(gaps[i]), None, psi[:, i]))
    return pairs


def pencil_spectrum(p: DampedPencil, opts: SolveOptions = SolveOptions(),
                    count: Optional[int] = None) -> List[PencilEigenpair]:
    """Eigenpairs of the companion matrix.

    The whole spectrum is computed when ``2N`` fits the dense cap; otherwise
    the ``count`` eigenvalues nearest ``opts.shift``. Pairs whose eigenvector
    puts more than 5% of its mass in the outer quarter of the box are
    flagged non-converged (discretized continuous spectrum).
    """
    opts_v = opts.with_(want_vectors=True)
    if p.companion.size <= dense_cap() and count is None:
        res = solve_dense(p.companion, opts_v)
    else:
        res = solve_arnoldi(p.companion, opts_v, count=count)
    return _pairs_from(p, res.values.astype(complex), res.vectors)


def shifted_lame_matrix(p: DampedPencil, s: complex) -> OperatorMatrix:
    """``K + s A`` as an operator on the pencil's grid."""
    if s == 0:
        return p.lame_matrix
    if np.isreal(s):
        s = float(np.real(s))
    m = (p.lame_matrix.matrix + s * p.damping_matrix).tocsr()
    return OperatorMatrix(m, is_hermitian(m), p.params, p.grid)


def shifted_lame_spectrum(p: DampedPencil, s: complex, opts: SolveOptions = SolveOptions(),
                          count: Optional[int] = None) -> EigenResult:
    """Eigenvalues of ``K + s A``; the Hermitian path applies for real ``s`` and real damping."""
    op = shifted_lame_matrix(p, s)
    if op.size <= dense_cap() and count is None:
        return solve_dense(op, opts)
    return solve_arnoldi(op, opts, count=count)


def pairs_near(p: DampedPencil, z: complex, opts: SolveOptions = SolveOptions(),
               count: int = 3) -> List[PencilEigenpair]:
    """The ``count`` companion eigenpairs nearest ``z``.

    The shift is nudged off ``z`` so that tracking an eigenvalue that is
    already exact on this grid does not hit a singular factorization.
    """
    def convert(res):
        return _pairs_from(p, np.asarray(res.values, dtype=complex), res.vectors)

    return _near(p.companion, z, opts, count, convert)


def _near(op, z, opts, count, convert):
    z = complex(z)
    scale = max(abs(z), 1.0)
    n = op.size
    for eps in (1e-7, 1e-5, 1e-3):
        shift = z + eps * scale * (1.0 + 0.5j)
        # dense clusters (grid-scale modes of the companion) need wider subspaces
        singular = False
        for sub in (None, 80, 200):
            if sub is not None and sub >= n:
                break
            try:
                res = solve_arnoldi(op, opts.with_(shift=shift, want_vectors=True, subspace_dim=sub),
                                    count=count)
            except NoConvergence:
                continue
            except FactorizationSingular:
                singular = True
                break
            return convert(res)
        if not singular:
            raise NoConvergence(count, f"no convergence near {z}")
    raise FactorizationSingular(z)


def potential_operator(params: LameParams, grid: Grid, v: DampingField) -> OperatorMatrix:
    """``-Lame + V`` with the multiplication operator laid out like the damping block."""
    if v.grid != grid:
        raise GridMismatch("potential grid differs from operator grid")
    m = (assemble_lame(params, grid).matrix + potential_blocks(v)).tocsr()
    return OperatorMatrix(m, is_hermitian(m), params, grid)


def _potential_pairs(op: OperatorMatrix, res: EigenResult) -> List[PencilEigenpair]:
    vals = np.asarray(res.values, dtype=complex)
    vecs = res.vectors
    r = op.matrix @ vecs - vecs * vals[None, :]
    resid = np.linalg.norm(r, axis=0)
    loc = localization(op.grid, vecs)
    return [PencilEigenpair(complex(z), float(resid[i]), float(loc[i]),
                            bool(loc[i] <= LOCALIZATION_THRESHOLD), 0.0, None, vecs[:, i])
            for i, z in enumerate(vals)]


def potential_spectrum(params: LameParams, grid: Grid, v: DampingField,
                       opts: SolveOptions = SolveOptions(),
                       count: Optional[int] = None) -> List[PencilEigenpair]:
    """Eigenpairs of ``-Lame + V``, carried in the same record as pencil pairs.

    ``residual`` is ``||(-Lame + V - z) psi||`` and the convergence flag starts
    out as the localization test only.
    """
    op = potential_operator(params, grid, v)
    opts_v = opts.with_(want_vectors=True)
    if op.size <= dense_cap() and count is None:
        res = solve_dense(op, opts_v)
    else:
        res = solve_arnoldi(op, opts_v, count=count)
    return _potential_pairs(op, res)


def potential_pairs_near(params: LameParams, grid: Grid, v: DampingField, z: complex,
                         opts: SolveOptions = SolveOptions(), count: int = 3) -> List[PencilEigenpair]:
    op = potential_operator(params, grid, v)
    return _near(op, z, opts, count, lambda res: _potential_pairs(op, res))
