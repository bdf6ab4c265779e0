"""Eigenvalues of the discrete operators, with residual certification.

Two dense backends are available: ``"lapack"`` (numpy/scipy, default) and
``"builtin"`` (the numpy-level QR codes in :mod:`espec._dense`). Sparse
problems use a shift-invert Krylov-Schur iteration on top of a sparse LU.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _dense
from .discretize import OperatorMatrix, is_hermitian
from .errors import AllocationTooLarge, FactorizationSingular, NoConvergence

DEFAULT_DENSE_CAP = 4000


def dense_cap() -> int:
    """Largest matrix size handed to a dense solver (``ESPEC_DENSE_CAP`` overrides)."""
    raw = os.environ.get("ESPEC_DENSE_CAP")
    return int(raw) if raw else DEFAULT_DENSE_CAP


class Method(str, enum.Enum):
    DENSE_QR = "DenseQR"
    TRIDIAGONAL = "Tridiagonal"
    SHIFT_INVERT_ARNOLDI = "ShiftInvertArnoldi"


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-10
    max_iter: int = 300
    shift: complex = 0.0
    subspace_dim: Optional[int] = None
    want_vectors: bool = True
    count: int = 6
    backend: str = "lapack"
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.subspace_dim is not None and self.subspace_dim < self.count + 2:
            raise ValueError("subspace_dim must be at least count + 2")
        if self.backend not in ("lapack", "builtin"):
            raise ValueError(f"unknown backend {self.backend!r}")

    def with_(self, **kw) -> "SolveOptions":
        return replace(self, **kw)


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: Optional[np.ndarray]
    residuals: np.ndarray
    method: Method
    backend: str = "lapack"
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return self.values.size


def sort_key(values: np.ndarray) -> np.ndarray:
    """Ascending ``|z|``, ties broken by principal argument in ``(-pi, pi]``."""
    z = np.asarray(values, dtype=complex)
    mag = np.round(np.abs(z), 12)
    arg = np.angle(z)
    arg = np.where(arg <= -np.pi, np.pi, arg)
    return np.lexsort((arg, mag))


def residual_norms(a, values, vectors) -> np.ndarray:
    """``||A v - z v||_2 / ||A||_F`` column by column."""
    if vectors is None:
        return np.zeros(0)
    nrm = _fro(a)
    r = a @ vectors - vectors * values[None, :]
    out = np.linalg.norm(r, axis=0)
    return out / nrm if nrm > 0 else out


def _fro(a) -> float:
    if sp.issparse(a):
        return float(np.sqrt(np.sum(np.abs(a.data) ** 2)))
    return float(np.linalg.norm(a))


def _normalize_phase(vectors):
    """Unit columns whose largest-modulus entry is real positive (deterministic output)."""
    v = vectors / np.linalg.norm(vectors, axis=0)
    idx = np.argmax(np.abs(v) > 0.999 * np.abs(v).max(axis=0), axis=0)
    lead = v[idx, np.arange(v.shape[1])]
    phase = np.where(lead != 0, lead / np.abs(lead), 1.0)
    return v / phase[None, :]


def _as_matrix(a):
    if isinstance(a, OperatorMatrix):
        return a.matrix, a.hermitian
    if sp.issparse(a):
        return sp.csr_matrix(a), is_hermitian(a)
    arr = np.asarray(a)
    return arr, bool(np.array_equal(arr, arr.conj().T))


def solve_dense(a, opts: SolveOptions = SolveOptions()) -> EigenResult:
    """All eigenvalues of ``a``.

    Hermitian input goes through tridiagonalization and symmetric QR and is
    returned ascending; general input goes through balancing, Hessenberg
    reduction and shifted QR and is ordered by :func:`sort_key`.
    """
    m, hermitian = _as_matrix(a)
    n = m.shape[0]
    if n > dense_cap():
        raise AllocationTooLarge(f"dense solve of size {n} exceeds cap {dense_cap()}")
    dense = m.toarray() if sp.issparse(m) else np.asarray(m)
    want = opts.want_vectors
    if hermitian:
        if opts.backend == "builtin":
            values, vectors = _dense.eig_hermitian(dense, want, opts.max_iter)
        elif want:
            values, vectors = np.linalg.eigh(dense)
        else:
            values, vectors = np.linalg.eigvalsh(dense), None
        values = np.asarray(values, dtype=float)
        method = Method.TRIDIAGONAL
    else:
        if opts.backend == "builtin":
            values, vectors = _dense.eig_general(dense, want, opts.max_iter)
        elif want:
            values, vectors = sla.eig(dense, check_finite=False)
        else:
            values, vectors = sla.eigvals(dense, check_finite=False), None
        order = sort_key(values)
        values = np.asarray(values, dtype=complex)[order]
        if vectors is not None:
            vectors = vectors[:, order]
        method = Method.DENSE_QR
    if vectors is not None:
        vectors = _normalize_phase(vectors.astype(complex))
        residuals = residual_norms(dense, values, vectors)
    else:
        residuals = np.zeros(0)
    return EigenResult(values, vectors, residuals, method, opts.backend)


# ---------------------------------------------------------------------------
# shift-invert Krylov-Schur


class _ShiftInvert:
    def __init__(self, m, shift):
        n = m.shape[0]
        self.n = n
        self.shift = shift
        real = not np.iscomplexobj(m.data) and complex(shift).imag == 0
        dtype = float if real else complex
        shifted = (m - (shift.real if real else shift) * sp.identity(n, format="csr")).astype(dtype)
        try:
            self.lu = spla.splu(sp.csc_matrix(shifted))
        except RuntimeError as exc:
            raise FactorizationSingular(shift) from exc
        pivots = np.abs(self.lu.U.diagonal())
        if pivots.min() <= n * np.finfo(float).eps * max(_fro(m), 1.0) * 1e-3:
            raise FactorizationSingular(shift)
        self.dtype = dtype

    def __call__(self, v):
        if self.dtype is float and np.iscomplexobj(v):
            return self.lu.solve(np.ascontiguousarray(v.real)) + 1j * self.lu.solve(np.ascontiguousarray(v.imag))
        return self.lu.solve(np.ascontiguousarray(v, dtype=self.dtype))


def _orth_against(w, basis):
    for _ in range(2):
        w = w - basis @ (basis.conj().T @ w)
    return w


def _krylov_schur(op, n, k, m, tol, max_restarts, rng, hermitian, deflate=None):
    """Schur vectors and Ritz values of the ``k`` largest-modulus eigenvalues of ``op``.

    ``deflate`` (orthonormal columns) is projected out of the operator, which
    exposes copies of multiple eigenvalues a single Krylov sequence misses.
    """
    def apply(v):
        if deflate is not None:
            v = _orth_against(v, deflate)
        w = op(v)
        if deflate is not None:
            w = _orth_against(w, deflate)
        return w

    def fresh(basis):
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        if deflate is not None:
            v = _orth_against(v, deflate)
        if basis is not None and basis.shape[1]:
            v = _orth_against(v, basis)
        return v / np.linalg.norm(v)

    m = min(m, n)
    k = min(k, m)
    v = np.zeros((n, m + 1), dtype=complex)
    h = np.zeros((m + 1, m), dtype=complex)
    v[:, 0] = fresh(None)
    p = 0
    for _ in range(max_restarts):
        exhausted = None
        for j in range(p, m):
            w = apply(v[:, j])
            basis = v[:, :j + 1]
            coef = basis.conj().T @ w
            w = w - basis @ coef
            corr = basis.conj().T @ w
            w = w - basis @ corr
            h[:j + 1, j] = coef + corr
            beta = np.linalg.norm(w)
            if beta <= 1e-13 * max(np.linalg.norm(h[:j + 1, j]), 1e-300):
                h[j + 1, j] = 0.0
                if j + 1 >= n - (0 if deflate is None else deflate.shape[1]):
                    exhausted = j + 1
                    break
                v[:, j + 1] = fresh(basis)
            else:
                h[j + 1, j] = beta
                v[:, j + 1] = w / beta
        size = exhausted or m
        hm = h[:size, :size]
        if hermitian:
            theta, y = np.linalg.eigh(0.5 * (hm + hm.conj().T))
            theta = theta.astype(complex)
        else:
            theta, y = np.linalg.eig(hm)
        order = np.argsort(-np.abs(theta), kind="stable")
        kk = min(k, size)
        want = order[:kk]
        resid = np.abs(h[size, :size] @ y[:, want]) if exhausted is None else np.zeros(kk)
        if exhausted is not None or np.all(resid <= tol * np.abs(theta[want])):
            t, z = _ordered_schur(hm, theta, order, kk, hermitian, y)
            return v[:, :size] @ z[:, :kk], t[:kk, :kk]
        keep = min(max(kk + (size - kk) // 2, kk), size - 1)
        t, z = _ordered_schur(hm, theta, order, keep, hermitian, y)
        b = h[size, :size] @ z[:, :keep]
        v[:, :keep] = v[:, :size] @ z[:, :keep]
        v[:, keep] = v[:, size]
        h[:] = 0.0
        h[:keep, :keep] = t[:keep, :keep]
        h[keep, :keep] = b
        p = keep
    raise NoConvergence(k, "Krylov-Schur restarts exhausted")


def _ordered_schur(hm, theta, order, keep, hermitian, y):
    """Schur form of ``hm`` whose leading ``keep`` diagonal entries are the wanted values."""
    if hermitian:
        z = y[:, order]
        return np.diag(theta[order]), z
    size = hm.shape[0]
    if keep >= size:
        t, z = sla.schur(hm, output="complex")
        return t, z
    threshold = np.abs(theta[order[keep - 1]])
    t, z, sdim = sla.schur(hm, output="complex", sort=lambda x: abs(x) >= threshold * (1 - 1e-12))
    if sdim < keep:
        t, z = sla.schur(hm, output="complex")
    return t, z


def solve_arnoldi(a, opts: SolveOptions, count: Optional[int] = None) -> EigenResult:
    """The ``count`` eigenvalues nearest ``opts.shift`` by shift-invert Krylov-Schur.

    Raises :class:`FactorizationSingular` when the shift is an eigenvalue to
    working precision; callers are expected to perturb it.
    """
    m, hermitian = _as_matrix(a)
    m = sp.csr_matrix(m)
    n = m.shape[0]
    count = opts.count if count is None else count
    count = min(count, n)
    shift = complex(opts.shift)
    subspace = opts.subspace_dim or max(2 * count + 10, 24)
    if subspace < count + 2 and n > count + 2:
        raise ValueError("subspace_dim must be at least count + 2")
    op = _ShiftInvert(m, shift)
    herm_path = hermitian and shift.imag == 0
    rng = np.random.default_rng(opts.seed)
    inner_tol = 0.1 * opts.tol

    schur_vecs, _ = _krylov_schur(op, n, count, subspace, inner_tol, opts.max_iter, rng, herm_path)
    theta, x = None, None
    for _ in range(4):
        if schur_vecs.shape[1] >= n:
            break
        extra, _ = _krylov_schur(op, n, count, subspace, inner_tol, opts.max_iter, rng,
                                 herm_path, deflate=schur_vecs)
        w_basis, _ = np.linalg.qr(np.hstack([schur_vecs, extra]))
        opw = np.column_stack([op(w_basis[:, j]) for j in range(w_basis.shape[1])])
        proj = w_basis.conj().T @ opw
        if herm_path:
            th, y = np.linalg.eigh(0.5 * (proj + proj.conj().T))
            th = th.astype(complex)
        else:
            th, y = np.linalg.eig(proj)
        order = np.argsort(-np.abs(th), kind="stable")[:count]
        new_theta = th[order]
        new_x = w_basis @ y[:, order]
        if theta is not None and _same_set(new_theta, theta, opts.tol):
            theta, x = new_theta, new_x
            break
        theta, x = new_theta, new_x
        schur_vecs, _ = np.linalg.qr(x)
    if theta is None:
        w_basis = schur_vecs
        opw = np.column_stack([op(w_basis[:, j]) for j in range(w_basis.shape[1])])
        proj = w_basis.conj().T @ opw
        th, y = np.linalg.eig(proj)
        order = np.argsort(-np.abs(th), kind="stable")[:count]
        theta, x = th[order], w_basis @ y[:, order]

    values = shift + 1.0 / theta
    if herm_path:
        values = values.real.astype(complex)
    x = _normalize_phase(x)
    values, x = _polish(m, values, x, opts.tol)
    if herm_path:
        values = values.real
    order = np.argsort(values, kind="stable") if herm_path else sort_key(values)
    values, x = values[order], x[:, order]
    res = residual_norms(m, values, x)
    return EigenResult(values, x if opts.want_vectors else None, res,
                       Method.SHIFT_INVERT_ARNOLDI, "builtin", {"shift": shift})


def _same_set(a, b, tol):
    if a.size != b.size:
        return False
    sa, sb = np.sort_complex(a), np.sort_complex(b)
    return bool(np.all(np.abs(sa - sb) <= 1e3 * tol * np.maximum(np.abs(sb), 1e-300)))


def _polish(m, values, vectors, tol):
    """Rayleigh-quotient steps on pairs whose residual is above ``tol``."""
    res = residual_norms(m, values, vectors)
    for i in np.nonzero(res > tol)[0]:
        z, v, r = refine_pair(m, values[i], vectors[:, i])
        values[i], vectors[:, i] = z, v
    return values, vectors


def refine_pair(a, z: complex, v: np.ndarray):
    """One Rayleigh-quotient step on an approximate eigenpair.

    Returns ``(z, v, residual)`` with the residual normalized by ``||A||_F``.
    The step is accepted only when it lowers the residual and the new value
    stays within the old residual radius of ``z``; otherwise the input comes
    back unchanged, so a vector far from any eigenvector is never dragged to
    an unrelated eigenvalue. The input also comes back unchanged when ``z``
    is inconsistent with ``v``: its distance to the Rayleigh quotient exceeds
    the residual that remains at the Rayleigh quotient.
    """
    m, _ = _as_matrix(a)
    n = m.shape[0]
    nrm = _fro(m) or 1.0
    v = np.asarray(v, dtype=complex)
    r0 = float(np.linalg.norm(m @ v - z * v)) / nrm
    if r0 == 0.0:
        return z, v, 0.0
    mv = m @ v
    rho = complex(np.vdot(v, mv) / np.vdot(v, v))
    if abs(z - rho) > np.linalg.norm(mv - rho * v):
        return z, v, r0
    shifted = (sp.csr_matrix(m) - rho * sp.identity(n, format="csr")).tocsc()
    try:
        with np.errstate(all="ignore"):
            w = spla.spsolve(shifted, v)
    except (RuntimeError, ValueError):
        return z, v, r0
    if not np.all(np.isfinite(w)) or np.linalg.norm(w) == 0:
        return z, v, r0
    w = w / np.linalg.norm(w)
    z_new = complex(np.vdot(w, m @ w))
    r1 = float(np.linalg.norm(m @ w - z_new * w)) / nrm
    if r1 < r0 and abs(z_new - z) <= r0 * nrm + 1e-14 * max(abs(z), 1.0):
        return z_new, w, r1
    return z, v, r0


def lowest_hermitian(a, opts: SolveOptions = SolveOptions(), count: int = 1) -> np.ndarray:
    """The ``count`` smallest eigenvalues of a Hermitian operator."""
    m, hermitian = _as_matrix(a)
    if not hermitian:
        raise ValueError("lowest_hermitian needs a Hermitian operator")
    m = sp.csr_matrix(m)
    n = m.shape[0]
    if n <= 200:
        vals = solve_dense(m, opts.with_(want_vectors=False)).values
        return np.real(vals[:count])
    # Gershgorin lower bound keeps the shift strictly below the spectrum.
    diag = m.diagonal().real
    radius = np.asarray(abs(m).sum(axis=1)).ravel() - np.abs(diag)
    shift = float(np.min(diag - radius)) - 1.0
    res = solve_arnoldi(m, opts.with_(shift=shift, want_vectors=False), count=count)
    return np.sort(np.real(res.values))[:count]
