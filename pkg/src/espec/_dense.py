"""Reference dense eigensolvers written out in numpy.

These mirror what LAPACK does (balance, Hessenberg, shifted QR; tridiagonal
QL for Hermitian input) at Python speed, so they are used for moderate sizes
and for cross-checking the library path.
"""

import math

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NoConvergence

_EPS = np.finfo(float).eps


def balance(a):
    """Diagonal similarity ``B = D^-1 A D`` with power-of-two entries of ``D``.

    Returns ``(B, d)``; eigenvectors of ``A`` are ``d[:, None] * eigvecs(B)``.
    """
    b = np.array(a, dtype=complex)
    n = b.shape[0]
    d = np.ones(n)
    radix, radix2 = 2.0, 4.0
    done = False
    sweeps = 0
    while not done and sweeps < 100:
        done = True
        sweeps += 1
        for i in range(n):
            c = np.sum(np.abs(b[:, i])) - abs(b[i, i])
            r = np.sum(np.abs(b[i, :])) - abs(b[i, i])
            if c == 0.0 or r == 0.0:
                continue
            s = c + r
            f = 1.0
            g = r / radix
            while c < g:
                f *= radix
                c *= radix2
            g = r * radix
            while c >= g:
                f /= radix
                c /= radix2
            if (c + r) / f < 0.95 * s:
                done = False
                d[i] *= f
                b[i, :] /= f
                b[:, i] *= f
    return b, d


def hessenberg(a, want_q=True):
    """Householder reduction ``A = Q H Q^H`` with ``H`` upper Hessenberg."""
    h = np.array(a, dtype=complex)
    n = h.shape[0]
    q = np.eye(n, dtype=complex) if want_q else None
    for k in range(n - 2):
        x = h[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        h[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ h[k + 1:, k:])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v.conj())
        h[k + 2:, k] = 0.0
        if want_q:
            q[:, k + 1:] -= 2.0 * np.outer(q[:, k + 1:] @ v, v.conj())
    return h, q


def _givens(x, y):
    """Unitary ``[[c, s], [-conj(s), c]]`` sending ``(x, y)`` to ``(r, 0)``."""
    if y == 0:
        return 1.0, 0.0
    if x == 0:
        return 0.0, np.conj(y) / abs(y)
    ax = abs(x)
    nrm = math.hypot(ax, abs(y))
    alpha = x / ax
    return ax / nrm, alpha * np.conj(y) / nrm


def schur_qr(h, q=None, max_iter=100):
    """Complex Schur form of a Hessenberg matrix by implicit single-shift QR.

    Wilkinson shifts, with an exceptional shift every tenth iteration on the
    same eigenvalue. ``h`` and ``q`` are modified in place and returned.
    """
    n = h.shape[0]
    hi = n - 1
    its = 0
    norm_h = np.linalg.norm(h)
    while hi > 0:
        l = hi
        while l > 0:
            scale = abs(h[l, l]) + abs(h[l - 1, l - 1])
            if scale == 0.0:
                scale = norm_h
            if abs(h[l, l - 1]) <= _EPS * scale:
                h[l, l - 1] = 0.0
                break
            l -= 1
        if l == hi:
            hi -= 1
            its = 0
            continue
        its += 1
        if its > max_iter:
            raise NoConvergence(hi)
        if its % 10 == 0:
            sub = h[hi, hi - 1]
            mu = h[hi, hi] + 0.75 * (abs(sub.real) + abs(sub.imag))
        else:
            a, b = h[hi - 1, hi - 1], h[hi - 1, hi]
            c, d = h[hi, hi - 1], h[hi, hi]
            half = 0.5 * (a - d)
            disc = np.sqrt(half * half + b * c)
            m1, m2 = d + half + disc, d + half - disc
            mu = m1 if abs(m1 - d) < abs(m2 - d) else m2
        x = h[l, l] - mu
        y = h[l + 1, l]
        for k in range(l, hi):
            c, s = _givens(x, y)
            g = np.array([[c, s], [-np.conj(s), c]])
            j0 = k - 1 if k > l else l
            h[k:k + 2, j0:] = g @ h[k:k + 2, j0:]
            if k > l:
                h[k + 1, k - 1] = 0.0
            top = min(k + 3, hi + 1)
            gh = g.conj().T
            h[:top, k:k + 2] = h[:top, k:k + 2] @ gh
            if q is not None:
                q[:, k:k + 2] = q[:, k:k + 2] @ gh
            if k < hi - 1:
                x = h[k + 1, k]
                y = h[k + 2, k]
    return h, q


def triangular_eigvecs(t):
    """Eigenvectors of an upper-triangular matrix by back substitution."""
    n = t.shape[0]
    y = np.zeros((n, n), dtype=complex)
    small = max(_EPS * np.linalg.norm(t), np.finfo(float).tiny)
    for k in range(n):
        y[k, k] = 1.0
        if k == 0:
            continue
        m = t[:k, :k] - t[k, k] * np.eye(k)
        diag = np.diagonal(m).copy()
        tiny = np.abs(diag) < small
        if np.any(tiny):
            m[np.arange(k)[tiny], np.arange(k)[tiny]] = small
        y[:k, k] = solve_triangular(m, -t[:k, k], lower=False)
    return y


def eig_general(a, want_vectors=True, max_iter=100):
    """All eigenvalues (and unit eigenvectors) of a general square matrix."""
    a = np.asarray(a)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0, complex), np.zeros((0, 0), complex)
    if n == 1:
        return np.array([complex(a[0, 0])]), np.ones((1, 1), complex)
    b, d = balance(a)
    h, q = hessenberg(b, want_q=want_vectors)
    t, q = schur_qr(h, q, max_iter=max_iter)
    values = np.diagonal(t).copy()
    if not want_vectors:
        return values, None
    vecs = d[:, None] * (q @ triangular_eigvecs(np.triu(t)))
    vecs /= np.linalg.norm(vecs, axis=0)
    return values, vecs


def tridiagonalize(a, want_q=True):
    """Hermitian ``A = Q T Q^H`` with ``T`` real symmetric tridiagonal.

    Returns ``(diag, offdiag, Q)``; the phases that make the off-diagonal
    real and non-negative are folded into ``Q``.
    """
    h, q = hessenberg(a, want_q=want_q)
    n = h.shape[0]
    diag = np.real(np.diagonal(h)).copy()
    sub = np.diagonal(h, -1).copy()
    off = np.abs(sub)
    if want_q:
        phase = np.ones(n, dtype=complex)
        for k in range(n - 1):
            phase[k + 1] = phase[k] * (sub[k] / off[k] if off[k] != 0 else 1.0)
        q = q * phase[None, :]
    return diag, off, q


def tridiagonal_ql(diag, off, z=None, max_iter=100):
    """Implicit QL with Wilkinson-type shifts on a symmetric tridiagonal matrix.

    ``off[i]`` couples rows ``i`` and ``i + 1``. Rotations are accumulated into
    the columns of ``z`` when given. Returns ``(eigenvalues, z)`` unsorted.
    """
    d = np.array(diag, dtype=float)
    n = d.size
    e = np.zeros(n)
    e[:n - 1] = off
    for l in range(n):
        its = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            its += 1
            if its > max_iter:
                raise NoConvergence(l)
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    f_col = z[:, i + 1].copy()
                    z[:, i + 1] = s * z[:, i] + c * f_col
                    z[:, i] = c * z[:, i] - s * f_col
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, z


def eig_hermitian(a, want_vectors=True, max_iter=100):
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix."""
    a = np.asarray(a)
    n = a.shape[0]
    if n == 1:
        return np.array([float(np.real(a[0, 0]))]), np.ones((1, 1), complex)
    diag, off, q = tridiagonalize(a, want_q=want_vectors)
    values, z = tridiagonal_ql(diag, off, q, max_iter=max_iter)
    order = np.argsort(values, kind="stable")
    values = values[order]
    if not want_vectors:
        return values, None
    return values, z[:, order]
