"""Material parameters, grids, damping fields and the norms the bounds consume."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Mapping, Optional, Union

import numpy as np

from .errors import DimensionMismatch, EllipticityViolation, KindMismatch, SpecOutOfDomain


@dataclass(frozen=True)
class LameParams:
    """Lamé constants ``mu`` (shear modulus) and ``lam`` (first parameter)."""

    mu: float
    lam: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.lam)):
            raise EllipticityViolation(f"non-finite Lamé parameters mu={self.mu}, lambda={self.lam}")
        if self.mu <= 0:
            raise EllipticityViolation(f"mu must be positive, got {self.mu}")
        if self.lam + self.mu < 0:
            raise EllipticityViolation(f"lambda + mu must be non-negative, got {self.lam + self.mu}")

    @property
    def p_speed_sq(self) -> float:
        """Squared pressure-wave speed ``lambda + 2 mu``."""
        return self.lam + 2.0 * self.mu

    @property
    def s_speed_sq(self) -> float:
        return self.mu

    def to_dict(self):
        return {"mu": self.mu, "lambda": self.lam}


def make_params(mu: float, lam: float) -> LameParams:
    return LameParams(float(mu), float(lam))


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid of interior nodes on the Dirichlet box ``[-L, L]^d``.

    Node ``k`` on each axis sits at ``-L + (k + 1) h`` with ``h = 2L / (n + 1)``.
    Nodes are ordered lexicographically with the first axis slowest.
    """

    dim: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise DimensionMismatch(f"dim must be 1, 2 or 3, got {self.dim}")
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        if self.points_per_axis < 3:
            raise ValueError(f"points_per_axis must be >= 3, got {self.points_per_axis}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points_per_axis + 1)

    @property
    def num_nodes(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def axis(self) -> np.ndarray:
        n = self.points_per_axis
        return -self.half_width + (np.arange(n) + 1) * self.spacing

    @cached_property
    def nodes(self) -> np.ndarray:
        """(num_nodes, dim) array of node coordinates."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def refined(self) -> "Grid":
        """Same box, spacing halved."""
        return Grid(self.dim, self.half_width, 2 * (self.points_per_axis + 1) - 1)

    def doubled(self) -> "Grid":
        """Box half-width doubled at fixed spacing."""
        return Grid(self.dim, 2.0 * self.half_width, 2 * (self.points_per_axis + 1) - 1)

    def scaled(self, s: float) -> "Grid":
        """Box shrunk by ``s`` with the same node count (pairs with ``a(x) -> s a(s x)``)."""
        return Grid(self.dim, self.half_width / s, self.points_per_axis)

    def to_dict(self):
        return {"dim": self.dim, "half_width": self.half_width, "points_per_axis": self.points_per_axis}


class FieldKind(str, enum.Enum):
    SCALAR_REAL = "ScalarReal"
    SCALAR_COMPLEX = "ScalarComplex"
    MATRIX_COMPLEX = "MatrixComplex"


@dataclass(frozen=True, eq=False)
class DampingField:
    """Nodewise samples of a damping coefficient (or potential) on a grid.

    ``samples`` has shape ``(num_nodes,)`` for scalar kinds and
    ``(num_nodes, d, d)`` for ``MatrixComplex``.
    """

    grid: Grid
    kind: FieldKind
    samples: np.ndarray
    spec: Optional[Mapping[str, Any]] = field(default=None, compare=False)

    def __post_init__(self):
        s = np.asarray(self.samples)
        n = self.grid.num_nodes
        if self.kind is FieldKind.MATRIX_COMPLEX:
            d = self.grid.dim
            if s.shape != (n, d, d):
                raise ValueError(f"matrix field needs shape {(n, d, d)}, got {s.shape}")
            s = s.astype(complex)
        else:
            if s.shape != (n,):
                raise ValueError(f"scalar field needs {n} samples, got shape {s.shape}")
            if self.kind is FieldKind.SCALAR_REAL:
                if np.iscomplexobj(s):
                    if np.any(s.imag != 0):
                        raise KindMismatch("ScalarReal field with non-zero imaginary part")
                    s = s.real
                s = s.astype(float)
            else:
                s = s.astype(complex)
        if not np.all(np.isfinite(s)):
            raise SpecOutOfDomain("field samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def is_real(self) -> bool:
        return self.kind is FieldKind.SCALAR_REAL

    def _require_real(self, what):
        if not self.is_real:
            raise KindMismatch(f"{what} is only defined for ScalarReal fields, got {self.kind.value}")

    def positive_part(self) -> "DampingField":
        self._require_real("positive_part")
        return DampingField(self.grid, self.kind, np.maximum(self.samples, 0.0))

    def negative_part(self) -> "DampingField":
        self._require_real("negative_part")
        return DampingField(self.grid, self.kind, np.maximum(-self.samples, 0.0))

    def scaled(self, c: complex) -> "DampingField":
        kind = self.kind
        if kind is FieldKind.SCALAR_REAL and complex(c).imag != 0:
            kind = FieldKind.SCALAR_COMPLEX
        values = self.samples * (c if kind is not FieldKind.SCALAR_REAL else float(np.real(c)))
        return DampingField(self.grid, kind, values)

    def pointwise_abs(self) -> np.ndarray:
        """|a(x_k)|: modulus for scalars, spectral norm for matrices."""
        if self.kind is FieldKind.MATRIX_COMPLEX:
            return np.linalg.norm(self.samples, ord=2, axis=(1, 2))
        return np.abs(self.samples)

    def integral(self) -> complex:
        """Midpoint quadrature of a scalar field."""
        if self.kind is FieldKind.MATRIX_COMPLEX:
            raise KindMismatch("integral is defined for scalar fields only")
        total = self.samples.sum() * self.grid.cell_volume
        return float(total) if self.is_real else complex(total)

    def sup_norm(self) -> float:
        return float(self.pointwise_abs().max(initial=0.0))


# ---------------------------------------------------------------------------
# field specifications


def parse_complex(value, name="value") -> complex:
    """Accept a number, a ``[re, im]`` pair or a ``{"re": .., "im": ..}`` mapping."""
    if isinstance(value, Mapping):
        c = complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    elif isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise SpecOutOfDomain(f"{name}: complex pair must have 2 entries")
        c = complex(float(value[0]), float(value[1]))
    else:
        try:
            c = complex(value)
        except (TypeError, ValueError) as exc:
            raise SpecOutOfDomain(f"{name}: not a number: {value!r}") from exc
    if not (math.isfinite(c.real) and math.isfinite(c.imag)):
        raise SpecOutOfDomain(f"{name}: non-finite value {value!r}")
    return c


def _is_complex_literal(value) -> bool:
    if isinstance(value, Mapping):
        return True
    if isinstance(value, (list, tuple)):
        return True
    return isinstance(value, complex)


def _finite(value, name) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise SpecOutOfDomain(f"{name}: not a number: {value!r}") from exc
    if not math.isfinite(v):
        raise SpecOutOfDomain(f"{name}: non-finite value {value!r}")
    return v


def _center(spec, dim) -> np.ndarray:
    c = spec.get("center", 0.0)
    if isinstance(c, (list, tuple)):
        if len(c) != dim:
            raise SpecOutOfDomain(f"center has {len(c)} entries, grid has dim {dim}")
        return np.array([_finite(v, "center") for v in c])
    return np.full(dim, _finite(c, "center"))


def _matrix(spec, dim) -> Optional[np.ndarray]:
    m = spec.get("matrix")
    if m is None:
        return None
    if isinstance(m, Mapping):
        re = np.asarray(m.get("real", np.zeros((dim, dim))), dtype=float)
        im = np.asarray(m.get("imag", np.zeros((dim, dim))), dtype=float)
        mat = re + 1j * im
    else:
        mat = np.asarray(m, dtype=complex)
    if mat.shape != (dim, dim):
        raise SpecOutOfDomain(f"matrix must be {dim}x{dim}, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise SpecOutOfDomain("matrix entries must be finite")
    return mat


def _profile(grid: Grid, spec: Mapping[str, Any]):
    """Return (values, complex_declared) for one named spec."""
    kind = spec.get("type")
    x = grid.nodes
    d = grid.dim
    if kind == "constant":
        raw = spec.get("value", spec.get("amplitude"))
        if raw is None:
            raise SpecOutOfDomain("constant field needs 'value'")
        c = parse_complex(raw, "value")
        return np.full(grid.num_nodes, c), _is_complex_literal(raw)
    if kind == "table":
        re = np.asarray(spec.get("real", spec.get("values")), dtype=float)
        im = np.asarray(spec.get("imag", np.zeros_like(re)), dtype=float)
        if re.shape[0] != grid.num_nodes or re.shape != im.shape:
            raise SpecOutOfDomain(f"table needs {grid.num_nodes} entries per part")
        if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
            raise SpecOutOfDomain("table entries must be finite")
        return re + 1j * im, "imag" in spec
    if kind == "sum":
        terms = spec.get("terms") or []
        if not terms:
            raise SpecOutOfDomain("sum field needs at least one term")
        vals, cplx = None, False
        for t in terms:
            v, c = _profile_with_matrix(grid, t)
            vals = v if vals is None else vals + v
            cplx = cplx or c
        return vals, cplx

    raw = spec.get("amplitude", 1.0)
    amp = parse_complex(raw, "amplitude")
    x0 = _center(spec, d)
    if kind == "box":
        b = _finite(spec.get("half_width", 1.0), "half_width")
        if b <= 0:
            raise SpecOutOfDomain("box half_width must be positive")
        # a node on the edge takes the mean of the two one-sided values, which
        # keeps quadrature and spectra second order in h across the jump
        r = np.abs(x - x0)
        edge = np.abs(r - b) <= 1e-12 * max(b, 1.0)
        factor = np.where(edge, 0.5, (r < b).astype(float))
        prof = np.prod(factor, axis=1)
    elif kind == "gaussian":
        w = _finite(spec.get("width", 1.0), "width")
        if w <= 0:
            raise SpecOutOfDomain("gaussian width must be positive")
        r2 = np.sum((x - x0) ** 2, axis=1)
        prof = np.exp(-r2 / (2 * w * w))
        if spec.get("normalized", False):
            prof = prof / (math.sqrt(2 * math.pi) * w) ** d
    elif kind == "exponential":
        k = _finite(spec.get("rate", 1.0), "rate")
        if k <= 0:
            raise SpecOutOfDomain("exponential rate must be positive")
        r = np.sqrt(np.sum((x - x0) ** 2, axis=1))
        prof = np.exp(-k * r)
    else:
        raise SpecOutOfDomain(f"unknown field type {kind!r}")
    return amp * prof, _is_complex_literal(raw)


def _profile_with_matrix(grid, spec):
    vals, cplx = _profile(grid, spec)
    mat = _matrix(spec, grid.dim)
    if mat is not None:
        if vals.ndim == 1:
            vals = vals[:, None, None] * mat[None, :, :]
        else:
            vals = vals @ mat
    return vals, cplx


FieldSpec = Union[Mapping[str, Any], Callable[[np.ndarray], np.ndarray]]


def sample_field(grid: Grid, spec: FieldSpec) -> DampingField:
    """Evaluate a field specification at the grid nodes.

    ``spec`` is either a mapping from the named library (``constant``, ``box``,
    ``gaussian``, ``exponential``, ``table``, ``sum``; optional ``matrix`` to
    make it matrix-valued) or a callable taking the ``(num_nodes, dim)`` node
    array. The kind is real unless the spec declares a complex amplitude or
    the samples carry an imaginary part; an explicit ``kind`` key overrides.
    """
    if callable(spec):
        vals = np.asarray(spec(grid.nodes))
        declared = bool(np.iscomplexobj(vals))
        spec_map = None
    else:
        vals, declared = _profile_with_matrix(grid, spec)
        spec_map = dict(spec)
    vals = np.asarray(vals)
    if not np.all(np.isfinite(vals)):
        raise SpecOutOfDomain("field evaluates to non-finite values")
    if vals.ndim == 3:
        kind = FieldKind.MATRIX_COMPLEX
    elif declared or (np.iscomplexobj(vals) and np.any(vals.imag != 0)):
        kind = FieldKind.SCALAR_COMPLEX
    else:
        kind = FieldKind.SCALAR_REAL
        vals = np.real(vals)
    if spec_map is not None and "kind" in spec_map:
        kind = FieldKind(spec_map["kind"])
    return DampingField(grid, kind, vals, spec_map)


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class NormReport:
    p: float
    value: float
    weighted_first_moment: Optional[float]
    kind_used: str

    @property
    def value_pow(self) -> float:
        """``value ** p``, the quantity appearing on the right of the bounds."""
        return self.value ** self.p

    def to_dict(self):
        return {"p": self.p, "value": self.value,
                "weighted_first_moment": self.weighted_first_moment, "kind_used": self.kind_used}


def lp_norm(a: DampingField, p: float, with_moment: bool = False) -> NormReport:
    """Midpoint-rule ``L^p`` norm; matrices use the pointwise spectral norm."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    mags = a.pointwise_abs()
    value = float((np.sum(mags ** p) * a.grid.cell_volume) ** (1.0 / p))
    kind_used = "spectral" if a.kind is FieldKind.MATRIX_COMPLEX else "abs"
    moment = weighted_first_moment(a) if with_moment else None
    return NormReport(float(p), value, moment, kind_used)


def weighted_first_moment(a: DampingField) -> float:
    """Quadrature of ``|x| |a(x)|`` over a 1D grid."""
    if a.grid.dim != 1:
        raise DimensionMismatch("weighted_first_moment is defined for 1D grids only")
    x = a.grid.nodes[:, 0]
    return float(np.sum(np.abs(x) * a.pointwise_abs()) * a.grid.spacing)
