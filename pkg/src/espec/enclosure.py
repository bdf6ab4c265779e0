"""Eigenvalue enclosure regions and the 1D counting/trace/bracketing checks.

Higher-dimensional regions carry a universal constant ``c`` that is only
known to exist; it is an input here (see :func:`calibrate_constant` for an
empirical lower estimate). The 1D regions have explicit constants built
from the pressure speed ``sqrt(lambda + 2 mu)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .eigensolve import SolveOptions, lowest_hermitian
from .errors import (DimensionMismatch, EmptyFamily, HypothesisViolated, InadmissibleGamma,
                     KindMismatch, RootNotBracketed, ZeroMoment)
from .model import DampingField, LameParams, lp_norm, weighted_first_moment
from .pencil import PencilEigenpair, build_pencil, shifted_lame_matrix, shifted_lame_spectrum

# |Im z| below this (relative to max(1, |z|)) counts as a real eigenvalue
REAL_TOL = 1e-9
BOUNDARY_RTOL = 1e-12


class RegionKind(str, enum.Enum):
    DISK_COMPLEMENT_NSA = "DiskComplementNSA"
    REAL_RAY_SA = "RealRayBoundSA"
    HALF_LINE_1D = "HalfLineLowerBound1D"
    DISK_NSA_1D = "DiskNSA1D_Potential"
    DISK_SA_1D = "DiskSA1D_Potential"
    POTENTIAL_DISK_NSA = "PotentialDiskNSA"
    POTENTIAL_DISK_SA = "PotentialDiskSA"
    ABSENCE_1D = "Absence1D"


EXPLICIT_KINDS = frozenset({RegionKind.HALF_LINE_1D, RegionKind.DISK_NSA_1D,
                            RegionKind.DISK_SA_1D, RegionKind.ABSENCE_1D})


def is_real_value(z: complex) -> bool:
    return abs(z.imag) <= REAL_TOL * max(1.0, abs(z))


@dataclass(frozen=True)
class EnclosureRegion:
    """A subset of the complex plane that must contain a family of eigenvalues.

    ``membership(z)`` answers whether ``z`` is allowed. Ray and half-line
    kinds only constrain real eigenvalues of sign ``sign`` and admit every
    other point. ``active=False`` marks a region whose hypotheses fail, which
    then admits everything.
    """

    kind: RegionKind
    constant: float
    norm_value: float
    exponent_gamma: float
    dim: int
    params: LameParams
    sign: int = 0
    active: bool = True
    absent: Optional[bool] = None
    label: str = ""

    @property
    def norm_exponent(self) -> float:
        if self.kind in (RegionKind.DISK_NSA_1D, RegionKind.DISK_SA_1D,
                         RegionKind.ABSENCE_1D, RegionKind.HALF_LINE_1D):
            return 1.0
        return self.exponent_gamma + self.dim / 2.0

    @property
    def rhs(self) -> float:
        """``c * norm ** p``, the right-hand side of the defining inequality."""
        return self.constant * self.norm_value ** self.norm_exponent

    @property
    def z_exponent(self) -> float:
        """Power of ``|z|`` on the left-hand side."""
        k = self.kind
        if k in (RegionKind.DISK_COMPLEMENT_NSA, RegionKind.REAL_RAY_SA):
            return self.exponent_gamma - self.dim / 2.0
        if k in (RegionKind.POTENTIAL_DISK_NSA, RegionKind.POTENTIAL_DISK_SA):
            return self.exponent_gamma
        if k in (RegionKind.DISK_NSA_1D, RegionKind.DISK_SA_1D):
            return 0.5
        if k is RegionKind.HALF_LINE_1D:
            return -1.0
        return 0.0

    @property
    def explicit(self) -> bool:
        return self.kind in EXPLICIT_KINDS

    @property
    def radius(self) -> float:
        """Boundary radius in ``|z|``: a disk radius, an excluded radius, or a ray start.

        ``inf`` means the constrained set is empty (e.g. zero damping for the
        non-self-adjoint exterior region); ``0`` means no constraint on ``|z|``.
        For zero exponents the radius is ``0`` when the inequality holds and
        ``inf`` otherwise.
        """
        e = self.z_exponent
        b = self.rhs
        if self.kind is RegionKind.HALF_LINE_1D:
            return self.constant / self.norm_value if self.norm_value > 0 else math.inf
        if e == 0:
            return 0.0 if b >= 1 else math.inf
        if b == 0:
            return math.inf if e < 0 else 0.0
        log_r = math.log(b) / e
        return math.inf if log_r > 709.0 else math.exp(log_r)

    def _radial_ok(self, r: float, slack: float) -> bool:
        # BOUNDARY_RTOL keeps a pair that defines a calibrated constant on
        # the allowed side despite rounding in the radius
        e = self.z_exponent
        lo = 1.0 - slack - BOUNDARY_RTOL
        if self.kind is RegionKind.HALF_LINE_1D:
            return r >= self.radius * lo
        if e == 0:
            return self.rhs >= lo
        rad = self.radius
        if e < 0:
            return r > 0 and r >= rad * lo
        return r <= rad * (1.0 + slack + BOUNDARY_RTOL)

    def membership(self, z: complex, slack: float = 0.0) -> bool:
        """Whether ``z`` is allowed; ``slack`` widens the allowed radii by that fraction."""
        z = complex(z)
        if not self.active:
            return True
        k = self.kind
        if k in (RegionKind.REAL_RAY_SA, RegionKind.HALF_LINE_1D):
            if not (is_real_value(z) and self.sign * z.real > 0):
                return True
            return self._radial_ok(abs(z.real), slack)
        if k is RegionKind.POTENTIAL_DISK_SA:
            if not (is_real_value(z) and z.real < 0):
                return True
            return self._radial_ok(abs(z.real), slack)
        return self._radial_ok(abs(z), slack)

    def to_dict(self):
        rad = self.radius
        return {
            "kind": self.kind.value,
            "constant": self.constant,
            "norm_value": self.norm_value,
            "gamma": self.exponent_gamma,
            "dim": self.dim,
            "sign": self.sign,
            "active": self.active,
            "explicit": self.explicit,
            "absent": self.absent,
            "radius": rad if math.isfinite(rad) else None,
            "entire_plane_excluded": (not math.isfinite(rad)) and self.kind in (
                RegionKind.DISK_COMPLEMENT_NSA, RegionKind.ABSENCE_1D),
            "label": self.label,
        }


def _gamma_nsa(d: int, gamma: float):
    ok = (0 < gamma <= 0.5) if d == 2 else (0 <= gamma <= 0.5)
    if not ok:
        raise InadmissibleGamma(f"gamma={gamma} is not admissible for d={d} "
                                "(need 0 < gamma <= 1/2 for d=2, 0 <= gamma <= 1/2 for d>=3)")


def _gamma_sa(d: int, gamma: float):
    ok = gamma > 0 if d == 2 else gamma >= 0
    if not ok:
        raise InadmissibleGamma(f"gamma={gamma} is not admissible for d={d} in the self-adjoint case")


def _check_dim(a: DampingField, d: int):
    if d < 2:
        raise DimensionMismatch("higher-dimensional regions need d >= 2")
    if a.grid.dim != d:
        raise DimensionMismatch(f"field lives on a {a.grid.dim}D grid, region requested for d={d}")


def region_damping_nsa(params: LameParams, d: int, gamma: float, a: DampingField,
                       c: float) -> EnclosureRegion:
    """Exterior disk ``|z|^(gamma - d/2) <= c ||a||^(gamma + d/2)`` for arbitrary damping."""
    _gamma_nsa(d, gamma)
    _check_dim(a, d)
    if not c > 0:
        raise ValueError("constant must be positive")
    nv = lp_norm(a, gamma + d / 2.0).value
    return EnclosureRegion(RegionKind.DISK_COMPLEMENT_NSA, float(c), nv, float(gamma), d, params,
                           label="damping, non-self-adjoint")


def region_damping_sa(params: LameParams, d: int, gamma: float, a: DampingField, sign: int,
                      c: float) -> EnclosureRegion:
    """Bound on real eigenvalues of sign ``sign`` for real scalar damping.

    Positive eigenvalues are controlled by the negative part of ``a`` and
    negative ones by the positive part. ``absent`` is the sufficient
    condition ``c ||a_-+||_{L^d}^d < 1`` for having none at all.
    """
    _gamma_sa(d, gamma)
    _check_dim(a, d)
    if not a.is_real:
        raise KindMismatch("self-adjoint damping region needs a ScalarReal field")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    part = a.negative_part() if sign > 0 else a.positive_part()
    nv = lp_norm(part, gamma + d / 2.0).value
    ld = lp_norm(part, float(d)).value
    absent = c * ld ** d < 1
    return EnclosureRegion(RegionKind.REAL_RAY_SA, float(c), nv, float(gamma), d, params, sign,
                           absent=bool(absent),
                           label="damping, self-adjoint, " + ("positive" if sign > 0 else "negative"))


def region_potential(params: LameParams, d: int, gamma: float, v: DampingField,
                     self_adjoint: bool, c: float) -> EnclosureRegion:
    """Disk ``|z|^gamma <= c ||V||^(gamma + d/2)``; the self-adjoint variant uses ``V_-``."""
    _check_dim(v, d)
    if self_adjoint:
        _gamma_sa(d, gamma)
        if not v.is_real:
            raise KindMismatch("self-adjoint potential region needs a ScalarReal field")
        nv = lp_norm(v.negative_part(), gamma + d / 2.0).value
        kind = RegionKind.POTENTIAL_DISK_SA
    else:
        _gamma_nsa(d, gamma)
        nv = lp_norm(v, gamma + d / 2.0).value
        kind = RegionKind.POTENTIAL_DISK_NSA
    return EnclosureRegion(kind, float(c), nv, float(gamma), d, params, label="potential")


def _require_1d(a: DampingField):
    if a.grid.dim != 1:
        raise DimensionMismatch("this bound is one-dimensional")


def region_1d_nsa(params: LameParams, v: DampingField, self_adjoint: bool = False) -> EnclosureRegion:
    """Disk ``|z|^(1/2) <= ||V||_1 / (2 sqrt(lambda + 2 mu))`` for the 1D potential problem."""
    _require_1d(v)
    c = 1.0 / (2.0 * math.sqrt(params.p_speed_sq))
    if self_adjoint:
        if not v.is_real:
            raise KindMismatch("self-adjoint variant needs a ScalarReal potential")
        nv = lp_norm(v.negative_part(), 1.0).value
        kind = RegionKind.DISK_SA_1D
    else:
        nv = lp_norm(v, 1.0).value
        kind = RegionKind.DISK_NSA_1D
    return EnclosureRegion(kind, c, nv, 0.5, 1, params, label="1D potential")


def damping_absence_1d(params: LameParams, a: DampingField) -> bool:
    """True when ``||a||_1 < 2 sqrt(lambda + 2 mu)``, i.e. no eigenvalues are possible."""
    _require_1d(a)
    return lp_norm(a, 1.0).value < 2.0 * math.sqrt(params.p_speed_sq)


def region_absence_1d(params: LameParams, a: DampingField) -> EnclosureRegion:
    """Whole plane if ``||a||_1 >= 2 sqrt(lambda + 2 mu)``, empty otherwise."""
    _require_1d(a)
    c = 1.0 / (2.0 * math.sqrt(params.p_speed_sq))
    return EnclosureRegion(RegionKind.ABSENCE_1D, c, lp_norm(a, 1.0).value, 0.0, 1, params,
                           absent=damping_absence_1d(params, a), label="1D damping threshold")


def sharpness_ratio_1d(params: LameParams, v: DampingField, z: complex) -> float:
    """``2 sqrt(lambda + 2 mu) |z|^(1/2) / ||V||_1``; equals 1 on the disk boundary."""
    return 2.0 * math.sqrt(params.p_speed_sq) * math.sqrt(abs(z)) / lp_norm(v, 1.0).value


def _require_real_1d(a: DampingField):
    _require_1d(a)
    if not a.is_real:
        raise KindMismatch("this bound needs a ScalarReal damping")


def trace_lower_bound(params: LameParams, z: float, a: DampingField) -> float:
    """Right side ``-z / (4 sqrt(lambda + 2 mu)) * int a`` of the trace inequality."""
    _require_real_1d(a)
    return -float(z) / (4.0 * math.sqrt(params.p_speed_sq)) * a.integral()


def negative_eigenvalues(params: LameParams, a: DampingField, z: float,
                         opts: SolveOptions = SolveOptions()) -> np.ndarray:
    """Negative eigenvalues of the discrete ``-Lame + z a`` (Dirichlet box).

    Dirichlet truncation only raises eigenvalues and the free discrete
    operator is positive, so every negative value belongs to a bound state.
    """
    p = build_pencil(params, a.grid, a)
    res = shifted_lame_spectrum(p, float(z), opts.with_(want_vectors=False))
    vals = np.real(res.values)
    return np.sort(vals[vals < 0])


def trace_sum(params: LameParams, a: DampingField, z: float,
              opts: SolveOptions = SolveOptions()) -> float:
    """``sum_n |lambda_n(z a)|^(1/2)`` over the negative discrete eigenvalues."""
    _require_real_1d(a)
    return float(np.sum(np.sqrt(-negative_eigenvalues(params, a, z, opts))))


@dataclass(frozen=True)
class CountBound:
    limit: float
    observed: int

    @property
    def holds(self) -> bool:
        return self.observed <= self.limit

    def to_dict(self):
        return {"limit": self.limit, "observed": self.observed}


def bargmann_count_bound(params: LameParams, z: float, a: DampingField,
                         opts: SolveOptions = SolveOptions()) -> CountBound:
    """``N <= 1 + |z| / (lambda + 2 mu) * int |x| |a|`` with the observed discrete count."""
    _require_1d(a)
    moment = weighted_first_moment(a)
    limit = 1.0 + abs(float(z)) * moment / params.p_speed_sq
    if not a.is_real:
        raise KindMismatch("eigenvalue count needs a ScalarReal damping")
    observed = int(negative_eigenvalues(params, a, z, opts).size)
    return CountBound(limit, observed)


def sa_lower_bound_1d(params: LameParams, a: DampingField) -> float:
    """``(lambda + 2 mu) / int |x| |a|``."""
    _require_real_1d(a)
    m = weighted_first_moment(a)
    if m == 0:
        raise ZeroMoment("weighted first moment of the damping vanishes")
    return params.p_speed_sq / m


def sa_lower_hypothesis(params: LameParams, a: DampingField, sign: int) -> bool:
    """``int a < -4 sqrt(lambda + 2 mu)`` for ``sign=+1``; ``> +4 sqrt(...)`` for ``sign=-1``."""
    _require_real_1d(a)
    thr = 4.0 * math.sqrt(params.p_speed_sq)
    total = a.integral()
    return total < -thr if sign > 0 else total > thr


def region_sa_lower_1d(params: LameParams, a: DampingField, sign: int) -> EnclosureRegion:
    """Half line ``sign * z >= (lambda + 2 mu) / int |x||a|``, active only under its hypothesis."""
    m = weighted_first_moment(a)
    if m == 0:
        raise ZeroMoment("weighted first moment of the damping vanishes")
    return EnclosureRegion(RegionKind.HALF_LINE_1D, params.p_speed_sq, m, 0.0, 1, params, sign,
                           active=sa_lower_hypothesis(params, a, sign),
                           label="1D self-adjoint lower bound")


@dataclass(frozen=True)
class AlphaBracket:
    lower: float
    upper: float
    solution: Optional[float] = None
    s_star: Optional[float] = None
    g_value: Optional[float] = None
    sign_changes: int = 0
    s_range: Tuple[float, float] = (0.0, 0.0)

    def to_dict(self):
        return {"lower": self.lower, "upper": self.upper, "solution": self.solution,
                "s_star": self.s_star, "g_value": self.g_value,
                "sign_changes": self.sign_changes, "s_range": list(self.s_range)}


def alpha_bracket(a: DampingField, z: float) -> Tuple[float, float]:
    """``[2 / int a_-, -4 / int a]`` for ``z > 0``; ``[2 / int a_+, 4 / int a]`` for ``z < 0``."""
    total = a.integral()
    if z > 0:
        neg = a.negative_part().integral()
        return 2.0 / neg, -4.0 / total
    pos = a.positive_part().integral()
    return 2.0 / pos, 4.0 / total


def pencil_gap(params: LameParams, a: DampingField, s: float,
               opts: SolveOptions = SolveOptions()) -> float:
    """``lambda_1(s a) + s^2``; it vanishes exactly when ``s`` is a real pencil eigenvalue
    carried by the ground state of ``-Lame + s a``."""
    p = build_pencil(params, a.grid, a)
    return float(lowest_hermitian(shifted_lame_matrix(p, float(s)), opts)[0]) + s * s


def alpha_bracket_and_solve(params: LameParams, a: DampingField, z: float,
                            opts: SolveOptions = SolveOptions(), scan_points: int = 64,
                            s_tol: float = 1e-8) -> AlphaBracket:
    """Bracket ``alpha`` and locate ``s = z / alpha`` with ``lambda_1(s a) = -s^2``.

    ``g(s) = lambda_1(s a) + s^2`` is scanned on ``scan_points`` points of the
    mapped bracket, then bisected to ``s_tol`` on the first sign change.
    """
    _require_real_1d(a)
    z = float(z)
    if z == 0:
        raise HypothesisViolated("z must be non-zero")
    moment = weighted_first_moment(a)
    if moment == 0:
        raise ZeroMoment("weighted first moment of the damping vanishes")
    if not abs(z) < params.p_speed_sq / moment:
        raise HypothesisViolated(f"|z|={abs(z)} is not below (lambda+2mu)/int|x||a| = "
                                 f"{params.p_speed_sq / moment}")
    total = a.integral()
    if not ((z > 0 and total < 0) or (z < 0 and total > 0)):
        raise HypothesisViolated("need z > 0 with int a < 0, or z < 0 with int a > 0")
    lower, upper = alpha_bracket(a, z)
    s_lo, s_hi = sorted((z / upper, z / lower))
    p = build_pencil(params, a.grid, a)

    def g(s):
        return float(lowest_hermitian(shifted_lame_matrix(p, s), opts)[0]) + s * s

    grid_s = np.linspace(s_lo, s_hi, scan_points)
    vals = np.array([g(s) for s in grid_s])
    signs = np.sign(vals)
    changes = np.nonzero(signs[:-1] * signs[1:] <= 0)[0]
    # a zero landing on a scan node would be counted twice
    n_changes = int(np.sum(signs[:-1] * signs[1:] < 0) + np.sum(signs == 0))
    if changes.size == 0:
        raise RootNotBracketed(f"g has no sign change on s in [{s_lo}, {s_hi}]")
    i = int(changes[0])
    left, right = grid_s[i], grid_s[i + 1]
    g_left = vals[i]
    if g_left == 0:
        right = left
    while right - left > s_tol:
        mid = 0.5 * (left + right)
        g_mid = g(mid)
        if np.sign(g_mid) == np.sign(g_left):
            left, g_left = mid, g_mid
        else:
            right = mid
    s_star = 0.5 * (left + right)
    return AlphaBracket(float(lower), float(upper), float(z / s_star), float(s_star), g(s_star),
                        n_changes, (float(s_lo), float(s_hi)))


def calibrate_constant(family: Sequence[Tuple[DampingField, Iterable[PencilEigenpair]]],
                       gamma: float, d: int) -> float:
    """Largest ``|z|^(gamma - d/2) / ||a||^(gamma + d/2)`` over converged pairs.

    This is an empirical lower estimate of the smallest constant that makes
    the damping region valid on the given family.
    """
    family = list(family)
    if not family:
        raise EmptyFamily("calibration family is empty")
    p = gamma + d / 2.0
    best = 0.0
    for a, pairs in family:
        nv = lp_norm(a, p).value ** p
        for pr in pairs:
            if not pr.converged or pr.z == 0:
                continue
            if nv == 0:
                return math.inf
            best = max(best, abs(pr.z) ** (gamma - d / 2.0) / nv)
    return best


@dataclass
class VerificationReport:
    region: EnclosureRegion
    inside: List[PencilEigenpair] = field(default_factory=list)
    outside: List[PencilEigenpair] = field(default_factory=list)
    records: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(r["status"] == "FAIL" for r in self.records)


def verify_spectrum(region: EnclosureRegion, pairs: Iterable[PencilEigenpair],
                    slack: float = 0.0) -> VerificationReport:
    """Split converged pairs into inside/outside ``region``.

    Pairs outside an explicit-constant region are FAIL records; regions with
    calibrated constants only produce INFO records.
    """
    rep = VerificationReport(region)
    for pr in pairs:
        if not pr.converged:
            continue
        (rep.inside if region.membership(pr.z, slack) else rep.outside).append(pr)
    name = f"region:{region.kind.value}" + (f":{region.label}" if region.label else "")
    if rep.outside:
        status = "FAIL" if region.explicit else "INFO"
        for pr in rep.outside:
            rep.records.append({"name": name, "status": status,
                                "detail": f"z={pr.z!r} outside (radius {region.radius!r})"})
    else:
        rep.records.append({"name": name, "status": "PASS" if region.explicit else "INFO",
                            "detail": f"{len(rep.inside)} converged pairs inside"})
    return rep
