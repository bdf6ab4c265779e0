import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from espec.enclosure import (AlphaBracket, CountBound, EnclosureRegion, RegionKind,
                             alpha_bracket, alpha_bracket_and_solve, bargmann_count_bound,
                             calibrate_constant, damping_absence_1d, negative_eigenvalues,
                             region_1d_nsa, region_absence_1d, region_damping_nsa,
                             region_damping_sa, region_potential, region_sa_lower_1d,
                             sa_lower_bound_1d, sa_lower_hypothesis, trace_lower_bound, trace_sum,
                             verify_spectrum)
from espec.errors import (DimensionMismatch, EmptyFamily, HypothesisViolated, InadmissibleGamma,
                          KindMismatch, RootNotBracketed, ZeroMoment)
from espec.model import DampingField, FieldKind, Grid, make_params, sample_field
from espec.pencil import PencilEigenpair, build_pencil, pencil_spectrum

P10 = make_params(1, 0)
P_UNIT = make_params(0.5, 0)  # lambda + 2 mu = 1
# +-1, +-0.5, +-2 are all nodes of this grid (h = 0.02)
LINE = Grid(1, 4.0, 399)


def box(g=1.0, b=1.0, grid=LINE, center=0.0):
    return sample_field(grid, {"type": "box", "amplitude": g, "half_width": b, "center": center})


def region(kind, c, nv, gamma, d, sign=0):
    return EnclosureRegion(kind, c, nv, gamma, d, P10, sign)


def pair(z, converged=True):
    return PencilEigenpair(complex(z), 0.0, 0.0, converged)


def constant_field(grid, norm_p_power, p):
    # constant samples whose L^p norm to the power p is norm_p_power
    n = grid.num_nodes
    value = (norm_p_power / (n * grid.cell_volume)) ** (1.0 / p)
    return DampingField(grid, FieldKind.SCALAR_REAL, np.full(n, value))


class TestDampingNSA:
    def test_unit_inputs(self):
        r = region(RegionKind.DISK_COMPLEMENT_NSA, 1.0, 1.0, 0.5, 3)
        assert r.radius == 1.0
        assert r.membership(1.5) and r.membership(1.0) and not r.membership(0.9)

    def test_zero_damping_excludes_everything(self):
        g = Grid(2, 1.0, 5)
        r = region_damping_nsa(P10, 2, 0.5, sample_field(g, {"type": "constant", "value": 0}), 1.0)
        assert math.isinf(r.radius)
        assert not any(r.membership(z) for z in (1e-3, 1j, 1e6, -5 + 5j))
        assert r.to_dict()["entire_plane_excluded"]

    def test_arithmetic(self):
        # |z|^(-1/2) <= 2 * 4 = 8
        r = region(RegionKind.DISK_COMPLEMENT_NSA, 2.0, 4.0 ** (1 / 1.5), 0.5, 2)
        assert r.radius == pytest.approx(1 / 64, rel=1e-12)

    def test_from_field_norm(self):
        g = Grid(2, 1.0, 9)
        a = constant_field(g, 4.0, 1.5)
        r = region_damping_nsa(P10, 2, 0.5, a, 2.0)
        assert r.radius == pytest.approx(1 / 64, rel=1e-10)

    @pytest.mark.parametrize("d,gamma", [(2, 1.0), (2, 0.0), (3, 1.5), (3, -0.1), (2, 0.6)])
    def test_inadmissible_gamma(self, d, gamma):
        g = Grid(d, 1.0, 3)
        with pytest.raises(InadmissibleGamma):
            region_damping_nsa(P10, d, gamma, sample_field(g, {"type": "constant", "value": 1}), 1.0)

    def test_one_dimension_rejected(self):
        with pytest.raises(DimensionMismatch):
            region_damping_nsa(P10, 1, 0.5, box(), 1.0)


class TestDampingSA:
    def test_nonnegative_damping_no_positive_eigenvalues(self):
        g = Grid(2, 2.0, 9)
        a = sample_field(g, {"type": "gaussian", "amplitude": 3, "width": 0.5})
        r = region_damping_sa(P10, 2, 0.5, a, +1, 1.0)
        assert not any(r.membership(z) for z in (1e-6, 0.5, 10.0, 1e8))
        assert r.membership(-1.0) and r.membership(1j)

    def test_absence_predicate_at_gamma_d_over_2(self):
        g = Grid(2, 1.0, 9)
        a = constant_field(g, 0.5, 2.0)
        a = DampingField(g, a.kind, -a.samples)
        assert region_damping_sa(P10, 2, 1.0, a, +1, 1.0).absent
        assert not region_damping_sa(P10, 2, 1.0, a, +1, 2.5).absent

    def test_ray_arithmetic(self):
        # z^(-1) <= 4
        r = region(RegionKind.REAL_RAY_SA, 1.0, 2.0, 0.5, 3, sign=1)
        assert r.radius == pytest.approx(0.25)
        assert r.membership(0.25) and not r.membership(0.24) and r.membership(-0.1)

    def test_kind_mismatch(self):
        g = Grid(2, 1.0, 3)
        with pytest.raises(KindMismatch):
            region_damping_sa(P10, 2, 0.5, sample_field(g, {"type": "constant", "value": [0, 1]}),
                              1, 1.0)


class TestPotentialRegions:
    def test_zero_potential(self):
        g = Grid(3, 1.0, 3)
        r = region_potential(P10, 3, 0.5, sample_field(g, {"type": "constant", "value": 0}), False, 1.0)
        assert r.radius == 0.0
        assert r.membership(0) and not r.membership(1e-9)

    def test_disk_arithmetic(self):
        r = region(RegionKind.POTENTIAL_DISK_NSA, 1.0, 3.0, 0.5, 3)
        assert r.radius == pytest.approx(81.0)

    def test_self_adjoint_positive_potential(self):
        g = Grid(3, 1.0, 3)
        r = region_potential(P10, 3, 0.5, sample_field(g, {"type": "constant", "value": 2}), True, 1.0)
        assert not r.membership(-0.001) and r.membership(3.0)

    def test_1d_disk(self):
        r = region_1d_nsa(P10, box(1.0, 1.0))
        assert r.constant == pytest.approx(1 / (2 * math.sqrt(2)))
        assert r.radius == pytest.approx(0.5, rel=1e-12)
        assert r.explicit

    def test_1d_self_adjoint_nonnegative(self):
        r = region_1d_nsa(P10, box(3.0), self_adjoint=True)
        assert not r.membership(-1e-6) and r.membership(0)

    def test_1d_requires_1d(self):
        with pytest.raises(DimensionMismatch):
            region_1d_nsa(P10, sample_field(Grid(2, 1.0, 3), {"type": "constant", "value": 1}))


class TestAbsence:
    def test_below_threshold(self):
        assert damping_absence_1d(P10, box(1.0))

    def test_threshold_is_strict(self):
        r = EnclosureRegion(RegionKind.ABSENCE_1D, 0.5, 2.0, 0.0, 1, P_UNIT)
        assert r.membership(1 + 1j)
        a = box(1.0)
        scaled = DampingField(a.grid, a.kind, a.samples * 2.0 / a.integral().real)
        thr = 2.0 * math.sqrt(P_UNIT.p_speed_sq)
        from espec.model import lp_norm
        assert damping_absence_1d(P_UNIT, scaled) == (lp_norm(scaled, 1).value < thr)
        assert not damping_absence_1d(P_UNIT, DampingField(a.grid, a.kind, a.samples * 1.0000001))

    def test_zero(self):
        a0 = box(0.0)
        assert damping_absence_1d(P10, a0)
        assert not region_absence_1d(P10, a0).membership(0.3)


class TestTraceAndCount:
    def test_trace_arithmetic(self):
        assert trace_lower_bound(P_UNIT, 1.0, box(-4.0)) == pytest.approx(2.0, rel=1e-12)

    def test_trace_trivial_sign(self):
        assert trace_lower_bound(P10, 1.0, box(3.0)) < 0
        assert trace_sum(P10, box(3.0), 1.0) == 0.0

    def test_trace_square_well(self):
        g = 10.0
        assert trace_sum(P10, box(-g), 1.0) >= g / (2 * math.sqrt(2))

    def test_trace_kind(self):
        with pytest.raises(KindMismatch):
            trace_lower_bound(P10, 1.0, sample_field(LINE, {"type": "constant", "value": [1, 1]}))

    def test_count_arithmetic(self):
        c = bargmann_count_bound(P_UNIT, 1.0, box(3.0))
        assert c.limit == pytest.approx(4.0, rel=1e-12) and c.observed == 0

    def test_count_zero(self):
        c = bargmann_count_bound(P10, 1.0, box(0.0))
        assert c == CountBound(1.0, 0) and c.holds

    def test_count_well(self):
        c = bargmann_count_bound(P10, 1.0, box(-5.0))
        assert c.limit == pytest.approx(3.5, rel=1e-12)
        assert 1 <= c.observed <= 3 and c.holds

    def test_negative_values_sorted(self):
        vals = negative_eigenvalues(P10, box(-20.0), 1.0)
        assert np.all(np.diff(vals) > 0) and np.all(vals < 0)


class TestSALower:
    def test_arithmetic(self):
        # int |x| |a| = g b^2 = 4
        assert sa_lower_bound_1d(P10, box(-4.0)) == pytest.approx(0.5, rel=1e-12)

    def test_well_g10(self):
        a = box(-10.0)
        assert sa_lower_hypothesis(P10, a, +1)
        assert sa_lower_bound_1d(P10, a) == pytest.approx(0.2, rel=1e-12)

    def test_hypothesis_fails(self):
        a = box(-0.5)
        assert not sa_lower_hypothesis(P10, a, +1)
        r = region_sa_lower_1d(P10, a, +1)
        assert not r.active and r.membership(1e-9)

    def test_zero_moment(self):
        with pytest.raises(ZeroMoment):
            sa_lower_bound_1d(P10, box(0.0))

    def test_half_line_membership(self):
        r = region_sa_lower_1d(P10, box(-10.0), +1)
        assert r.radius == pytest.approx(0.2)
        assert not r.membership(0.19) and r.membership(0.2) and r.membership(-0.01)
        assert r.membership(0.195, slack=0.05)


class TestAlpha:
    def test_bracket_positive_z(self):
        # a_- integrates to 4, a to -2
        a = (box(-4.0, 0.5) .samples + box(1.0, 0.5, center=1.5).samples
             + box(1.0, 0.5, center=-1.5).samples)
        a = DampingField(LINE, FieldKind.SCALAR_REAL, a)
        lo, hi = alpha_bracket(a, 0.1)
        assert (lo, hi) == (pytest.approx(0.5), pytest.approx(2.0))

    def test_bracket_negative_z(self):
        a = (box(4.0, 0.5).samples + box(-1.0, 0.5, center=1.5).samples
             + box(-1.0, 0.5, center=-1.5).samples)
        a = DampingField(LINE, FieldKind.SCALAR_REAL, a)
        lo, hi = alpha_bracket(a, -0.1)
        assert (lo, hi) == (pytest.approx(0.5), pytest.approx(2.0))

    def test_solve_matches_pencil(self):
        grid = Grid(1, 8.0, 399)
        a = box(-2.2, grid=grid)
        res = alpha_bracket_and_solve(P10, a, 0.524)
        assert isinstance(res, AlphaBracket)
        assert res.lower <= res.solution <= res.upper
        assert res.sign_changes == 1
        zs = np.array([p.z for p in pencil_spectrum(build_pencil(P10, grid, a))])
        assert np.min(np.abs(zs - res.s_star)) <= 0.01 * res.s_star

    def test_g10_window_has_no_root(self):
        # the real pencil eigenvalues of this well are near 8.3 and 9.6, far
        # above the window s in [0.5, 1] mapped from the bracket
        with pytest.raises(RootNotBracketed):
            alpha_bracket_and_solve(P10, box(-10.0, grid=Grid(1, 6.0, 299)), 0.1)

    @pytest.mark.parametrize("z", [1.0, -0.1, 0.0])
    def test_hypotheses(self, z):
        with pytest.raises(HypothesisViolated):
            alpha_bracket_and_solve(P10, box(-2.0), z)


class TestCalibrate:
    def test_empty(self):
        with pytest.raises(EmptyFamily):
            calibrate_constant([], 0.5, 2)

    def test_empty_spectrum(self):
        g = Grid(2, 1.0, 5)
        assert calibrate_constant([(constant_field(g, 2.0, 1.5), [])], 0.5, 2) == 0.0

    def test_single_pair(self):
        g = Grid(2, 1.0, 5)
        c = calibrate_constant([(constant_field(g, 2.0, 1.5), [pair(1.0), pair(0.1, False)])], 0.5, 2)
        assert c == pytest.approx(0.5, rel=1e-12)

    def test_monotone_in_family(self):
        g = Grid(2, 1.0, 5)
        a = constant_field(g, 2.0, 1.5)
        small = calibrate_constant([(a, [pair(1.0)])], 0.5, 2)
        big = calibrate_constant([(a, [pair(1.0)]), (a, [pair(0.25)])], 0.5, 2)
        assert big >= small


class TestVerify:
    def test_empty(self):
        rep = verify_spectrum(region(RegionKind.DISK_NSA_1D, 1.0, 1.0, 0.5, 1), [])
        assert rep.passed and not rep.inside and not rep.outside

    def test_absence_violation_fails(self):
        r = region_absence_1d(P10, box(1.0))
        rep = verify_spectrum(r, [pair(-1 + 1j), pair(2.0, converged=False)])
        assert not rep.passed and len(rep.outside) == 1

    def test_calibrated_info_only(self):
        r = region(RegionKind.DISK_COMPLEMENT_NSA, 1.0, 1.0, 0.5, 2)
        rep = verify_spectrum(r, [pair(1e-6)])
        assert rep.passed and rep.records[0]["status"] == "INFO"

    def test_toy_inside_calibrated_region(self):
        g = Grid(2, 1.0, 5)
        a = sample_field(g, {"type": "constant", "value": 2.0})
        z = complex(-1, math.sqrt(3))
        toy = [pair(z), pair(z.conjugate())]
        c = calibrate_constant([(a, toy)], 0.5, 2)
        rep = verify_spectrum(region_damping_nsa(P10, 2, 0.5, a, c), toy)
        assert len(rep.inside) == 2 and not rep.outside


_KINDS = [RegionKind.DISK_COMPLEMENT_NSA, RegionKind.REAL_RAY_SA, RegionKind.POTENTIAL_DISK_NSA,
          RegionKind.POTENTIAL_DISK_SA, RegionKind.DISK_NSA_1D, RegionKind.HALF_LINE_1D,
          RegionKind.ABSENCE_1D]


@settings(max_examples=200, deadline=None)
@given(kind=st.sampled_from(_KINDS), nv=st.floats(0, 50), grow=st.floats(1, 10),
       r=st.floats(1e-6, 1e6), theta=st.sampled_from([0.0, math.pi, 1.0]),
       d=st.sampled_from([2, 3]))
def test_membership_monotone_in_norm(kind, nv, grow, r, theta, d):
    z = r * complex(math.cos(theta), math.sin(theta))
    dim = 1 if kind in (RegionKind.DISK_NSA_1D, RegionKind.HALF_LINE_1D, RegionKind.ABSENCE_1D) else d
    sign = 1 if kind in (RegionKind.REAL_RAY_SA, RegionKind.HALF_LINE_1D) else 0
    small = EnclosureRegion(kind, 1.3, nv, 0.5, dim, P10, sign)
    large = EnclosureRegion(kind, 1.3, nv * grow, 0.5, dim, P10, sign)
    if small.membership(z):
        assert large.membership(z)
