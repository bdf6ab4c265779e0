import math

import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given, settings, strategies as st

from espec.errors import DimensionMismatch, EllipticityViolation, KindMismatch, SpecOutOfDomain
from espec.model import (DampingField, FieldKind, Grid, LameParams, lp_norm, make_params,
                         parse_complex, sample_field, weighted_first_moment)


class TestLameParams:
    def test_speeds(self):
        p = make_params(1, 0)
        assert p.p_speed_sq == 2.0
        assert p.s_speed_sq == 1.0

    def test_lambda_plus_mu_zero_allowed(self):
        assert make_params(1, -1).p_speed_sq == 1.0

    @pytest.mark.parametrize("mu,lam", [(0, 1), (-1, 3), (1, -1.5), (float("nan"), 0)])
    def test_rejects_non_elliptic(self, mu, lam):
        with pytest.raises(EllipticityViolation):
            LameParams(mu, lam)


class TestGrid:
    def test_spacing_and_nodes(self):
        g = Grid(1, 2.0, 3)
        assert g.spacing == 1.0
        np.testing.assert_allclose(g.axis, [-1.0, 0.0, 1.0])

    def test_node_ordering_first_axis_slowest(self):
        g = Grid(2, 1.0, 3)
        assert g.nodes.shape == (9, 2)
        np.testing.assert_allclose(g.nodes[1], [-0.5, 0.0])
        np.testing.assert_allclose(g.nodes[3], [0.0, -0.5])

    def test_refined_and_doubled(self):
        g = Grid(1, 3.0, 29)
        assert g.refined().spacing == pytest.approx(g.spacing / 2)
        assert g.refined().half_width == 3.0
        assert g.doubled().spacing == pytest.approx(g.spacing)
        assert g.doubled().half_width == 6.0

    def test_scaled_nodes(self):
        g = Grid(2, 4.0, 11)
        np.testing.assert_allclose(g.scaled(2.0).nodes * 2.0, g.nodes)

    @pytest.mark.parametrize("args", [(4, 1.0, 5), (1, -1.0, 5), (1, 1.0, 2)])
    def test_invalid(self, args):
        with pytest.raises((DimensionMismatch, ValueError)):
            Grid(*args)


class TestSampleField:
    def test_constant(self):
        a = sample_field(Grid(1, 1.0, 7), {"type": "constant", "value": 2})
        assert a.kind is FieldKind.SCALAR_REAL
        np.testing.assert_array_equal(a.samples, 2.0)

    def test_box_well(self):
        g = Grid(1, 2.0, 7)
        a = sample_field(g, {"type": "box", "amplitude": -5, "half_width": 1})
        np.testing.assert_array_equal(a.samples[np.abs(g.axis) < 1 - 1e-9], -5.0)
        np.testing.assert_array_equal(a.samples[np.abs(g.axis) > 1 + 1e-9], 0.0)
        # nodes at x = -1, 1 sit on the jump
        np.testing.assert_array_equal(a.samples[[1, 5]], -2.5)

    def test_box_corner_2d(self):
        g = Grid(2, 2.0, 7)
        a = sample_field(g, {"type": "box", "amplitude": 4, "half_width": 1})
        vals = a.samples.reshape(7, 7)
        assert vals[1, 1] == 1.0 and vals[1, 3] == 2.0 and vals[3, 3] == 4.0

    def test_complex_gaussian_kind(self):
        a = sample_field(Grid(1, 3.0, 31), {"type": "gaussian", "amplitude": [1, 2], "width": 0.5})
        assert a.kind is FieldKind.SCALAR_COMPLEX
        assert a.samples.max() == pytest.approx(complex(1, 2))

    def test_matrix_field(self):
        a = sample_field(Grid(2, 1.0, 5), {"type": "constant", "value": 1,
                                           "matrix": [[1, 0], [0, 2]]})
        assert a.kind is FieldKind.MATRIX_COMPLEX
        assert a.samples.shape == (25, 2, 2)

    def test_callable(self):
        g = Grid(1, 1.0, 5)
        a = sample_field(g, lambda x: x[:, 0] ** 2)
        np.testing.assert_allclose(a.samples, g.axis ** 2)

    def test_sum_and_table(self):
        g = Grid(1, 1.0, 3)
        a = sample_field(g, {"type": "sum", "terms": [{"type": "constant", "value": 1},
                                                     {"type": "table", "values": [0, 1, 2]}]})
        np.testing.assert_allclose(a.samples, [1, 2, 3])

    @pytest.mark.parametrize("spec", [
        {"type": "constant", "value": float("inf")},
        {"type": "gaussian", "width": float("nan")},
        {"type": "box", "half_width": -1},
        {"type": "nope"},
    ])
    def test_out_of_domain(self, spec):
        with pytest.raises(SpecOutOfDomain):
            sample_field(Grid(1, 1.0, 5), spec)

    def test_parts(self):
        a = sample_field(Grid(1, 2.0, 41), lambda x: np.sin(3 * x[:, 0]))
        np.testing.assert_allclose(a.positive_part().samples - a.negative_part().samples, a.samples)
        assert np.all(a.negative_part().samples >= 0)

    def test_parts_need_real(self):
        a = sample_field(Grid(1, 1.0, 5), {"type": "constant", "value": [0, 1]})
        with pytest.raises(KindMismatch):
            a.negative_part()

    def test_real_kind_rejects_imaginary(self):
        with pytest.raises(KindMismatch):
            DampingField(Grid(1, 1.0, 3), FieldKind.SCALAR_REAL, np.array([1, 1j, 0]))

    def test_samples_read_only(self):
        a = sample_field(Grid(1, 1.0, 5), {"type": "constant", "value": 1})
        with pytest.raises(ValueError):
            a.samples[0] = 3.0

    def test_parse_complex_forms(self):
        assert parse_complex({"re": 1, "im": -2}) == 1 - 2j
        assert parse_complex([3, 4]) == 3 + 4j
        assert parse_complex(2.5) == 2.5


class TestNorms:
    def test_indicator_l2(self):
        for n in (159, 319, 639):
            g = Grid(1, 4.0, n)
            a = sample_field(g, {"type": "box", "half_width": 0.5, "center": 0.5})
            assert abs(lp_norm(a, 2).value - 1.0) <= 2 * g.spacing

    def test_matrix_spectral_norm(self):
        g = Grid(2, 2.0, 399)
        a = sample_field(g, {"type": "box", "half_width": 0.5, "center": [0.5, 0.5],
                             "matrix": [[1, 0], [0, 2]]})
        rep = lp_norm(a, 1)
        assert rep.kind_used == "spectral"
        # the closed box picks up one extra row of nodes per side: O(h) error
        assert rep.value == pytest.approx(2.0, abs=5 * g.spacing)

    def test_exponential_l1(self):
        g = Grid(1, 20.0, 8001)
        a = sample_field(g, {"type": "exponential", "rate": 1.0})
        exact = 2 * (1 - math.exp(-20.0))
        assert lp_norm(a, 1).value == pytest.approx(exact, abs=1e-4)

    def test_second_order_quadrature(self):
        L = 2.0
        exact = quad(lambda x: (L * L - x * x) * math.exp(x), -L, L)[0]
        errs = []
        for n in (39, 79, 159):
            a = sample_field(Grid(1, L, n), lambda x: (L * L - x[:, 0] ** 2) * np.exp(x[:, 0]))
            errs.append(abs(lp_norm(a, 1).value - exact))
        assert errs[1] <= errs[0] / 3
        assert errs[2] <= errs[1] / 3

    def test_zero_field(self):
        a = sample_field(Grid(1, 1.0, 9), {"type": "constant", "value": 0})
        assert lp_norm(a, 1.5).value == 0.0
        assert weighted_first_moment(a) == 0.0

    def test_p_below_one(self):
        a = sample_field(Grid(1, 1.0, 9), {"type": "constant", "value": 1})
        with pytest.raises(ValueError):
            lp_norm(a, 0.5)

    def test_moment_box(self):
        a = sample_field(Grid(1, 3.0, 2999), {"type": "box", "amplitude": -5, "half_width": 1})
        assert weighted_first_moment(a) == pytest.approx(5.0, rel=2e-3)

    def test_moment_shifted_box(self):
        a = sample_field(Grid(1, 3.0, 2999), {"type": "box", "half_width": 1, "center": 1})
        assert weighted_first_moment(a) == pytest.approx(2.0, rel=2e-3)

    def test_moment_needs_1d(self):
        a = sample_field(Grid(2, 1.0, 5), {"type": "constant", "value": 1})
        with pytest.raises(DimensionMismatch):
            weighted_first_moment(a)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-3, 5), st.floats(-math.pi, math.pi), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
    def test_homogeneous(self, r, phi, p):
        a = sample_field(Grid(1, 2.0, 41), {"type": "gaussian", "amplitude": [1, 0.5]})
        c = r * complex(math.cos(phi), math.sin(phi))
        assert lp_norm(a.scaled(c), p).value == pytest.approx(abs(c) * lp_norm(a, p).value,
                                                             rel=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.sampled_from([1.0, 1.5, 2.0, 4.0]), st.floats(0.5, 4.0))
    def test_parts_split_norm(self, p, k):
        a = sample_field(Grid(1, 3.0, 61), lambda x: np.cos(k * x[:, 0]))
        total = lp_norm(a, p).value ** p
        split = lp_norm(a.positive_part(), p).value ** p + lp_norm(a.negative_part(), p).value ** p
        assert split == pytest.approx(total, rel=1e-12)
