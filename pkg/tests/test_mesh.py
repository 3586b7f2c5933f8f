"""Grids, fields, interpolation, node selection and prolongation."""

import numpy as np
import pytest

from plaplab.errors import ConfigurationError, DomainError
from plaplab.mesh import (
    Domain,
    Grid,
    NodeSet,
    ScalarField,
    build_grid,
    gradient_at,
    interpolate,
    nodes_in_ball,
    nodes_on_shell,
    prolong,
    refine,
)


@pytest.fixture
def line():
    return build_grid(Domain((0.0,), (2.0,)), (5,))


@pytest.fixture
def square():
    return build_grid(Domain((0.0, 0.0), (1.0, 1.0)), (5, 5))


class TestDomain:
    def test_dim_and_diameter(self):
        d = Domain((0.0, 0.0), (3.0, 4.0))
        assert d.dim == 2
        assert d.diameter == pytest.approx(5.0)

    def test_contains(self):
        d = Domain((0.0,), (1.0,))
        assert d.contains([0.5])
        assert not d.contains([1.5])
        assert d.contains([1.0 + 1e-9], slack=1e-6)

    def test_rejects_empty_axis(self):
        with pytest.raises(ConfigurationError):
            Domain((1.0,), (1.0,))

    def test_rejects_3d(self):
        with pytest.raises(ConfigurationError):
            Domain((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ConfigurationError):
            Domain((0.0,), (1.0, 1.0))


class TestGrid:
    def test_spacing_and_hmax(self, line):
        assert line.spacing == (0.5,)
        assert line.hmax == 0.5

    def test_axis_values(self, line):
        np.testing.assert_array_equal(line.axis(0), [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_axes_reproduce_bit_identically(self, line):
        other = build_grid(Domain((0.0,), (2.0,)), (5,))
        assert np.array_equal(line.axis(0), other.axis(0))

    def test_node_coords(self, square):
        np.testing.assert_allclose(square.node_coords((2, 1)), [0.5, 0.25])

    def test_boundary_mask_counts(self, line, square):
        assert int(line.boundary_mask().sum()) == 2
        # 5x5 perimeter: 25 - 9 interior
        assert int(square.boundary_mask().sum()) == 16

    def test_lumped_weights_sum_to_volume(self, line, square):
        assert float(line.lumped_weights().sum()) == pytest.approx(2.0)
        assert float(square.lumped_weights().sum()) == pytest.approx(1.0)

    def test_lumped_weights_positive(self, square):
        assert np.all(square.lumped_weights() > 0)

    def test_rejects_too_few_nodes(self):
        with pytest.raises(ConfigurationError):
            build_grid(Domain((0.0,), (1.0,)), (2,))

    def test_equality(self, line):
        assert line == build_grid(Domain((0.0,), (2.0,)), (5,))
        assert line != build_grid(Domain((0.0,), (2.0,)), (9,))

    def test_refine_doubles_cells(self, line):
        fine = refine(line, 2)
        assert fine.counts == (9,)
        assert fine.spacing[0] == pytest.approx(0.25)
        assert fine.domain == line.domain

    def test_refine_rejects_bad_factor(self, line):
        with pytest.raises(ConfigurationError):
            refine(line, 0)


class TestScalarField:
    def test_shape_checked(self, line):
        with pytest.raises(ConfigurationError):
            ScalarField(line, np.zeros(4))

    def test_from_function(self, square):
        f = ScalarField.from_function(square, lambda x, y: x + 2 * y)
        assert f.values[4, 0] == pytest.approx(1.0)
        assert f.values[0, 4] == pytest.approx(2.0)

    def test_constant_broadcasts(self, square):
        f = ScalarField.from_function(square, lambda x, y: 3.0)
        np.testing.assert_array_equal(f.values, np.full((5, 5), 3.0))


class TestInterpolate:
    def test_1d_hand_value(self, line):
        f = ScalarField(line, line.axis(0) ** 2)
        assert interpolate(f, [0.6]) == pytest.approx(0.4)

    def test_exact_on_nodes(self, line):
        f = ScalarField(line, line.axis(0) ** 2)
        assert interpolate(f, [1.5]) == pytest.approx(2.25)

    def test_2d_exact_for_affine(self, square):
        f = ScalarField.from_function(square, lambda x, y: 2 * x - y + 1)
        assert interpolate(f, [0.3, 0.7]) == pytest.approx(2 * 0.3 - 0.7 + 1)

    def test_2d_exact_for_bilinear(self, square):
        # x*y is bilinear on every cell, so interpolation reproduces it
        f = ScalarField.from_function(square, lambda x, y: x * y)
        assert interpolate(f, [0.3, 0.7]) == pytest.approx(0.21)

    def test_outside_raises(self, line):
        f = ScalarField(line, np.zeros(5))
        with pytest.raises(DomainError):
            interpolate(f, [2.5])

    def test_tiny_slack_clamped(self, line):
        f = ScalarField(line, line.axis(0))
        assert interpolate(f, [2.0 + 1e-14]) == pytest.approx(2.0)


class TestGradientAt:
    def test_centered_exact_for_quadratic(self, line):
        f = ScalarField(line, line.axis(0) ** 2)
        g, one_sided = gradient_at(f, (2,))
        assert g[0] == pytest.approx(2.0)
        assert not one_sided

    def test_one_sided_exact_for_quadratic(self, line):
        f = ScalarField(line, line.axis(0) ** 2)
        g0, flag0 = gradient_at(f, (0,))
        g4, flag4 = gradient_at(f, (4,))
        assert flag0 and flag4
        assert g0[0] == pytest.approx(0.0)
        assert g4[0] == pytest.approx(4.0)

    def test_2d_affine(self, square):
        f = ScalarField.from_function(square, lambda x, y: x + 2 * y)
        g, _ = gradient_at(f, (2, 2))
        np.testing.assert_allclose(g, [1.0, 2.0])

    def test_bad_index(self, line):
        f = ScalarField(line, np.zeros(5))
        with pytest.raises(ConfigurationError):
            gradient_at(f, (7,))


class TestNodeSelection:
    def test_ball_count(self, square):
        assert nodes_in_ball(square, (0.5, 0.5), 0.3).count == 5

    def test_shell_count(self, square):
        assert nodes_on_shell(square, (0.5, 0.5), 0.25, 0.05).count == 4

    def test_ball_is_closed(self, square):
        # the four neighbors sit exactly at distance 0.25
        assert nodes_in_ball(square, (0.5, 0.5), 0.25).count == 5

    def test_indices_and_coordinates_agree(self, square):
        ns = nodes_in_ball(square, (0.5, 0.5), 0.3)
        for idx, xy in zip(ns.indices(), ns.coordinates()):
            np.testing.assert_allclose(square.node_coords(idx), xy)

    def test_negative_radius_rejected(self, square):
        with pytest.raises(ConfigurationError):
            nodes_in_ball(square, (0.5, 0.5), -1.0)

    def test_nodeset_shape_checked(self, square):
        with pytest.raises(ConfigurationError):
            NodeSet(square, np.zeros((3, 3), dtype=bool))


class TestProlong:
    def test_1d_nested_nodes_exact(self, line):
        f = ScalarField(line, line.axis(0) ** 2)
        fine = prolong(f, refine(line, 2))
        np.testing.assert_array_equal(fine.values[::2], f.values)

    def test_1d_midpoints_average(self, line):
        f = ScalarField(line, line.axis(0) ** 2)
        fine = prolong(f, refine(line, 2))
        np.testing.assert_allclose(
            fine.values[1::2], 0.5 * (f.values[:-1] + f.values[1:])
        )

    def test_2d_nested_nodes_exact(self, square):
        rng = np.random.default_rng(7)
        f = ScalarField(square, rng.standard_normal(square.shape))
        fine = prolong(f, refine(square, 2))
        np.testing.assert_array_equal(fine.values[::2, ::2], f.values)

    def test_2d_reproduces_bilinear(self, square):
        f = ScalarField.from_function(square, lambda x, y: 1 + x - 2 * y + 3 * x * y)
        target = build_grid(square.domain, (11, 7))
        out = prolong(f, target)
        want = ScalarField.from_function(target, lambda x, y: 1 + x - 2 * y + 3 * x * y)
        np.testing.assert_allclose(out.values, want.values, atol=1e-14)

    def test_mismatched_box_rejected(self, line):
        f = ScalarField(line, np.zeros(5))
        other = build_grid(Domain((0.0,), (1.0,)), (9,))
        with pytest.raises(ConfigurationError):
            prolong(f, other)
