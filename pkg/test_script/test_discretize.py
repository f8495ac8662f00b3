"""
Tests for grids, energy blocks, truncation and problem assembly
"""

import math
import os
import sys
import unittest

import numpy as np
from scipy import integrate, optimize

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..', 'src'))

from discretize import (  # noqa: E402
    MeasureTuple,
    assemble,
    build_grid,
    cell_average,
    cell_pair_average,
    choose_truncation,
    energy_block,
    self_energy,
)
from model import DegenerateGridError, ExternalField, InfeasibleError, make_instance, normalize_interval_union  # noqa: E402
from oracles import example_instance  # noqa: E402


class TestBuildGrid(unittest.TestCase):
    """Uniform midpoint grids"""

    def test_single_interval(self):
        g = build_grid(normalize_interval_union([(-1, 1)]), 4)
        np.testing.assert_allclose(g.nodes, [-0.75, -0.25, 0.25, 0.75])
        np.testing.assert_allclose(g.widths, 0.5)
        self.assertEqual(g.interval_ends(), [(0, 3)])

    def test_allocation_by_length(self):
        g = build_grid(normalize_interval_union([(0, 1), (2, 4)]), 9)
        self.assertEqual(int(np.sum(g.parents == 0)), 3)
        self.assertEqual(int(np.sum(g.parents == 1)), 6)
        self.assertEqual(g.interval_ends(), [(0, 2), (3, 8)])

    def test_largest_remainder(self):
        g = build_grid(normalize_interval_union([(0, 1), (2, 3)]), 5)
        self.assertEqual(int(np.sum(g.parents == 0)), 3)
        self.assertEqual(int(np.sum(g.parents == 1)), 2)

    def test_cells_tile_the_set(self):
        g = build_grid(normalize_interval_union([(-2, -1), (0.5, 3)]), 40)
        self.assertAlmostEqual(float(g.widths.sum()), 3.5)
        self.assertTrue(np.all(np.diff(g.nodes) > 0))

    def test_unbounded_needs_radius(self):
        s = normalize_interval_union([("-inf", "inf")])
        with self.assertRaises(DegenerateGridError):
            build_grid(s, 10)
        g = build_grid(s, 10, R=5.0)
        self.assertTrue(g.truncated_low and g.truncated_high)
        self.assertAlmostEqual(float(g.lefts[0]), -5.0)

    def test_neighbouring_cells_share_edges(self):
        g = build_grid(normalize_interval_union([(-1, 0.3), (0.7, 2.9)]), 97)
        inside = g.parents[1:] == g.parents[:-1]
        np.testing.assert_array_equal(g.rights[:-1][inside], g.lefts[1:][inside])
        self.assertEqual(float(g.lefts[0]), -1.0)
        self.assertEqual(float(g.rights[-1]), 2.9)
        np.testing.assert_allclose(g.rights - g.lefts, g.widths, rtol=1e-12)

    def test_coarse_grid_warns(self):
        with self.assertLogs("discretize", level="WARNING"):
            build_grid(normalize_interval_union([(0, 1), (2, 3)]), 10)

    def test_too_few_cells(self):
        with self.assertRaises(DegenerateGridError):
            build_grid(normalize_interval_union([(0, 1), (2, 3)]), 1)


class TestKernelAverages(unittest.TestCase):
    """Closed-form cell averages against numerical quadrature"""

    def test_self_energy_matches_quadrature(self):
        for h in (1.0, 0.1, 0.01):
            # twice the integral over the lower triangle y < x of the cell
            inner = lambda x, h=h: integrate.quad(lambda y: -math.log(x - y), 0.0, x, limit=200)[0]
            half, _ = integrate.quad(inner, 0.0, h, limit=200)
            self.assertAlmostEqual(2.0 * half / h ** 2, float(self_energy(h)), places=6)
            self.assertAlmostEqual(float(cell_pair_average(0.0, h, 0.0, h)), float(self_energy(h)), places=10)

    def test_separated_cells(self):
        value, _ = integrate.dblquad(lambda y, x: -math.log(abs(x - y)), 0.0, 1.0, 2.0, 3.0)
        self.assertAlmostEqual(float(cell_pair_average(0.0, 1.0, 2.0, 3.0)), value, places=8)

    def test_adjacent_cells(self):
        expected = 1.5 - 2.0 * math.log(2.0)
        self.assertAlmostEqual(float(cell_pair_average(0.0, 1.0, 1.0, 2.0)), expected, places=12)

    def test_single_cell_average(self):
        value, _ = integrate.quad(lambda y: -math.log(abs(0.3 - y)), 0.0, 1.0, points=[0.3])
        self.assertAlmostEqual(float(cell_average(0.3, 0.0, 1.0)), value, places=8)
        far, _ = integrate.quad(lambda y: -math.log(5.0 - y), 0.0, 1.0)
        self.assertAlmostEqual(float(cell_average(5.0, 0.0, 1.0)), far, places=10)


class TestEnergyBlock(unittest.TestCase):
    """Energy kernel blocks"""

    def test_same_grid(self):
        g = build_grid(normalize_interval_union([(-1, 1)]), 10)
        E = energy_block(g, g)
        np.testing.assert_allclose(E, E.T)
        np.testing.assert_allclose(np.diag(E), 1.5 - math.log(0.2))
        self.assertAlmostEqual(E[0, 1], -math.log(0.2))

    def test_coincident_nodes_of_distinct_grids(self):
        s = normalize_interval_union([(0, 1)])
        g1, g2 = build_grid(s, 4), build_grid(s, 4)
        E = energy_block(g1, g2)
        self.assertTrue(np.all(np.isfinite(E)))
        np.testing.assert_allclose(np.diag(E), 1.5 - math.log(0.25), atol=1e-12)

    def test_conditional_positivity(self):
        rng = np.random.default_rng(3)
        for n in (50, 200):
            g = build_grid(normalize_interval_union([(-1, 1)]), n)
            E = energy_block(g, g)
            for k in range(500):
                if k % 2:
                    w1, w2 = rng.uniform(size=n), rng.exponential(size=n) ** 4
                    v = w1 / w1.sum() - w2 / w2.sum()
                else:
                    v = rng.standard_normal(n)
                    v -= v.mean()
                self.assertGreaterEqual(float(v @ E @ v), -1e-8 * float(v @ v))


class TestTruncation(unittest.TestCase):
    """Truncation radius for unbounded sets"""

    def test_quadratic_field_radius(self):
        p = make_instance(
            [[2, 1], [1, 2]], [[("-inf", "inf")], [(-1, 1)]],
            fields=[ExternalField((0.0, 0.0, 1.0)), ExternalField()],
        )
        choice = choose_truncation(p, 0, margin=10.0)
        kappa = 2.0 * 3.0
        root = optimize.brentq(lambda x: x * x - kappa * math.log1p(x) - 10.0, 2.0, 10.0, xtol=1e-14)
        self.assertAlmostEqual(choice.radius, root, places=6)
        self.assertTrue(choice.support_compact)
        self.assertIsNone(choose_truncation(p, 1).radius)

    def test_larger_margin_gives_larger_radius(self):
        p = example_instance("gaussian")
        small = choose_truncation(p, 0, margin=1.0).radius
        large = choose_truncation(p, 0, margin=20.0).radius
        self.assertLess(small, large)


class TestAssemble(unittest.TestCase):
    """Discrete problem assembly"""

    def test_scalar(self):
        dp = assemble(example_instance("scalar"), nodes=10)
        self.assertEqual(dp.N, 10)
        np.testing.assert_allclose(dp.M, dp.E)
        np.testing.assert_array_equal(dp.q, 0.0)
        np.testing.assert_array_equal(dp.S, np.ones((1, 10)))

    def test_blocks_weighted_by_C(self):
        dp = assemble(example_instance("condenser2"), nodes=[12, 8])
        self.assertEqual(dp.N, 20)
        np.testing.assert_allclose(dp.M[:12, :12], 2.0 * dp.E[:12, :12])
        np.testing.assert_allclose(dp.M[:12, 12:], -dp.E[:12, 12:])
        np.testing.assert_allclose(dp.M, dp.M.T)
        self.assertEqual(dp.block_slice(1), slice(12, 20))

    def test_objective_and_gradient(self):
        dp = assemble(example_instance("gaussian"), nodes=30)
        self.assertIsNotNone(dp.radii[0])
        rng = np.random.default_rng(1)
        w = rng.uniform(size=dp.N)
        w /= w.sum()
        g = dp.gradient(w)
        eps = 1e-3
        for k in (0, 7, 29):
            e = np.zeros(dp.N)
            e[k] = eps
            delta = dp.objective(w + e) - dp.objective(w)
            self.assertAlmostEqual(delta - eps * eps * dp.M[k, k], eps * g[k], places=10)

    def test_radius_override(self):
        dp = assemble(example_instance("gaussian"), nodes=20, radii=[3.0])
        self.assertEqual(dp.radii, (3.0,))
        self.assertAlmostEqual(float(dp.grids[0].lefts[0]), -3.0)

    def test_infeasible_K(self):
        p = make_instance([[1]], [[(-1, 1)]], A=[[1]], a=[-1])
        with self.assertRaises(InfeasibleError):
            assemble(p, nodes=10)

    def test_measure_tuple(self):
        dp = assemble(example_instance("condenser2"), nodes=10)
        m = MeasureTuple(dp, np.full(20, 0.1))
        np.testing.assert_allclose(m.masses, [1.0, 1.0])
        self.assertAlmostEqual(m.total_mass, 2.0)
        with self.assertRaises(ValueError):
            MeasureTuple(dp, np.zeros(5))


def run_tests():
    """Run all tests"""
    test_suite = unittest.TestSuite()
    for test_class in (TestBuildGrid, TestKernelAverages, TestEnergyBlock, TestTruncation, TestAssemble):
        test_suite.addTests(unittest.TestLoader().loadTestsFromTestCase(test_class))
    result = unittest.TextTestRunner(verbosity=2).run(test_suite)
    return result.wasSuccessful()


if __name__ == "__main__":
    sys.exit(0 if run_tests() else 1)
