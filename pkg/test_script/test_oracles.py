"""
Tests for the closed-form references and their agreement with the solver
"""

import math
import os
import sys
import unittest

import numpy as np
from scipy import special

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..', 'src'))

from discretize import assemble, build_grid  # noqa: E402
from equilibrium import verify  # noqa: E402
from model import normalize_interval_union  # noqa: E402
from oracles import (  # noqa: E402
    EXAMPLES,
    ClosedFormMeasure,
    arcsine_weights,
    circle_potential,
    condenser2_energy,
    condenser2_masses,
    condenser2_solution,
    condenser_energy,
    elliptic_K,
    elliptic_K_prime,
    example_instance,
    gaussian_field_energy,
    interval_energy,
    oracle_summary,
)
from solver import solve  # noqa: E402


def grid_on(a, b, n):
    return build_grid(normalize_interval_union([(a, b)]), n)


class TestArcsine(unittest.TestCase):
    """Exact cell masses of arcsine laws"""

    def test_single_cell_holds_everything(self):
        np.testing.assert_allclose(arcsine_weights(-1.0, 1.0, grid_on(-1, 1, 1)), [1.0])

    def test_halves(self):
        np.testing.assert_allclose(arcsine_weights(-1.0, 1.0, grid_on(-1, 1, 2)), [0.5, 0.5])

    def test_endpoint_cell(self):
        n = 10
        w = arcsine_weights(-1.0, 1.0, grid_on(-1, 1, n))
        eps = 2.0 / n
        expected = (math.pi / 2.0 - math.asin(1.0 - eps)) / math.pi
        self.assertAlmostEqual(float(w[0]), expected, places=12)
        self.assertAlmostEqual(float(w[-1]), expected, places=12)

    def test_total_mass(self):
        w = arcsine_weights(2.0, 5.0, grid_on(2, 5, 37), mass=0.7)
        self.assertAlmostEqual(float(w.sum()), 0.7, places=12)
        self.assertTrue(np.all(w > 0))

    def test_grid_beyond_support(self):
        with self.assertRaises(ValueError):
            arcsine_weights(-1.0, 1.0, grid_on(-2, 1, 8))
        with self.assertRaises(ValueError):
            arcsine_weights(1.0, -1.0, grid_on(-1, 1, 8))

    def test_mixture(self):
        grid = grid_on(-1, 1, 40)
        mix = ClosedFormMeasure.mixture([(-1.0, 1.0, 0.5), (-0.5, 0.5, 0.5), (0.0, 0.1, 0.0)])
        self.assertEqual(len(mix.parameters), 2)
        self.assertAlmostEqual(mix.mass, 1.0)
        masses = mix.cell_masses(grid)
        self.assertAlmostEqual(float(masses.sum()), 1.0, places=12)
        # the inner law only charges cells meeting [-0.5, 0.5]
        outer = 0.5 * arcsine_weights(-1.0, 1.0, grid)
        np.testing.assert_allclose(masses[:5], outer[:5], atol=1e-15)


class TestEllipticAndEnergies(unittest.TestCase):
    """Elliptic integrals and closed-form energies"""

    def test_elliptic_K(self):
        self.assertAlmostEqual(elliptic_K(0.0), math.pi / 2.0, places=14)
        for k in (0.1, 0.5, 0.9, 0.999):
            self.assertAlmostEqual(elliptic_K(k), float(special.ellipk(k * k)), places=12)
        self.assertAlmostEqual(elliptic_K(0.5), 1.68575, places=5)
        self.assertAlmostEqual(elliptic_K_prime(0.5), 2.15652, places=5)
        with self.assertRaises(ValueError):
            elliptic_K(1.0)
        with self.assertRaises(ValueError):
            elliptic_K_prime(0.0)

    def test_interval_energy(self):
        self.assertAlmostEqual(interval_energy(-1.0, 1.0), math.log(2.0))
        self.assertAlmostEqual(interval_energy(-2.0, 2.0), 0.0)
        self.assertAlmostEqual(interval_energy(0.0, 8.0), -math.log(2.0))

    def test_condenser_energy(self):
        self.assertAlmostEqual(condenser_energy(4.0), 4.9115, delta=1e-3)
        values = [condenser_energy(n) for n in (3.0, 4.0, 6.0, 10.0, 50.0)]
        self.assertTrue(all(x > y for x, y in zip(values, values[1:])))
        with self.assertRaises(ValueError):
            condenser_energy(2.0)

    def test_circle_potential(self):
        self.assertEqual(circle_potential(2.0, 0.0), 2.0)
        self.assertAlmostEqual(circle_potential(2.0, 1.0), 0.0)
        self.assertAlmostEqual(circle_potential(2.0, 1j), 0.0)
        self.assertAlmostEqual(circle_potential(2.0, math.e), -1.0)
        self.assertEqual(circle_potential(2.0, 0.01), 2.0)
        with self.assertRaises(ValueError):
            circle_potential(float("inf"), 1.0)

    def test_condenser2_masses(self):
        self.assertEqual(condenser2_masses(1.0, 1.0), (0.5, 0.5))
        self.assertEqual(condenser2_masses(1.0, 2.0), (0.0, 1.0))
        self.assertEqual(condenser2_masses(1.0, 0.0), (1.0, 0.0))
        with self.assertRaises(ValueError):
            condenser2_masses(1.0, 2.5)

    def test_condenser2_energy(self):
        self.assertAlmostEqual(condenser2_energy(1.0, 1.0, (-1, 1), (-0.5, 0.5)), 3.5 * math.log(2.0), places=12)
        # without the second component the first is the equilibrium measure of D1 with weight 2
        self.assertAlmostEqual(condenser2_energy(1.0, 0.0, (-1, 1), (-0.5, 0.5)), 2.0 * math.log(2.0), places=12)

    def test_condenser2_solution(self):
        grids = [grid_on(-1, 1, 40), grid_on(-0.5, 0.5, 20)]
        w = condenser2_solution(1.0, 1.0, (-1, 1), (-0.5, 0.5), grids)
        self.assertEqual(w.size, 60)
        self.assertAlmostEqual(float(w[:40].sum()), 1.0, places=12)
        self.assertAlmostEqual(float(w[40:].sum()), 1.0, places=12)
        np.testing.assert_array_equal(condenser2_solution(1.0, 0.0, (-1, 1), (-0.5, 0.5), grids)[40:], 0.0)
        with self.assertRaises(ValueError):
            condenser2_solution(1.0, 1.0, (-0.5, 0.5), (-1, 1), grids)

    def test_gaussian_field_energy(self):
        self.assertAlmostEqual(gaussian_field_energy(), 0.75 + math.log(2.0))
        self.assertAlmostEqual(gaussian_field_energy(), 1.4431, places=4)


class TestSolverAgreement(unittest.TestCase):
    """Discrete minima approach the closed forms"""

    def test_condenser(self):
        result = solve(assemble(example_instance("condenser", n=4.0), nodes=400))
        self.assertLess(abs(result.objective - condenser_energy(4.0)) / condenser_energy(4.0), 2e-2)

    def test_condenser2(self):
        dp = assemble(example_instance("condenser2"), nodes=800)
        result = solve(dp)
        exact = condenser2_energy(1.0, 1.0, (-1, 1), (-0.5, 0.5))
        self.assertLess(abs(result.objective - exact) / exact, 2e-2)
        # the cell masses of the closed form are feasible, so the solver can only do better
        reference = condenser2_solution(1.0, 1.0, (-1, 1), (-0.5, 0.5), dp.grids, dp)
        self.assertLessEqual(result.objective, dp.objective(reference.weights) + 1e-5)
        for i in range(2):
            tv = 0.5 * np.abs(result.weights.block(i) - reference.block(i)).sum()
            self.assertLess(tv, 5e-2)
        self.assertTrue(verify(result.weights, eq_tol=5e-2).passed)

    def test_gaussian(self):
        result = solve(assemble(example_instance("gaussian"), nodes=400))
        self.assertAlmostEqual(result.objective, gaussian_field_energy(), delta=3e-2)


class TestCatalogue(unittest.TestCase):
    """Named fixtures and summaries"""

    def test_every_example_builds(self):
        for name in EXAMPLES:
            p = example_instance(name)
            self.assertEqual(p.C.entries.shape, (p.d, p.d))

    def test_unknown_example(self):
        with self.assertRaises(KeyError):
            example_instance("no_such_example")
        with self.assertRaises(KeyError):
            oracle_summary("av_graph")

    def test_summaries(self):
        condenser = oracle_summary("condenser", n=4)
        self.assertEqual(set(condenser), {"example", "n", "k", "K", "K_prime", "energy"})
        self.assertAlmostEqual(condenser["k"], 0.5)
        self.assertAlmostEqual(oracle_summary("scalar_wide")["energy"], -math.log(2.0))
        self.assertAlmostEqual(oracle_summary("interval", a=0.0, b=4.0)["capacity"], 1.0)
        self.assertEqual(oracle_summary("gaussian")["support"], [-1.0, 1.0])
        self.assertAlmostEqual(oracle_summary("condenser2")["energy"], 3.5 * math.log(2.0))
        self.assertAlmostEqual(oracle_summary("circle", N=1.0, x=-1.0)["potential"], 0.0)


def run_tests():
    """Run all tests"""
    test_suite = unittest.TestSuite()
    for test_class in (TestArcsine, TestEllipticAndEnergies, TestSolverAgreement, TestCatalogue):
        test_suite.addTests(unittest.TestLoader().loadTestsFromTestCase(test_class))
    result = unittest.TextTestRunner(verbosity=2).run(test_suite)
    return result.wasSuccessful()


if __name__ == "__main__":
    sys.exit(0 if run_tests() else 1)
