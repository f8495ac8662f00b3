"""
Tests for the hypothesis checks on the named fixture instances
"""

import json
import os
import sys
import unittest

import numpy as np

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..', 'src'))

from assumptions import (  # noqa: E402
    CheckStatus,
    check_admissibility,
    check_cij0,
    check_compatNS,
    check_H1,
    check_H2,
    check_image_equality,
    check_imageAC,
    check_K,
    check_support_compactness,
    kernel_basis,
    run_all_checks,
)
from graphs import DirectedMultigraph, incidence_matrix, interaction_from_graph  # noqa: E402
from model import ExternalField, MassPolyhedron, ProblemInstance, make_instance, normalize_interval_union  # noqa: E402
from oracles import AV_GRAPH, example_instance  # noqa: E402
from utils import to_jsonable  # noqa: E402


class TestFixtureVerdicts(unittest.TestCase):
    """Expected verdicts on the catalogued examples"""

    def test_touching_condenser_fails_H2(self):
        p = example_instance("condenser_touching")
        self.assertEqual(check_H2(p).status, CheckStatus.FAIL)
        self.assertEqual(check_compatNS(p).witness, [(0, 1)])
        report = run_all_checks(p)
        self.assertFalse(report.existence_guaranteed)

    def test_separated_condenser_passes_H2(self):
        p = example_instance("condenser")
        self.assertTrue(check_H2(p).passed)
        self.assertTrue(check_compatNS(p).passed)
        self.assertTrue(run_all_checks(p).existence_guaranteed)

    def test_example0_fails_H1(self):
        p = example_instance("example0")
        result = check_H1(p)
        self.assertEqual(result.status, CheckStatus.FAIL)
        self.assertEqual(result.witness, (0, 1))
        self.assertTrue(check_H2(p).passed)
        report = run_all_checks(p)
        self.assertTrue(report.existence_guaranteed)
        self.assertFalse(report.uniqueness_guaranteed)

    def test_example2_fails_imageAC(self):
        p = example_instance("example2")
        result = check_imageAC(p)
        self.assertEqual(result.status, CheckStatus.FAIL)
        np.testing.assert_allclose(result.witness, np.array([1.0, -1.0]) / np.sqrt(2.0), atol=1e-12)
        self.assertTrue(check_H1(p).passed)
        self.assertFalse(check_image_equality(p))
        self.assertFalse(run_all_checks(p).uniqueness_guaranteed)

    def test_av_graph(self):
        p = example_instance("av_graph")
        self.assertTrue(check_H2(p).passed)
        result = check_H1(p, AV_GRAPH)
        self.assertTrue(result.passed)
        K = check_K(p)
        self.assertTrue(K.compact)
        self.assertTrue(K.feasible)
        self.assertFalse(K.singleton)

    def test_positive_definite_with_fixed_masses(self):
        p = make_instance([[2, -1], [-1, 2]], [[(-1, 1)], [(-1, 1)]], A=np.eye(2), a=[1.0, 1.0])
        report = run_all_checks(p)
        self.assertTrue(report.K.singleton)
        self.assertTrue(report.existence_guaranteed)
        self.assertTrue(report.uniqueness_guaranteed)
        self.assertTrue(report.image_equality)


class TestIndividualChecks(unittest.TestCase):
    """Kernel, admissibility and compactness helpers"""

    def test_kernel_basis(self):
        basis = kernel_basis(np.array([[1.0, 1.0]]))
        self.assertEqual(basis.shape, (1, 2))
        np.testing.assert_allclose(np.array([[1.0, 1.0]]) @ basis.T, 0.0, atol=1e-12)
        self.assertEqual(kernel_basis(np.eye(2)).shape[0], 0)

    def test_admissibility(self):
        p = example_instance("gaussian")
        self.assertTrue(check_admissibility(p).passed)
        log_only = make_instance([[1]], [[(1, "inf")]], fields=[ExternalField(alpha=1.0)])
        result = check_admissibility(log_only)
        self.assertEqual(result.status, CheckStatus.FAIL)
        self.assertEqual(result.witness, [False])

    def test_unbounded_K(self):
        p = make_instance([[1, 0], [0, 1]], [[(-1, 1)], [(2, 3)]], A=[[1, -1]], a=[0])
        K = check_K(p)
        self.assertTrue(K.feasible)
        self.assertFalse(K.compact)
        np.testing.assert_allclose(K.recession_direction, [1.0, 1.0])
        self.assertFalse(run_all_checks(p).existence_guaranteed)

    def test_support_compactness(self):
        self.assertTrue(check_support_compactness(example_instance("gaussian")))
        p = make_instance(
            [[1, -0.5], [-0.5, 1]], [[("-inf", 0)], [(0, "inf")]],
            fields=[ExternalField((0, 0, 1)), ExternalField((0, 0, 1))],
        )
        self.assertFalse(check_support_compactness(p))


class TestReport(unittest.TestCase):
    """Serialized assumption report"""

    def test_report_dict(self):
        report = run_all_checks(example_instance("example0"))
        data = report.to_dict()
        self.assertEqual(data["H1"]["status"], "fail")
        self.assertEqual(data["H1"]["violating_set"], [1, 2])
        self.assertTrue(data["existence"])
        self.assertFalse(data["uniqueness"])
        json.dumps(to_jsonable(data))
        self.assertIn("H1", report.to_text())


def random_graph(rng, max_vertices=5, max_edges=6):
    n = int(rng.integers(2, max_vertices + 1))
    d = int(rng.integers(2, max_edges + 1))
    edges = []
    while len(edges) < d:
        u, v = rng.integers(0, n, size=2)
        if u != v:
            edges.append((int(u), int(v)))
    return DirectedMultigraph(n, tuple(edges))


def random_sets(rng, d):
    """One or two integer-aligned intervals per component, so touching and overlap are common"""
    sets = []
    for _ in range(d):
        pieces = []
        for _ in range(int(rng.integers(1, 3))):
            start = int(rng.integers(0, 6))
            pieces.append((float(start), float(start + rng.integers(1, 3))))
        sets.append(normalize_interval_union(pieces))
    return tuple(sets)


class TestRandomInstances(unittest.TestCase):
    """Implications between the hypotheses on random graph-generated instances"""

    def instance(self, rng, g, K=None):
        fields = tuple(ExternalField() for _ in range(g.d))
        return ProblemInstance(random_sets(rng, g.d), interaction_from_graph(g), fields, K or MassPolyhedron.simplex(g.d))

    def test_cij0_is_stronger(self):
        rng = np.random.default_rng(17)
        seen = 0
        for _ in range(300):
            p = self.instance(rng, random_graph(rng))
            if not check_cij0(p).passed:
                continue
            seen += 1
            self.assertTrue(check_compatNS(p).passed)
            self.assertTrue(check_H1(p).passed)
        self.assertGreater(seen, 0)

    def test_image_equality_gives_H2(self):
        rng = np.random.default_rng(23)
        seen = 0
        for _ in range(150):
            g = random_graph(rng)
            A = incidence_matrix(g)
            K = MassPolyhedron(A, A @ rng.uniform(0.5, 2.0, size=g.d))
            p = self.instance(rng, g, K)
            self.assertTrue(check_image_equality(p))
            report = check_K(p)
            self.assertTrue(report.feasible)
            if not report.compact:
                continue
            seen += 1
            self.assertTrue(check_H2(p).passed)
        self.assertGreater(seen, 0)

    def test_cycle_form_of_H1_matches_rank_form(self):
        rng = np.random.default_rng(31)
        failures = 0
        for _ in range(300):
            g = random_graph(rng)
            p = self.instance(rng, g)
            by_cycles, by_rank = check_H1(p, g), check_H1(p)
            self.assertEqual(by_cycles.status, by_rank.status)
            failures += by_rank.status == CheckStatus.FAIL
        self.assertGreater(failures, 0)


def run_tests():
    """Run all tests"""
    test_suite = unittest.TestSuite()
    for test_class in (TestFixtureVerdicts, TestIndividualChecks, TestReport, TestRandomInstances):
        test_suite.addTests(unittest.TestLoader().loadTestsFromTestCase(test_class))
    result = unittest.TextTestRunner(verbosity=2).run(test_suite)
    return result.wasSuccessful()


if __name__ == "__main__":
    sys.exit(0 if run_tests() else 1)
