"""
Tests for detector ensembles, Helstrom discrimination and the duality point.
"""
import unittest

import numpy as np

from app.core.discrimination import (
    DetectorEnsemble,
    PovmSet,
    bagan_bound,
    duality_point,
    extract_ensemble,
    helstrom_povm,
    helstrom_success,
    optimize_povm,
    povm_success,
    pretty_good_measurement,
)
from app.core.exceptions import (
    DimensionError,
    HypothesisCountError,
    InvalidPovmError,
    PriorError,
)
from app.core.qmath import PureState, ket, random_pure_state
from app.core.state_prep import (
    SourceSpec,
    path_detector_density,
    prepare,
    state_class,
    theta_grid,
)
from app.core.utils import STREAM_RANDOM_STATES, make_generator


def _trine():
    return [PureState([np.cos(2 * np.pi * k / 3), np.sin(2 * np.pi * k / 3)]) for k in range(3)]


class TestEnsembles(unittest.TestCase):
    """Test DetectorEnsemble, PovmSet and extract_ensemble."""

    def test_invalid_priors(self):
        """Test that priors must form a probability vector."""
        with self.assertRaises(PriorError):
            DetectorEnsemble([0.6, 0.6], (ket('H'), ket('V')))
        with self.assertRaises(DimensionError):
            DetectorEnsemble([0.5, 0.5], (ket('H'),))

    def test_invalid_povm(self):
        """Test completeness, positivity and Hermiticity checks."""
        with self.assertRaises(InvalidPovmError):
            PovmSet((np.diag([1.0, 0.0]), np.diag([0.0, 0.5])))
        with self.assertRaises(InvalidPovmError):
            PovmSet((np.diag([1.5, 0.0]), np.diag([-0.5, 1.0])))
        with self.assertRaises(InvalidPovmError):
            PovmSet((np.array([[0.5, 0.5], [0.0, 0.5]]), np.array([[0.5, -0.5], [0.0, 0.5]])))

    def test_extract_class_state(self):
        """Test that the extracted priors reproduce ζ of the prepared state."""
        prepared = prepare(state_class('II'), 0.3)
        ensemble = extract_ensemble(prepared)
        self.assertEqual(ensemble.n_hypotheses, 2)
        self.assertAlmostEqual(np.sqrt(ensemble.priors[0] / ensemble.priors[1]), prepared.zeta, delta=1e-10)
        self.assertAlmostEqual(float(np.sum(ensemble.priors)), 1.0, delta=1e-12)

    def test_extract_zero_prior(self):
        """Test that a vanishing branch is flagged and carries I/d."""
        prepared = prepare(state_class('III'), 0.0)
        ensemble = extract_ensemble(prepared)
        self.assertEqual(ensemble.zero_prior, (True, False))
        np.testing.assert_allclose(ensemble.states[0].matrix, np.eye(2) / 2)


class TestHelstrom(unittest.TestCase):
    """Test the two-hypothesis Helstrom solution."""

    def test_reference_ensembles(self):
        """Test orthogonal and identical detector states."""
        orthogonal = DetectorEnsemble([0.5, 0.5], (ket('H'), ket('V')))
        self.assertAlmostEqual(helstrom_success(orthogonal), 1.0, delta=1e-12)
        identical = DetectorEnsemble([0.5, 0.5], (ket('D'), ket('D')))
        self.assertAlmostEqual(helstrom_success(identical), 0.5, delta=1e-12)
        biased = DetectorEnsemble([0.7, 0.3], (ket('D'), ket('D')))
        self.assertAlmostEqual(helstrom_success(biased), 0.7, delta=1e-12)

    def test_pure_state_formula(self):
        """Test ½(1 + sqrt(1 − 4 p1 p2 |⟨a|b⟩|²)) for random pure pairs."""
        rng = make_generator(13, STREAM_RANDOM_STATES)
        for _ in range(20):
            p1 = rng.uniform(0.05, 0.95)
            a, b = random_pure_state(2, rng), random_pure_state(2, rng)
            ensemble = DetectorEnsemble([p1, 1.0 - p1], (a, b))
            overlap = abs(a.inner(b)) ** 2
            expected = 0.5 * (1.0 + np.sqrt(1.0 - 4.0 * p1 * (1.0 - p1) * overlap))
            self.assertAlmostEqual(helstrom_success(ensemble), expected, delta=1e-12)

    def test_povm_attains_bound(self):
        """Test that the Helstrom projectors reach the Helstrom success probability."""
        rng = make_generator(14, STREAM_RANDOM_STATES)
        for _ in range(10):
            p1 = rng.uniform(0.1, 0.9)
            ensemble = DetectorEnsemble([p1, 1.0 - p1], (random_pure_state(2, rng), random_pure_state(2, rng)))
            povm = helstrom_povm(ensemble)
            self.assertAlmostEqual(povm_success(ensemble, povm), helstrom_success(ensemble), delta=1e-12)
            np.testing.assert_allclose(povm.elements[0] @ povm.elements[0], povm.elements[0], atol=1e-10)

    def test_tie_goes_to_first(self):
        """Test that a zero Helstrom operator assigns everything to Π1."""
        identical = DetectorEnsemble([0.5, 0.5], (ket('H'), ket('H')))
        povm = helstrom_povm(identical)
        np.testing.assert_allclose(povm.elements[0], np.eye(2), atol=1e-12)

    def test_two_hypotheses_only(self):
        """Test that three hypotheses are rejected."""
        ensemble = DetectorEnsemble(np.full(3, 1 / 3), tuple(_trine()))
        with self.assertRaises(HypothesisCountError):
            helstrom_success(ensemble)
        with self.assertRaises(HypothesisCountError):
            helstrom_povm(ensemble)


class TestPovmOptimizer(unittest.TestCase):
    """Test the pretty-good measurement and the iterative optimizer."""

    def test_trine(self):
        """Test the optimal success probability 2/3 of the trine."""
        ensemble = DetectorEnsemble(np.full(3, 1 / 3), tuple(_trine()))
        self.assertAlmostEqual(povm_success(ensemble, pretty_good_measurement(ensemble)), 2 / 3, delta=1e-10)
        result = optimize_povm(ensemble)
        self.assertAlmostEqual(result.p_success, 2 / 3, delta=1e-9)
        self.assertEqual(len(result.povm), 3)

    def test_matches_helstrom(self):
        """Test that the default optimizer reaches the Helstrom bound for two hypotheses."""
        rng = make_generator(31, STREAM_RANDOM_STATES)
        for _ in range(100):
            p1 = rng.uniform(0.2, 0.8)
            ensemble = DetectorEnsemble([p1, 1.0 - p1], (random_pure_state(2, rng), random_pure_state(2, rng)))
            result = optimize_povm(ensemble)
            optimum = helstrom_success(ensemble)
            self.assertLessEqual(result.p_success, optimum + 1e-9)
            self.assertAlmostEqual(result.p_success, optimum, delta=1e-6)

    def test_never_below_guessing(self):
        """Test that the result is at least the largest prior."""
        ensemble = DetectorEnsemble([0.8, 0.2], (ket('H'), ket('D')))
        result = optimize_povm(ensemble, max_iters=50)
        self.assertGreaterEqual(result.p_success, 0.8 - 1e-12)
        self.assertGreaterEqual(result.p_success,
                                povm_success(ensemble, pretty_good_measurement(ensemble)) - 1e-12)


class TestDualityPoint(unittest.TestCase):
    """Test C² + P² against (1 − 1/N)²."""

    def test_bound(self):
        """Test the bound for two and three paths."""
        self.assertAlmostEqual(bagan_bound(2), 0.25)
        self.assertAlmostEqual(bagan_bound(3), 4 / 9)

    def test_pure_states_saturate(self):
        """Test C² + P² = 1/4 for every pure state class and angle."""
        for label in ('I', 'II', 'III'):
            chosen = state_class(label)
            for theta in np.linspace(0.0, np.pi / 4, 9):
                point = duality_point(prepare(chosen, theta))
                self.assertAlmostEqual(point.sum_of_squares, 0.25, delta=1e-10)
                self.assertTrue(0.0 <= point.coherence <= 0.5 + 1e-12)
                self.assertTrue(0.0 <= point.path_info <= 0.5 + 1e-12)

    def test_haar_random_pure_states(self):
        """Test C² + P² = 1/4 for Haar-random pure two-qubit states."""
        rng = make_generator(29, STREAM_RANDOM_STATES)
        for _ in range(200):
            point = duality_point(random_pure_state(4, rng))
            self.assertAlmostEqual(point.sum_of_squares, 0.25, delta=1e-9)

    def test_pbs_sweep_is_monotone(self):
        """Test that C rises and P falls as ζ goes from 0 to 1 along class III."""
        chosen = state_class('III')
        points = [duality_point(prepare(chosen, theta)) for theta in np.linspace(0.0, np.pi / 8, 11)]
        self.assertTrue(np.all(np.diff([p.zeta for p in points]) > 0.0))
        self.assertTrue(np.all(np.diff([p.coherence for p in points]) > 0.0))
        self.assertTrue(np.all(np.diff([p.path_info for p in points]) < 0.0))

    def test_window_sweeps_are_monotone(self):
        """Test that C falls and P rises as ζ moves away from 1 along the class I and II sweeps."""
        for label in ('I', 'II'):
            chosen = state_class(label)
            points = [duality_point(prepare(chosen, theta)) for theta in theta_grid(21)]
            below = sorted((p for p in points if p.zeta <= 1.0), key=lambda p: -p.zeta)
            above = sorted((p for p in points if p.zeta >= 1.0), key=lambda p: p.zeta)
            for side in (below, above):
                self.assertGreater(len(side), 5)
                self.assertTrue(np.all(np.diff([p.coherence for p in side]) <= 1e-12))
                self.assertTrue(np.all(np.diff([p.path_info for p in side]) >= -1e-12))

    def test_window_coherence_ceiling(self):
        """Test that six windows raise the coherence ceiling and widen the range of P."""
        sweeps = {}
        for label in ('I', 'II'):
            chosen = state_class(label)
            a, b = chosen.channel.amplitudes
            balanced = duality_point(prepare(chosen, np.pi / 8))
            self.assertAlmostEqual(balanced.zeta, 1.0, delta=1e-12)
            self.assertAlmostEqual(balanced.coherence, 0.5 * (a ** 2 - b ** 2) / (a ** 2 + b ** 2), delta=1e-10)
            sweeps[label] = [duality_point(prepare(chosen, theta)) for theta in theta_grid(21)]
        max_c = {label: max(p.coherence for p in points) for label, points in sweeps.items()}
        max_p = {label: max(p.path_info for p in points) for label, points in sweeps.items()}
        min_p = {label: min(p.path_info for p in points) for label, points in sweeps.items()}
        self.assertAlmostEqual(max_c['I'], 0.2871, delta=5e-4)
        self.assertAlmostEqual(max_c['II'], 0.3767, delta=5e-4)
        self.assertGreater(max_c['II'], max_c['I'])
        self.assertLess(min_p['II'], min_p['I'])
        self.assertGreaterEqual(max_p['II'] - min_p['II'], max_p['I'] - min_p['I'])
        for label in ('I', 'II'):
            self.assertAlmostEqual(max_p[label], 0.5, delta=1e-12)

    def test_pbs_endpoints(self):
        """Test full path information at ζ = 0 and full coherence at ζ = 1 for class III."""
        chosen = state_class('III')
        start = duality_point(prepare(chosen, 0.0))
        self.assertEqual(start.zeta, 0.0)
        self.assertAlmostEqual(start.coherence, 0.0, delta=1e-12)
        self.assertAlmostEqual(start.path_info, 0.5, delta=1e-12)
        balanced = duality_point(prepare(chosen, np.pi / 8))
        self.assertAlmostEqual(balanced.coherence, 0.5, delta=1e-12)
        self.assertAlmostEqual(balanced.path_info, 0.0, delta=1e-12)

    def test_pbs_closed_form(self):
        """Test C = |sin4θ|/2 and P = |cos4θ|/2 for class III."""
        chosen = state_class('III')
        for theta in np.linspace(0.01, np.pi / 4 - 0.01, 7):
            point = duality_point(prepare(chosen, theta))
            self.assertAlmostEqual(point.coherence, abs(np.sin(4 * theta)) / 2, delta=1e-10)
            self.assertAlmostEqual(point.path_info, abs(np.cos(4 * theta)) / 2, delta=1e-10)

    def test_noisy_states_below_bound(self):
        """Test that white noise pulls C² + P² below 1/4."""
        spec = SourceSpec.from_noise_weight(0.05)
        for label in ('I', 'II', 'III'):
            for theta in (0.1, np.pi / 8, 0.7):
                point = duality_point(prepare(state_class(label), theta, spec))
                self.assertLess(point.sum_of_squares, 0.25)

    def test_detector_states(self):
        """Test orthogonal and identical detectors with equal priors."""
        marked = duality_point(path_detector_density([0.5, 0.5], [ket('H'), ket('V')]))
        self.assertAlmostEqual(marked.coherence, 0.0, delta=1e-12)
        self.assertAlmostEqual(marked.path_info, 0.5, delta=1e-12)
        self.assertAlmostEqual(marked.zeta, 1.0, delta=1e-12)
        unmarked = duality_point(path_detector_density([0.5, 0.5], [ket('H'), ket('H')]))
        self.assertAlmostEqual(unmarked.coherence, 0.5, delta=1e-12)
        self.assertAlmostEqual(unmarked.path_info, 0.0, delta=1e-12)

    def test_trine_three_paths(self):
        """Test C = 1/3 and P = 1/3 for three paths marked by trine states."""
        rho = path_detector_density(np.full(3, 1 / 3), _trine())
        point = duality_point(rho, 3)
        self.assertAlmostEqual(point.coherence, 1 / 3, delta=1e-9)
        self.assertAlmostEqual(point.p_success, 2 / 3, delta=1e-8)
        self.assertLessEqual(point.sum_of_squares, bagan_bound(3) + 1e-9)
        self.assertEqual(point.n_paths, 3)

    def test_random_three_path_states(self):
        """Test the inequality for random three-path states."""
        rng = make_generator(41, STREAM_RANDOM_STATES)
        for _ in range(200):
            priors = rng.dirichlet(np.ones(3))
            detectors = [random_pure_state(3, rng) for _ in range(3)]
            point = duality_point(path_detector_density(priors, detectors), 3, max_iters=200)
            self.assertLessEqual(point.sum_of_squares, bagan_bound(3) + 1e-9)
            self.assertGreaterEqual(point.path_info, -1e-12)


if __name__ == '__main__':
    unittest.main()
