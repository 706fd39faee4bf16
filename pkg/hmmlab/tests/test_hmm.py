from itertools import product

import numpy as np
from django.test import SimpleTestCase
from scipy.stats import multivariate_normal

from hmmlab.exceptions import DataFormatError, InvalidHmm
from hmmlab.hmm import (
    GaussianEmission,
    Hmm,
    batch_log_likelihood,
    gaussian_logpdf,
    initial_observation_logdensity,
    log_likelihood,
    permute_hmm,
    sample_sequences,
    validate_hmm,
)
from hmmlab.rng import RngStream, derive_seed

from .factories import random_hmm, unit_hmm


def brute_force_log_likelihood(h, seq):
    total = 0.0
    dens = np.array([[multivariate_normal(e.mean, e.cov).pdf(x) for e in h.emissions] for x in seq])
    for path in product(range(h.K), repeat=len(seq)):
        p = h.prior[path[0]] * dens[0, path[0]]
        for t in range(1, len(seq)):
            p *= h.transition[path[t - 1], path[t]] * dens[t, path[t]]
        total += p
    return np.log(total)


class ValidateHmmTests(SimpleTestCase):
    def test_single_state_identity_is_valid(self):
        self.assertTrue(validate_hmm(unit_hmm()).ok)

    def test_prior_not_summing_to_one(self):
        h = Hmm.from_arrays([0.6, 0.5], [[0.5, 0.5], [0.5, 0.5]], [[0, 0], [1, 1]], [np.eye(2)] * 2)
        result = validate_hmm(h)
        self.assertFalse(result.ok)
        self.assertEqual(result.violations[0].invariant, 'prior')
        self.assertIn('prior sums to 1.1', str(result))

    def test_negative_determinant_covariance(self):
        h = unit_hmm(cov=[[1.0, 2.0], [2.0, 1.0]])
        result = validate_hmm(h)
        self.assertEqual([v.invariant for v in result.violations], ['emission.cov'])
        self.assertEqual(result.violations[0].index, 0)
        self.assertIn('not positive definite', str(result))

    def test_bad_row_names_its_index(self):
        h = Hmm.from_arrays([0.5, 0.5], [[0.5, 0.5], [0.7, 0.4]], [[0, 0], [1, 1]], [np.eye(2)] * 2)
        result = validate_hmm(h)
        self.assertEqual([(v.invariant, v.index) for v in result.violations], [('transition', 1)])

    def test_k_mismatch(self):
        h = Hmm([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], (GaussianEmission([0, 0], np.eye(2)),))
        self.assertIn('K', [v.invariant for v in validate_hmm(h).violations])

    def test_raise_for_errors(self):
        with self.assertRaises(InvalidHmm):
            validate_hmm(unit_hmm(cov=[[1.0, 2.0], [2.0, 1.0]])).raise_for_errors()

    def test_arrays_are_read_only(self):
        h = unit_hmm()
        with self.assertRaises(ValueError):
            h.prior[0] = 0.5


class GaussianLogpdfTests(SimpleTestCase):
    def test_standard_normal_at_mean(self):
        self.assertAlmostEqual(gaussian_logpdf(GaussianEmission([0, 0], np.eye(2)), [0, 0]), -1.837877, places=6)

    def test_scaled_identity(self):
        self.assertAlmostEqual(gaussian_logpdf(GaussianEmission([0, 0], 4 * np.eye(2)), [0, 0]), -3.224171, places=6)

    def test_anisotropic_matches_scipy(self):
        cov = [[4.0, 1.0], [1.0, 2.0]]
        expected = multivariate_normal([0, 0], cov).logpdf([1, -1])
        self.assertAlmostEqual(gaussian_logpdf(GaussianEmission([0, 0], cov), [1, -1]), expected, places=12)


class LogLikelihoodTests(SimpleTestCase):
    def test_single_point_at_mean(self):
        self.assertAlmostEqual(log_likelihood(unit_hmm(), [[0.0, 0.0]]), -np.log(2 * np.pi), places=12)

    def test_matches_path_enumeration(self):
        gen = np.random.default_rng(11)
        for _ in range(200):
            h = random_hmm(gen, int(gen.integers(1, 4)), spread=4.0)
            seq = gen.uniform(-1.0, 5.0, size=(int(gen.integers(1, 6)), 2))
            expected = brute_force_log_likelihood(h, seq)
            got = log_likelihood(h, seq)
            self.assertLess(abs(got - expected), 1e-10 * max(1.0, abs(expected)))

    def test_length_one_is_initial_density(self):
        gen = np.random.default_rng(3)
        h = random_hmm(gen, 3)
        p = np.array([4.0, 6.0])
        self.assertAlmostEqual(log_likelihood(h, [p]), initial_observation_logdensity(h, p), places=12)

    def test_initial_density_direct_sum(self):
        h = Hmm.from_arrays([0.3, 0.7], [[0.5, 0.5], [0.5, 0.5]], [[0, 0], [3, 1]], [np.eye(2), [[2.0, 0.3], [0.3, 1.0]]])
        for p in ([0, 0], [1, 1], [3, 1], [-2, 4], [5, -1]):
            direct = sum(w * multivariate_normal(e.mean, e.cov).pdf(p) for w, e in zip(h.prior, h.emissions))
            self.assertAlmostEqual(initial_observation_logdensity(h, p), np.log(direct), places=10)

    def test_identical_components(self):
        h = Hmm.from_arrays([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], [[1, 2], [1, 2]], [np.eye(2)] * 2)
        g = h.emissions[0]
        self.assertAlmostEqual(initial_observation_logdensity(h, [0, 0]), gaussian_logpdf(g, [0, 0]), places=12)

    def test_batch_matches_single(self):
        gen = np.random.default_rng(5)
        h = random_hmm(gen, 3)
        batch = gen.uniform(0, 10, size=(4, 6, 2))
        singles = [log_likelihood(h, seq) for seq in batch]
        np.testing.assert_allclose(batch_log_likelihood(h, batch), singles, rtol=1e-12)

    def test_permutation_invariance(self):
        gen = np.random.default_rng(8)
        h = random_hmm(gen, 3)
        seq = gen.uniform(0, 10, size=(5, 2))
        self.assertAlmostEqual(log_likelihood(permute_hmm(h, [2, 0, 1]), seq), log_likelihood(h, seq), places=10)

    def test_rejects_empty_sequence(self):
        with self.assertRaises(DataFormatError):
            log_likelihood(unit_hmm(), np.zeros((0, 2)))


class SampleSequencesTests(SimpleTestCase):
    def test_shapes(self):
        seqs = sample_sequences(unit_hmm(), 3, 4, RngStream(1))
        self.assertEqual(len(seqs), 3)
        self.assertTrue(all(s.shape == (4, 2) for s in seqs))

    def test_same_stream_same_draws(self):
        h = random_hmm(np.random.default_rng(0), 2)
        a = sample_sequences(h, 5, 5, RngStream(42, 7))
        b = sample_sequences(h, 5, 5, RngStream(42, 7))
        np.testing.assert_array_equal(np.stack(a), np.stack(b))
        c = sample_sequences(h, 5, 5, RngStream(42, 8))
        self.assertFalse(np.array_equal(np.stack(a), np.stack(c)))

    def test_identity_transition_keeps_state(self):
        h = Hmm.from_arrays([0.5, 0.5], np.eye(2), [[0, 0], [1000, 1000]], [np.eye(2)] * 2)
        _, states = sample_sequences(h, 50, 6, RngStream(3), return_states=True)
        self.assertTrue(np.all(states == states[:, :1]))

    def test_first_state_frequencies(self):
        h = Hmm.from_arrays([0.2, 0.3, 0.5], np.full((3, 3), 1 / 3), [[0, 0], [5, 5], [9, 9]], [np.eye(2)] * 3)
        n = 10000
        _, states = sample_sequences(h, n, 2, RngStream(17), return_states=True)
        freq = np.bincount(states[:, 0], minlength=3) / n
        se = np.sqrt(h.prior * (1 - h.prior) / n)
        self.assertTrue(np.all(np.abs(freq - h.prior) < 3 * se))

    def test_single_state_scatter(self):
        h = unit_hmm(mean=(10.0, -5.0), cov=[[4.0, 0.0], [0.0, 1.0]])
        points = np.concatenate(sample_sequences(h, 5000, 2, RngStream(9)))
        np.testing.assert_allclose(points.mean(axis=0), [10.0, -5.0], atol=0.2)
        np.testing.assert_allclose(np.cov(points.T), [[4.0, 0.0], [0.0, 1.0]], atol=0.3)


class RngStreamTests(SimpleTestCase):
    def test_derive_seed_is_stable(self):
        self.assertEqual(derive_seed(1, 2, 3), derive_seed(1, 2, 3))
        self.assertNotEqual(derive_seed(1, 2, 3), derive_seed(1, 3, 2))

    def test_child_ignores_parent_history(self):
        parent = RngStream(5)
        first = parent.child(1).generator.random()
        parent.generator.random(100)
        self.assertEqual(parent.child(1).generator.random(), first)
