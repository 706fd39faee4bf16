"""Known parameter distortions of a ground-truth HMM.

Each distortion hits its nominal size exactly: mean shift alpha (pixels),
eigenvalue exponent 1 +/- beta, and halved L1 delta (prior) or epsilon
(every transition row).
"""
import logging

import numpy as np

from .exceptions import DistortionInfeasible
from .hmm import GaussianEmission, Hmm

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 1000


def _targets(h, roi):
    if roi is None:
        return range(h.K)
    if not 0 <= roi < h.K:
        raise DistortionInfeasible(f"ROI {roi} outside 0..{h.K - 1}")
    return [roi]


def distort_mean(h, alpha, rng, roi=None):
    """Move each ROI mean by alpha pixels along its own random unit direction."""
    if alpha < 0:
        raise DistortionInfeasible(f"alpha must be non-negative, got {alpha}")
    if alpha == 0:
        return h
    gen = rng.generator
    emissions = list(h.emissions)
    for j in _targets(h, roi):
        angle = gen.uniform(0.0, 2.0 * np.pi)
        direction = np.array([np.cos(angle), np.sin(angle)])
        emissions[j] = GaussianEmission(emissions[j].mean + alpha * direction, emissions[j].cov)
    return Hmm(h.prior, h.transition, tuple(emissions))


def distort_cov(h, beta, rng, roi=None):
    """Raise each ROI's covariance eigenvalues to the power 1 + beta * r, r = +/-1 per ROI."""
    if beta < 0:
        raise DistortionInfeasible(f"beta must be non-negative, got {beta}")
    if beta == 0:
        return h
    gen = rng.generator
    emissions = list(h.emissions)
    for j in _targets(h, roi):
        sign = 1.0 if gen.random() < 0.5 else -1.0
        eigvals, eigvecs = np.linalg.eigh(emissions[j].cov)
        if np.any(eigvals <= 0):
            raise DistortionInfeasible(f"covariance {j} has non-positive eigenvalues")
        scaled = eigvals ** (1.0 + beta * sign)
        cov = eigvecs @ np.diag(scaled) @ eigvecs.T
        emissions[j] = GaussianEmission(emissions[j].mean, 0.5 * (cov + cov.T))
    return Hmm(h.prior, h.transition, tuple(emissions))


def max_shift(p):
    """Largest halved L1 reachable from probability vector p."""
    return 1.0 - float(np.min(p))


def shift_mass(p, delta, gen):
    """Random simplex point at halved L1 distance exactly delta from p.

    A zero-sum direction with i.i.d. normal components is rescaled to
    sum |r| = 2 delta; draws leaving the simplex are rejected.
    """
    p = np.asarray(p, dtype=float)
    if delta == 0:
        return p.copy()
    if len(p) < 2 or delta > max_shift(p) + 1e-15:
        raise DistortionInfeasible(
            f"halved L1 of {delta} unreachable from {np.round(p, 6).tolist()} (max {max_shift(p):.6g})"
        )
    for attempt in range(MAX_ATTEMPTS):
        r = gen.standard_normal(len(p))
        r -= r.mean()
        total = np.abs(r).sum()
        if total == 0:
            continue
        shifted = p + (2.0 * delta / total) * r
        if np.all(shifted >= 0) and np.all(shifted <= 1):
            return shifted
        logger.debug('rejected mass shift draw %d', attempt)
    raise DistortionInfeasible(f"no valid shift of size {delta} after {MAX_ATTEMPTS} draws")


def distort_prior(h, delta, rng):
    """Shift prior mass so that the halved L1 to the original is delta."""
    if delta < 0:
        raise DistortionInfeasible(f"delta must be non-negative, got {delta}")
    return Hmm(shift_mass(h.prior, delta, rng.generator), h.transition, h.emissions)


def distort_trans(h, eps, rng):
    """Shift mass within every transition row so each row's halved L1 is eps."""
    if eps < 0:
        raise DistortionInfeasible(f"epsilon must be non-negative, got {eps}")
    gen = rng.generator
    rows = np.array([shift_mass(row, eps, gen) for row in h.transition])
    return Hmm(h.prior, rows, h.emissions)


def apply_distortion(h, spec, rng):
    """Dispatch a DistortionSpec."""
    if spec.kind == 'roi_mean':
        return distort_mean(h, spec.parameter, rng, roi=spec.roi)
    if spec.kind == 'roi_cov':
        return distort_cov(h, spec.parameter, rng, roi=spec.roi)
    if spec.kind == 'prior':
        return distort_prior(h, spec.parameter, rng)
    return distort_trans(h, spec.parameter, rng)
