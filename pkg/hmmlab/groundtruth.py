"""Synthetic ground-truth HMMs in stimulus-frame pixel coordinates."""
import logging

import numpy as np

from .exceptions import LabError
from .hmm import Hmm, validate_hmm
from .rng import RngStream

logger = logging.getLogger(__name__)

MAX_PLACEMENTS = 1000


def face_box(spec):
    """(low, high) corners of the face region, centred in the frame and clipped to it."""
    frame = np.asarray(spec.frame, dtype=float)
    size = np.minimum(np.asarray(spec.face_region, dtype=float), frame)
    low = (frame - size) / 2.0
    return low, low + size


def _place_means(k, spec, stds, gen):
    low, high = face_box(spec)
    gap = spec.min_separation * float(stds.max())
    for _ in range(MAX_PLACEMENTS):
        means = gen.uniform(low, high, size=(k, 2))
        if k == 1 or gap == 0:
            return means
        dists = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=-1)
        if dists[np.triu_indices(k, 1)].min() >= gap:
            return means
    raise LabError(f"cannot place {k} ROIs {gap:.1f} px apart inside the face region")


def random_hmm(k, spec, gen):
    stds = gen.uniform(spec.std_range[0], spec.std_range[1], size=(k, 2))
    means = _place_means(k, spec, stds, gen)
    covs = []
    for s in stds:
        angle = gen.uniform(0.0, np.pi)
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        cov = rot @ np.diag(s ** 2) @ rot.T
        covs.append(0.5 * (cov + cov.T))
    conc = np.full(k, spec.dirichlet_conc)
    prior = gen.dirichlet(conc)
    trans = gen.dirichlet(conc, size=k)
    return Hmm.from_arrays(prior / prior.sum(), trans / trans.sum(axis=1, keepdims=True), means, covs)


def generate_ground_truths(spec, rng=None):
    """spec.count HMMs with K drawn from spec.k_choices."""
    rng = rng or RngStream(spec.seed)
    gen = rng.generator
    truths = []
    for i in range(spec.count):
        k = int(gen.choice(spec.k_choices))
        h = random_hmm(k, spec, gen)
        validate_hmm(h).raise_for_errors()
        truths.append(h)
        logger.debug('ground truth %d: K=%d', i, k)
    return truths
