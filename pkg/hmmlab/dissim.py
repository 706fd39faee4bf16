"""Comparing two HMMs.

Whole-sequence KLD rate estimated by sampling, halved L1 between matched
Gaussian ROIs, and unhalved L1 between matched transition matrices and
priors. Matching searches every state permutation; when the state counts
differ, the smaller HMM first gets duplicated states.
"""
from functools import lru_cache
from itertools import combinations_with_replacement, permutations

import numpy as np

from .hmm import Hmm, batch_log_likelihood, sample_sequences
from .serializers import AugmentationPlan, DissimReport

GRID_NODES = 401
BOX_SIGMAS = 5.0


def kld_rate_hmm(true_h, est_h, t, s, rng):
    """Monte-Carlo D_HMM in nats per fixation, with its standard error.

    The estimate is not clamped and can dip slightly below zero.
    """
    if t < 1 or s < 2:
        raise ValueError(f"need t >= 1 and s >= 2, got t={t}, s={s}")
    batch = np.stack(sample_sequences(true_h, s, t, rng))
    ratios = batch_log_likelihood(true_h, batch) - batch_log_likelihood(est_h, batch)
    d_hmm = float(ratios.mean() / t)
    stderr = float(ratios.std(ddof=1) / np.sqrt(s) / t)
    return d_hmm, stderr


def _box(g):
    half = BOX_SIGMAS * g.std
    return g.mean - half, g.mean + half


def _pdf_on_grid(g, xs, ys):
    gx, gy = np.meshgrid(xs, ys, indexing='ij')
    diff = np.stack([gx - g.mean[0], gy - g.mean[1]], axis=-1)
    precision = np.linalg.inv(g.cov)
    maha = np.einsum('...i,ij,...j->...', diff, precision, diff)
    norm = 1.0 / (2.0 * np.pi * np.sqrt(np.linalg.det(g.cov)))
    return norm * np.exp(-0.5 * maha)


def _midpoints(lo, hi, nodes):
    step = (hi - lo) / nodes
    return lo + (np.arange(nodes) + 0.5) * step, step


def _grid(lo, hi, nodes):
    xs, dx = _midpoints(lo[0], hi[0], nodes)
    ys, dy = _midpoints(lo[1], hi[1], nodes)
    return xs, ys, dx * dy


def _boxes_disjoint(g1, g2):
    lo1, hi1 = _box(g1)
    lo2, hi2 = _box(g2)
    return bool(np.any(np.maximum(lo1, lo2) >= np.minimum(hi1, hi2)))


def l1_gaussian(g1, g2, nodes=GRID_NODES):
    """Halved L1 distance between two 2D Gaussians, in [0, 1].

    Midpoint rule on the bounding box of both means +/- 5 per-axis standard
    deviations. Gaussians whose boxes do not intersect count as disjoint.
    """
    if _boxes_disjoint(g1, g2):
        return 1.0
    lo1, hi1 = _box(g1)
    lo2, hi2 = _box(g2)
    xs, ys, cell = _grid(np.minimum(lo1, lo2), np.maximum(hi1, hi2), nodes)
    value = 0.5 * np.abs(_pdf_on_grid(g1, xs, ys) - _pdf_on_grid(g2, xs, ys)).sum() * cell
    return float(min(max(value, 0.0), 1.0))


def overlap_integral(g1, g2, nodes=GRID_NODES):
    """Direct integral of min(p1, p2) over the intersection of both boxes."""
    if _boxes_disjoint(g1, g2):
        return 0.0
    lo1, hi1 = _box(g1)
    lo2, hi2 = _box(g2)
    xs, ys, cell = _grid(np.maximum(lo1, lo2), np.minimum(hi1, hi2), nodes)
    value = np.minimum(_pdf_on_grid(g1, xs, ys), _pdf_on_grid(g2, xs, ys)).sum() * cell
    return float(min(max(value, 0.0), 1.0))


def histogram_intersection(g1, g2):
    """Overlap of two Gaussians, 1 - l1_gaussian."""
    return 1.0 - l1_gaussian(g1, g2)


def l1_discrete(u, v):
    """Unhalved L1 between probability vectors or matrices."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    return float(np.abs(u - v).sum())


@lru_cache(maxsize=16)
def _all_permutations(n):
    return np.array(list(permutations(range(n))), dtype=int).reshape(-1, n)


def _candidates(K, K_est):
    """(side to grow, duplication sources) pairs; every multiset of sources is tried."""
    if K_est < K:
        return [('estimated', src) for src in combinations_with_replacement(range(K_est), K - K_est)]
    if K < K_est:
        return [('true', src) for src in combinations_with_replacement(range(K), K_est - K)]
    return [(None, ())]


def _plan(target, k_small, sources):
    return AugmentationPlan(
        target=target,
        duplications=[(int(src), k_small + i) for i, src in enumerate(sources)],
    )


def augment_states(h, plan):
    """Duplicate states without changing the sequence distribution.

    Each duplication (j, j') halves the incoming probabilities and the prior
    of state j between j and the new state j', copies j's outgoing row to
    j' and copies its emission. New states are appended, so j' must equal
    the current state count.
    """
    duplications = plan.duplications if isinstance(plan, AugmentationPlan) else list(plan)
    prior = np.array(h.prior)
    trans = np.array(h.transition)
    emissions = list(h.emissions)
    for source, new in duplications:
        K = len(prior)
        if not 0 <= source < K:
            raise ValueError(f"duplication source {source} outside 0..{K - 1}")
        if new != K:
            raise ValueError(f"new state index must be {K}, got {new}")
        grown = np.zeros((K + 1, K + 1))
        grown[:K, :K] = trans
        grown[:K, source] = 0.5 * trans[:, source]
        grown[:K, K] = 0.5 * trans[:, source]
        grown[K] = grown[source]
        trans = grown
        half = 0.5 * prior[source]
        prior = np.append(prior, half)
        prior[source] = half
        emissions.append(emissions[source])
    return Hmm(prior, trans, tuple(emissions))


def _roi_costs(true_h, est_h):
    return np.array([
        [l1_gaussian(gt, ge) for ge in est_h.emissions] for gt in true_h.emissions
    ]).reshape(true_h.K, est_h.K)


def match_rois(true_h, est_h):
    """Minimum mean ROI L1 over duplications and permutations.

    Returns (l_roi, permutation, augmentation) where permutation[i] is the
    (augmented) estimated state matched to (augmented) true state i.
    """
    costs = _roi_costs(true_h, est_h)
    K, K_est = costs.shape
    size = max(K, K_est)
    perms = _all_permutations(size)
    rows = np.arange(size)
    best = None
    for target, sources in _candidates(K, K_est):
        if target == 'estimated':
            matrix = costs[:, list(range(K_est)) + list(sources)]
        elif target == 'true':
            matrix = costs[list(range(K)) + list(sources), :]
        else:
            matrix = costs
        totals = matrix[rows, perms].sum(axis=1)
        idx = int(np.argmin(totals))
        if best is None or totals[idx] < best[0]:
            best = (float(totals[idx]), perms[idx], target, sources)
    total, perm, target, sources = best
    plan = None if target is None else _plan(target, min(K, K_est), sources)
    return min(total / size, 1.0), [int(p) for p in perm], plan


def _state_objective(A, pi, A_hat, pi_hat, perms):
    permuted_A = A_hat[perms[:, :, None], perms[:, None, :]]
    trans_l1 = np.abs(A[None, :, :] - permuted_A).sum(axis=(1, 2))
    prior_l1 = np.abs(pi[None, :] - pi_hat[perms]).sum(axis=1)
    return trans_l1, prior_l1


def match_states(true_h, est_h):
    """Permutation (and duplication) minimising Psi(A, P(A_hat)) + Psi(pi, P(pi_hat)).

    Returns (l_trans, l_prior, permutation, augmentation) with
    l_trans = Psi(A, .) / K and l_prior = Psi(pi, .) under the single best pair.
    """
    K, K_est = true_h.K, est_h.K
    size = max(K, K_est)
    perms = _all_permutations(size)
    best = None
    for target, sources in _candidates(K, K_est):
        plan = None if target is None else _plan(target, min(K, K_est), sources)
        true_aug = augment_states(true_h, plan) if target == 'true' else true_h
        est_aug = augment_states(est_h, plan) if target == 'estimated' else est_h
        trans_l1, prior_l1 = _state_objective(
            true_aug.transition, true_aug.prior, est_aug.transition, est_aug.prior, perms
        )
        totals = trans_l1 + prior_l1
        idx = int(np.argmin(totals))
        if best is None or totals[idx] < best[0]:
            best = (float(totals[idx]), float(trans_l1[idx]), float(prior_l1[idx]), perms[idx], plan)
    _, trans_l1, prior_l1, perm, plan = best
    return trans_l1 / size, prior_l1, [int(p) for p in perm], plan


def compare(true_h, est_h, t, s, rng):
    """Every metric between a true and an estimated HMM in one report.

    ROI matching and state matching are optimised separately and may pick
    different permutations.
    """
    d_hmm, stderr = kld_rate_hmm(true_h, est_h, t, s, rng)
    l_roi, roi_perm, roi_plan = match_rois(true_h, est_h)
    l_trans, l_prior, state_perm, state_plan = match_states(true_h, est_h)
    return DissimReport(
        d_hmm=d_hmm,
        mc_stderr=stderr,
        l_roi=l_roi,
        l_trans=l_trans,
        l_prior=l_prior,
        roi_permutation=roi_perm,
        roi_augmentation=roi_plan,
        state_permutation=state_perm,
        state_augmentation=state_plan,
        k_true=true_h.K,
        k_est=est_h.K,
    )


def report_interpretation(report, kld_threshold=0.05, overlap_threshold=0.10):
    """Label a report against the close/far interpretation thresholds."""
    return {
        'same_strategy': report.d_hmm <= kld_threshold,
        'rois_overlap': report.l_roi <= overlap_threshold,
        'transitions_overlap': report.l_trans <= overlap_threshold,
        'priors_overlap': report.l_prior <= overlap_threshold,
    }
