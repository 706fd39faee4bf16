"""Variational Bayesian EM for Gaussian HMMs with selection of K.

Priors: Dirichlet on the initial distribution and on every transition row,
Normal-Wishart on each state's (mean, precision). The number of states is
chosen by the largest free energy (variational lower bound on log p(data))
over a K range with several restarts per K.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln, multigammaln
from sklearn.cluster import KMeans

from .exceptions import DegenerateData, EstimationFailure
from .hmm import D, LOG_2PI, Hmm, backward_log, check_covariance, forward_log
from .rng import RngStream
from .serializers import LearnConfig, VbHyperparams

logger = logging.getLogger(__name__)


@dataclass
class ResolvedPrior:
    """Hyperparameters with data-derived defaults filled in."""
    alpha_prior: np.ndarray  # (K,)
    alpha_trans: np.ndarray  # (K, K)
    m0: np.ndarray  # (2,)
    beta0: float
    W0: np.ndarray  # Wishart scale, E[precision] = nu0 * W0
    nu0: float

    @property
    def W0_inv(self):
        return np.linalg.inv(self.W0)


@dataclass
class Posterior:
    alpha_prior: np.ndarray
    alpha_trans: np.ndarray
    m: np.ndarray  # (K, 2)
    beta: np.ndarray  # (K,)
    W: np.ndarray  # (K, 2, 2)
    nu: np.ndarray  # (K,)
    occupancy: np.ndarray = None  # expected state counts from the last E-step

    @property
    def K(self):
        return len(self.alpha_prior)


@dataclass
class VbemFit:
    posterior: Posterior
    free_energy: float
    trace: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.trace)


@dataclass
class LearnResult:
    estimated: Hmm
    k_hat: int
    free_energy: float
    per_k_free_energy: dict
    iterations_used: int
    fit_k: int


class _Data:
    """Sequences grouped by length so forward-backward runs batched."""

    def __init__(self, sequences):
        if not sequences:
            raise EstimationFailure('no sequences to learn from')
        groups = {}
        for seq in sequences:
            seq = np.asarray(seq, dtype=float).reshape(-1, D)
            if len(seq) == 0:
                raise EstimationFailure('empty sequence')
            groups.setdefault(len(seq), []).append(seq)
        self.batches = [np.stack(groups[t]) for t in sorted(groups)]
        self.points = np.concatenate([b.reshape(-1, D) for b in self.batches])

    @property
    def n_points(self):
        return len(self.points)


def resolve_prior(hp, data, k):
    points = data.points
    m0 = np.mean(points, axis=0) if hp.nw_mean is None else np.asarray(hp.nw_mean, dtype=float)
    if hp.nw_scale is not None:
        W0 = np.asarray(hp.nw_scale, dtype=float)
    else:
        if data.n_points < 2:
            cov = np.eye(D) * hp.fallback_cov
        else:
            cov = np.cov(points.T)
            problem = check_covariance(cov)
            if problem:
                raise DegenerateData(f"degenerate data: pooled {problem}")
        W0 = np.linalg.inv(cov / k)
    return ResolvedPrior(
        alpha_prior=np.full(k, hp.dirichlet_prior_conc),
        alpha_trans=np.full((k, k), hp.dirichlet_trans_conc),
        m0=m0,
        beta0=hp.nw_beta,
        W0=W0,
        nu0=hp.nw_dof,
    )


def _expected_log_det_precision(post):
    _, logdet_W = np.linalg.slogdet(post.W)
    dims = np.arange(1, D + 1)
    return digamma((post.nu[:, None] + 1 - dims[None, :]) / 2).sum(axis=1) + D * np.log(2) + logdet_W


def _expected_log_obs(post, points):
    """E_q[log N(x | mu_k, Lambda_k^-1)] for every point and state."""
    e_logdet = _expected_log_det_precision(post)
    diff = points[:, None, :] - post.m[None, :, :]
    maha = np.einsum('nki,kij,nkj->nk', diff, post.W, diff)
    return 0.5 * e_logdet[None, :] - 0.5 * D * LOG_2PI - 0.5 * (D / post.beta[None, :] + post.nu[None, :] * maha)


def _dirichlet_expected_log(alpha):
    return digamma(alpha) - digamma(alpha.sum(axis=-1, keepdims=True))


def kl_dirichlet(alpha, alpha0):
    a_sum = alpha.sum()
    return (
        gammaln(a_sum) - gammaln(alpha).sum() - gammaln(alpha0.sum()) + gammaln(alpha0).sum()
        + ((alpha - alpha0) * (digamma(alpha) - digamma(a_sum))).sum()
    )


def _wishart_log_norm(W, nu):
    _, logdet = np.linalg.slogdet(W)
    return -0.5 * nu * logdet - 0.5 * nu * D * np.log(2) - multigammaln(0.5 * nu, D)


def kl_wishart(W, nu, W0, nu0):
    _, logdet_W = np.linalg.slogdet(W)
    dims = np.arange(1, D + 1)
    e_logdet = digamma((nu + 1 - dims) / 2).sum() + D * np.log(2) + logdet_W
    return (
        _wishart_log_norm(W, nu) - _wishart_log_norm(W0, nu0)
        + 0.5 * (nu - nu0) * e_logdet - 0.5 * nu * D
        + 0.5 * nu * np.trace(np.linalg.solve(W0, W))
    )


def kl_normal_wishart(m, beta, W, nu, m0, beta0, W0, nu0):
    diff = m - m0
    kl_mean = 0.5 * (
        D * beta0 / beta - D + D * np.log(beta / beta0) + beta0 * nu * diff @ W @ diff
    )
    return kl_mean + kl_wishart(W, nu, W0, nu0)


def _posterior_kl(post, prior):
    total = kl_dirichlet(post.alpha_prior, prior.alpha_prior)
    for j in range(post.K):
        total += kl_dirichlet(post.alpha_trans[j], prior.alpha_trans[j])
        total += kl_normal_wishart(
            post.m[j], post.beta[j], post.W[j], post.nu[j],
            prior.m0, prior.beta0, prior.W0, prior.nu0,
        )
    return total


@dataclass
class _Stats:
    first: np.ndarray  # (K,) expected first-state counts
    trans: np.ndarray  # (K, K) expected transition counts
    counts: np.ndarray  # (K,)
    sum_x: np.ndarray  # (K, 2)
    sum_xx: np.ndarray  # (K, 2, 2)


def _stats_from_responsibilities(batches, resp_batches, pair_batches):
    K = resp_batches[0].shape[-1]
    first = np.zeros(K)
    trans = np.zeros((K, K))
    counts = np.zeros(K)
    sum_x = np.zeros((K, D))
    sum_xx = np.zeros((K, D, D))
    for x, r, xi in zip(batches, resp_batches, pair_batches):
        first += r[:, 0, :].sum(axis=0)
        trans += xi
        counts += r.sum(axis=(0, 1))
        sum_x += np.einsum('ntk,nti->ki', r, x)
        sum_xx += np.einsum('ntk,nti,ntj->kij', r, x, x)
    return _Stats(first, trans, counts, sum_x, sum_xx)


def m_step(stats, prior):
    beta = prior.beta0 + stats.counts
    m = (prior.beta0 * prior.m0[None, :] + stats.sum_x) / beta[:, None]
    W_inv = (
        prior.W0_inv[None, :, :]
        + stats.sum_xx
        + prior.beta0 * np.outer(prior.m0, prior.m0)[None, :, :]
        - np.einsum('k,ki,kj->kij', beta, m, m)
    )
    W_inv = 0.5 * (W_inv + np.swapaxes(W_inv, 1, 2))
    return Posterior(
        alpha_prior=prior.alpha_prior + stats.first,
        alpha_trans=prior.alpha_trans + stats.trans,
        m=m,
        beta=beta,
        W=np.linalg.inv(W_inv),
        nu=prior.nu0 + stats.counts,
    )


def e_step(post, data):
    """Forward-backward under expected log parameters; returns stats and sum log Z."""
    log_pi = _dirichlet_expected_log(post.alpha_prior)
    log_A = _dirichlet_expected_log(post.alpha_trans)
    resp_batches, pair_batches = [], []
    log_z_total = 0.0
    for x in data.batches:
        n, t, _ = x.shape
        log_obs = _expected_log_obs(post, x.reshape(n * t, D)).reshape(n, t, post.K)
        log_alpha, log_z = forward_log(log_pi, log_A, log_obs)
        log_beta = backward_log(log_A, log_obs)
        log_z_total += float(log_z.sum())
        resp_batches.append(np.exp(log_alpha + log_beta - log_z[:, None, None]))
        if t > 1:
            log_xi = (
                log_alpha[:, :-1, :, None]
                + log_A[None, None, :, :]
                + (log_obs[:, 1:, :] + log_beta[:, 1:, :])[:, :, None, :]
                - log_z[:, None, None, None]
            )
            pair_batches.append(np.exp(log_xi).sum(axis=(0, 1)))
        else:
            pair_batches.append(np.zeros((post.K, post.K)))
    return _stats_from_responsibilities(data.batches, resp_batches, pair_batches), log_z_total


def _initial_stats(data, k, rng):
    """k-means from centres drawn among the distinct data points, plus jitter."""
    gen = rng.generator
    pool = np.unique(data.points, axis=0)
    centres = pool[np.sort(gen.choice(len(pool), size=k, replace=False))]
    spread = np.std(data.points, axis=0) if data.n_points > 1 else np.ones(D)
    centres = centres + 1e-3 * np.maximum(spread, 1e-6) * gen.standard_normal(centres.shape)
    kmeans = KMeans(n_clusters=k, init=centres, n_init=1, max_iter=50)
    labels = kmeans.fit_predict(data.points) if k > 1 else np.zeros(data.n_points, dtype=int)
    resp_batches, pair_batches = [], []
    offset = 0
    for x in data.batches:
        n, t, _ = x.shape
        lab = labels[offset:offset + n * t].reshape(n, t)
        offset += n * t
        r = np.eye(k)[lab]
        resp_batches.append(r)
        pair_batches.append(np.einsum('ntj,ntk->jk', r[:, :-1], r[:, 1:]))
    return _stats_from_responsibilities(data.batches, resp_batches, pair_batches)


def vbem_fit(data, k, hp, init=None, rng=None, max_iters=200, free_energy_tol=1e-6):
    """One VBEM run at a fixed number of states.

    data may be a list of sequences or a prepared _Data; init, when given, is
    a _Stats used for the first M-step instead of k-means. The free energy
    trace is non-decreasing up to round-off.
    """
    if k < 1:
        raise ValueError('k must be at least 1')
    if not isinstance(data, _Data):
        data = _Data(data)
    prior = resolve_prior(hp, data, k)
    stats = init if init is not None else _initial_stats(data, k, rng)
    post = m_step(stats, prior)
    stats, log_z = e_step(post, data)
    free_energy = log_z - _posterior_kl(post, prior)
    trace = [free_energy]
    while np.isfinite(free_energy) and len(trace) < max_iters:
        new_post = m_step(stats, prior)
        new_stats, log_z = e_step(new_post, data)
        new_energy = log_z - _posterior_kl(new_post, prior)
        if new_energy < free_energy - 1e-8 * abs(free_energy):
            logger.debug('free energy decreased %.12g -> %.12g at K=%d', free_energy, new_energy, k)
        post, stats = new_post, new_stats
        trace.append(new_energy)
        improvement = new_energy - free_energy
        free_energy = new_energy
        if improvement < free_energy_tol * abs(free_energy):
            break
    if not np.isfinite(free_energy):
        raise EstimationFailure(f"non-finite free energy at K={k}")
    post.occupancy = stats.counts
    return VbemFit(post, float(free_energy), trace)


def posterior_to_point_estimate(post, prune_count_threshold=0.0):
    """Posterior-mean HMM; states whose occupancy is below the threshold are dropped."""
    keep = np.arange(post.K)
    if post.occupancy is not None and prune_count_threshold > 0:
        keep = np.flatnonzero(post.occupancy >= prune_count_threshold)
        if len(keep) == 0:
            keep = np.array([int(np.argmax(post.occupancy))])
        if len(keep) < post.K:
            logger.debug('pruned %d low-occupancy states', post.K - len(keep))
    prior = post.alpha_prior[keep] / post.alpha_prior[keep].sum()
    trans = post.alpha_trans[np.ix_(keep, keep)]
    trans = trans / trans.sum(axis=1, keepdims=True)
    covs = np.linalg.inv(post.W[keep] * post.nu[keep][:, None, None])
    covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    return Hmm.from_arrays(prior, trans, post.m[keep], covs)


def learn_hmm(data, cfg=None, hp=None, rng=None):
    """Select K by free energy over [k_min, k_max] and return the point estimate."""
    cfg = cfg or LearnConfig()
    hp = hp or VbHyperparams()
    rng = rng or RngStream(0)
    prepared = _Data(data)
    resolve_prior(hp, prepared, 1)
    n_distinct = len(np.unique(prepared.points, axis=0))
    k_top = min(cfg.k_max, n_distinct)
    per_k = {}
    best = None
    for k in range(cfg.k_min, cfg.k_max + 1):
        if k > k_top:
            per_k[k] = None
            continue
        best_k = None
        for restart in range(cfg.restarts):
            try:
                fit = vbem_fit(
                    prepared, k, hp, rng=rng.child(k, restart),
                    max_iters=cfg.max_iters, free_energy_tol=cfg.free_energy_tol,
                )
            except DegenerateData:
                raise
            except EstimationFailure as exc:
                logger.debug('K=%d restart %d failed: %s', k, restart, exc)
                continue
            if best_k is None or fit.free_energy > best_k.free_energy:
                best_k = fit
        per_k[k] = None if best_k is None else best_k.free_energy
        if best_k is not None:
            logger.debug('K=%d free energy %.6f after %d iterations', k, best_k.free_energy, best_k.iterations)
            if best is None or best_k.free_energy > best.free_energy:
                best = best_k
    if best is None:
        raise EstimationFailure('every VBEM restart failed')
    estimated = posterior_to_point_estimate(best.posterior, cfg.prune_count_threshold)
    return LearnResult(
        estimated=estimated,
        k_hat=estimated.K,
        free_energy=best.free_energy,
        per_k_free_energy=per_k,
        iterations_used=best.iterations,
        fit_k=best.posterior.K,
    )
