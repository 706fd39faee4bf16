"""Gaussian-emission HMMs over 2D fixation points.

Observations are pixel coordinates (D = 2). An HMM holds a prior over the K
hidden states (ROIs), a row-stochastic K x K transition matrix and one 2D
Gaussian per state.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .exceptions import DataFormatError, InvalidHmm

D = 2
LOG_2PI = np.log(2.0 * np.pi)

SIMPLEX_TOL = 1e-12
# smallest eigenvalue must exceed this fraction of the largest
CONDITION_TOL = 1e-9


def _frozen(values, shape=None):
    arr = np.array(values, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GaussianEmission:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'mean', _frozen(self.mean, (D,)))
        object.__setattr__(self, 'cov', _frozen(self.cov, (D, D)))

    @property
    def std(self):
        """Per-axis standard deviations."""
        return np.sqrt(np.diag(self.cov))


@dataclass(frozen=True, eq=False)
class Hmm:
    prior: np.ndarray
    transition: np.ndarray
    emissions: tuple

    def __post_init__(self):
        object.__setattr__(self, 'prior', _frozen(self.prior))
        object.__setattr__(self, 'transition', _frozen(self.transition))
        emissions = tuple(
            e if isinstance(e, GaussianEmission) else GaussianEmission(*e) for e in self.emissions
        )
        object.__setattr__(self, 'emissions', emissions)

    @classmethod
    def from_arrays(cls, prior, transition, means, covs):
        return cls(prior, transition, tuple(GaussianEmission(m, c) for m, c in zip(means, covs)))

    @property
    def K(self):
        return len(self.prior)

    @property
    def means(self):
        return np.array([e.mean for e in self.emissions]).reshape(-1, D)

    @property
    def covs(self):
        return np.array([e.cov for e in self.emissions]).reshape(-1, D, D)

    def __repr__(self):
        return f"Hmm(K={self.K}, prior={np.round(self.prior, 4).tolist()})"


@dataclass(frozen=True)
class Violation:
    invariant: str
    index: int | None
    message: str

    def __str__(self):
        where = '' if self.index is None else f"[{self.index}]"
        return f"{self.invariant}{where}: {self.message}"


@dataclass
class ValidationResult:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return 'valid'
        return '; '.join(str(v) for v in self.violations)

    def raise_for_errors(self):
        if not self.ok:
            raise InvalidHmm(self)


def _check_stochastic(vec, invariant, index, violations):
    if not np.all(np.isfinite(vec)):
        violations.append(Violation(invariant, index, 'non-finite entries'))
        return
    if np.any(vec < 0):
        violations.append(Violation(invariant, index, f"negative entry {vec.min():.6g}"))
    total = vec.sum()
    if abs(total - 1.0) > SIMPLEX_TOL:
        label = 'prior' if invariant == 'prior' else 'row'
        violations.append(Violation(invariant, index, f"{label} sums to {total:.12g}"))


def check_covariance(cov):
    """Return a message describing why cov is unusable, or None."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (D, D) or not np.all(np.isfinite(cov)):
        return 'covariance must be a finite 2x2 matrix'
    scale = max(np.abs(cov).max(), 1.0)
    if abs(cov[0, 1] - cov[1, 0]) > 1e-9 * scale:
        return 'covariance not symmetric'
    det = np.linalg.det(cov)
    if det <= 0 or np.trace(cov) <= 0:
        return f"covariance not positive definite (determinant {det:.6g})"
    eig = np.linalg.eigvalsh(cov)
    if eig[0] < CONDITION_TOL * eig[-1]:
        return f"covariance ill-conditioned (eigenvalues {eig[0]:.3g}, {eig[-1]:.3g})"
    return None


def validate_hmm(h):
    """Check every Hmm invariant; the result names each violation and its index."""
    violations = []
    K = len(h.prior)
    if K < 1:
        violations.append(Violation('K', None, 'at least one state is required'))
        return ValidationResult(violations)
    if h.transition.shape != (K, K):
        violations.append(
            Violation('K', None, f"transition shape {h.transition.shape} does not match K={K}")
        )
    if len(h.emissions) != K:
        violations.append(
            Violation('K', None, f"{len(h.emissions)} emissions for K={K}")
        )
    _check_stochastic(h.prior, 'prior', None, violations)
    if h.transition.shape == (K, K):
        for j, row in enumerate(h.transition):
            _check_stochastic(row, 'transition', j, violations)
    for j, emission in enumerate(h.emissions):
        if not np.all(np.isfinite(emission.mean)):
            violations.append(Violation('emission.mean', j, 'non-finite mean'))
        problem = check_covariance(emission.cov)
        if problem:
            violations.append(Violation('emission.cov', j, problem))
    return ValidationResult(violations)


def as_sequence(points):
    """Coerce points to a (T, 2) float array with T >= 1 and finite entries."""
    seq = np.asarray(points, dtype=float)
    if seq.ndim == 1 and seq.shape[0] == D:
        seq = seq.reshape(1, D)
    if seq.ndim != 2 or seq.shape[1] != D or seq.shape[0] < 1:
        raise DataFormatError(f"a fixation sequence must be a non-empty T x 2 array, got {seq.shape}")
    if not np.all(np.isfinite(seq)):
        raise DataFormatError('fixation sequence contains non-finite points')
    return seq


def permute_hmm(h, order):
    """Relabel states so that new state i is old state order[i]."""
    order = np.asarray(order, dtype=int)
    return Hmm(
        h.prior[order],
        h.transition[np.ix_(order, order)],
        tuple(h.emissions[i] for i in order),
    )


def gaussian_logpdf(g, p):
    """log N(p; mean, cov) in nats."""
    diff = np.asarray(p, dtype=float).reshape(D) - g.mean
    sign, logdet = np.linalg.slogdet(g.cov)
    if sign <= 0:
        raise np.linalg.LinAlgError('singular covariance')
    maha = diff @ np.linalg.solve(g.cov, diff)
    return -0.5 * D * LOG_2PI - 0.5 * logdet - 0.5 * maha


def emission_logpdf(h, seq):
    """(T, K) matrix of log N(x_t; mu_k, Sigma_k)."""
    seq = np.asarray(seq, dtype=float).reshape(-1, D)
    covs = h.covs
    sign, logdet = np.linalg.slogdet(covs)
    if np.any(sign <= 0):
        raise np.linalg.LinAlgError('singular covariance')
    precisions = np.linalg.inv(covs)
    diff = seq[:, None, :] - h.means[None, :, :]
    maha = np.einsum('tki,kij,tkj->tk', diff, precisions, diff)
    return -0.5 * D * LOG_2PI - 0.5 * logdet[None, :] - 0.5 * maha


def safe_log(values):
    with np.errstate(divide='ignore'):
        return np.log(values)


def forward_log(log_prior, log_trans, log_obs):
    """Forward recursion in log space.

    log_obs is (T, K) or a batch (N, T, K) of equal-length sequences.
    Returns the log alphas (same shape) and log p(x) per sequence. The
    inputs may be sub-normalised (VB passes expected log parameters).
    """
    T = log_obs.shape[-2]
    log_alpha = np.empty_like(log_obs)
    log_alpha[..., 0, :] = log_prior + log_obs[..., 0, :]
    for t in range(1, T):
        log_alpha[..., t, :] = (
            logsumexp(log_alpha[..., t - 1, :, None] + log_trans, axis=-2) + log_obs[..., t, :]
        )
    return log_alpha, logsumexp(log_alpha[..., -1, :], axis=-1)


def backward_log(log_trans, log_obs):
    T = log_obs.shape[-2]
    log_beta = np.zeros_like(log_obs)
    for t in range(T - 2, -1, -1):
        nxt = log_obs[..., t + 1, :] + log_beta[..., t + 1, :]
        log_beta[..., t, :] = logsumexp(log_trans + nxt[..., None, :], axis=-1)
    return log_beta


def log_likelihood(h, seq):
    """log p(x) under h, marginalising hidden states with the forward recursion."""
    seq = as_sequence(seq)
    _, logp = forward_log(safe_log(h.prior), safe_log(h.transition), emission_logpdf(h, seq))
    return float(logp)


def batch_log_likelihood(h, batch):
    """log p(x) for each sequence of an (N, T, 2) batch."""
    batch = np.asarray(batch, dtype=float)
    if not np.all(np.isfinite(batch)):
        raise DataFormatError('fixation sequence contains non-finite points')
    n, t, _ = batch.shape
    log_obs = emission_logpdf(h, batch.reshape(n * t, D)).reshape(n, t, h.K)
    _, logp = forward_log(safe_log(h.prior), safe_log(h.transition), log_obs)
    return logp


def initial_observation_logdensity(h, p):
    """log of the first-fixation GMM density, sum_j pi_j N(p; mu_j, Sigma_j)."""
    log_obs = emission_logpdf(h, np.asarray(p, dtype=float).reshape(1, D))[0]
    return float(logsumexp(safe_log(h.prior) + log_obs))


def _draw_categorical(gen, probs, size):
    """Inverse-CDF draws; probs is (size, K) or (K,)."""
    cdf = np.cumsum(probs, axis=-1)
    u = gen.random(size)
    idx = (u[:, None] >= cdf).sum(axis=-1) if cdf.ndim == 2 else np.searchsorted(cdf, u, side='right')
    return np.minimum(idx, probs.shape[-1] - 1)


def sample_sequences(h, n, t, rng, return_states=False):
    """Ancestral sampling of n sequences of length t.

    z_1 ~ pi, z_t ~ a_{z_{t-1}}, x_t ~ N(mu_{z_t}, Sigma_{z_t}).
    """
    if n < 1 or t < 1:
        raise ValueError(f"need n >= 1 and t >= 1, got n={n}, t={t}")
    gen = rng.generator
    states = np.empty((n, t), dtype=int)
    states[:, 0] = _draw_categorical(gen, h.prior, n)
    for step in range(1, t):
        states[:, step] = _draw_categorical(gen, h.transition[states[:, step - 1]], n)
    chol = np.linalg.cholesky(h.covs)
    noise = gen.standard_normal((n, t, D))
    points = h.means[states] + np.einsum('ntij,ntj->nti', chol[states], noise)
    if return_states:
        return list(points), states
    return list(points)
