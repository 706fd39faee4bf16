import numpy as np

from hmmlab.hmm import Hmm


def random_cov(gen, scale=1.0):
    a = gen.normal(size=(2, 2))
    cov = scale * (a @ a.T + 0.5 * np.eye(2))
    return 0.5 * (cov + cov.T)


def random_hmm(gen, k, spread=10.0, scale=1.0):
    return Hmm.from_arrays(
        gen.dirichlet(np.ones(k)),
        gen.dirichlet(np.ones(k), size=k),
        gen.uniform(0.0, spread, size=(k, 2)),
        [random_cov(gen, scale) for _ in range(k)],
    )


def unit_hmm(mean=(0.0, 0.0), cov=None):
    return Hmm.from_arrays([1.0], [[1.0]], [mean], [np.eye(2) if cov is None else cov])


def separated_hmm(std=5.0):
    """Three ROIs 120 px apart with small isotropic spread."""
    return Hmm.from_arrays(
        [0.5, 0.3, 0.2],
        [[0.6, 0.3, 0.1], [0.2, 0.6, 0.2], [0.3, 0.2, 0.5]],
        [[130.0, 120.0], [250.0, 120.0], [190.0, 230.0]],
        [np.diag([std ** 2, (1.2 * std) ** 2])] * 3,
    )
