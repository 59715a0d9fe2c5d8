"""Independent reference computations shared by several test modules."""

import math

import numpy as np

from cfpos.gpr import GprHyper


def random_instance(gen, K, D=3):
    X = gen.normal(size=(K, D))
    y = gen.normal(size=K)
    hyper = GprHyper(*np.exp(gen.uniform(-1, 1, 3)))
    return X, y, hyper


def joint_conditional(X, labels, hyper, x_star):
    """Posterior of f(x*) by conditioning the explicit (K+1)-dim joint Gaussian."""
    K = len(X)
    pts = np.vstack([X, x_star])
    cov = np.empty((K + 1, K + 1))
    for i in range(K + 1):
        for j in range(K + 1):
            cov[i, j] = hyper.signal_var * math.exp(-np.sum((pts[i] - pts[j]) ** 2) / (2 * hyper.length_scale))
    cov[:K, :K] += hyper.noise_var * np.eye(K)
    offset = labels.mean()
    inv = np.linalg.inv(cov[:K, :K])
    mean = offset + cov[K, :K] @ inv @ (labels - offset)
    var = cov[K, K] - cov[K, :K] @ inv @ cov[:K, K]
    return mean, var
