"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written the slow, textbook way (pure-Python
loops, fsum, explicit enumeration, eigendecompositions) and never calls the
code under test.
"""

import math

import numpy as np


def stats7_oracle(xs):
    """Mean, population std, excess kurtosis, skew, min, max, median."""
    xs = [float(x) for x in xs]
    n = len(xs)
    mean = math.fsum(xs) / n
    m2 = math.fsum((x - mean) ** 2 for x in xs) / n
    m3 = math.fsum((x - mean) ** 3 for x in xs) / n
    m4 = math.fsum((x - mean) ** 4 for x in xs) / n
    std = math.sqrt(m2)
    skew = 0.0 if m2 == 0.0 else m3 / m2 ** 1.5
    kurt = 0.0 if m2 == 0.0 else m4 / m2 ** 2 - 3.0
    ordered = sorted(xs)
    if n % 2:
        median = ordered[n // 2]
    else:
        median = 0.5 * (ordered[n // 2 - 1] + ordered[n // 2])
    return [mean, std, kurt, skew, min(xs), max(xs), median]


def window_count_oracle(n_frames, window_frames=32, stride_frames=8):
    """Count window placements by explicit enumeration."""
    count = 0
    start = 0
    while start + window_frames <= n_frames:
        count += 1
        start += stride_frames
    return count


def nearest_rank_oracle(n, percentile):
    """Smallest 1-based rank r with r/n >= percentile/100, found by scanning."""
    from fractions import Fraction

    target = Fraction(str(percentile)) / 100
    for r in range(1, n + 1):
        if Fraction(r, n) >= target:
            return r
    return n


def pca_reconstruction_mse(X, k):
    """Reconstruction MSE of the top-k principal components (eigh-based)."""
    X = np.asarray(X, dtype=np.float64)
    mu = X.mean(axis=0)
    Xc = X - mu
    C = (Xc.T @ Xc) / X.shape[0]
    _, V = np.linalg.eigh(C)
    Vk = V[:, -k:]
    recon = mu + (Xc @ Vk) @ Vk.T
    return float(np.mean((X - recon) ** 2))


def central_difference_grads(loss_fn, params, h=1e-5):
    """Numerical gradient of loss_fn() wrt every entry of every param array."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat_p, flat_g = p.ravel(), g.ravel()
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            up = loss_fn()
            flat_p[i] = orig - h
            down = loss_fn()
            flat_p[i] = orig
            flat_g[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def max_relative_gradient_error(analytic, numeric, floor=1e-4):
    """Worst relative disagreement, with an absolute floor for tiny gradients."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
