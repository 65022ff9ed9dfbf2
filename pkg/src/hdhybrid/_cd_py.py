"""Pure NumPy coordinate-descent sweep, the fallback for hdhybrid._cd_fast.

Implements exactly the same update rule as the compiled kernel: one full
cyclic sweep of proximal coordinate descent over a quadratic majorization
of the weighted logistic loss, soft-thresholding each coordinate. The
weighted residual is recomputed lazily, only after the linear scores
actually change.
"""

import numpy as np

IS_COMPILED = False


def _expit(z):
    out = np.empty_like(z)
    pos = z >= 0
    neg = ~pos
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[neg])
    out[neg] = ez / (1.0 + ez)
    return out


def cd_sweep(X, y, u, scores, w, curvature, lam_l1, lam_l2, intercept, order):
    """One cyclic sweep; mutates scores and w in place.

    Parameters mirror the compiled kernel: X is (n, p) float64, u holds
    normalized sample weights (sum 1), curvature holds the per-coordinate
    majorization constants 0.25 * sum_i u_i x_ij^2, lam_l1 = lambda*alpha
    and lam_l2 = lambda*(1-alpha). Returns (intercept, max_delta).
    """
    residual = u * (_expit(scores) - y)
    max_delta = 0.0

    g = residual.sum()
    delta = -4.0 * g
    if delta != 0.0:
        intercept += delta
        scores += delta
        residual = u * (_expit(scores) - y)
    max_delta = abs(delta)

    for j in order:
        hj = curvature[j]
        denom = hj + lam_l2
        if denom <= 0.0:
            continue
        g = float(residual @ X[:, j])
        z = hj * w[j] - g
        if z > lam_l1:
            wn = (z - lam_l1) / denom
        elif z < -lam_l1:
            wn = (z + lam_l1) / denom
        else:
            wn = 0.0
        d = wn - w[j]
        if d != 0.0:
            scores += d * X[:, j]
            w[j] = wn
            residual = u * (_expit(scores) - y)
            if abs(d) > max_delta:
                max_delta = abs(d)
    return intercept, max_delta
