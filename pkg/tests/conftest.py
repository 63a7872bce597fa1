"""Shared scalar helpers for the pencil-and-paper model fixtures.

These deliberately avoid the library's linear algebra: 2x2 systems are
solved in closed form with plain floats so the expected values are
independent of the code under test.
"""

import math


def k_se(x, xp, alpha, lengthscale):
    """Scalar squared-exponential kernel value."""
    return alpha ** 2 * math.exp(-(((x - xp) / lengthscale) ** 2))


def solve2(a11, a12, a22, r1, r2):
    """Solve the symmetric 2x2 system [[a11,a12],[a12,a22]] v = (r1,r2)."""
    det = a11 * a22 - a12 * a12
    return (a22 * r1 - a12 * r2) / det, (a11 * r2 - a12 * r1) / det


def gp2_predict(xs, x1, x2, y1, y2, beta0, beta, alpha, lengthscale, d1, d2):
    """Two-point GP prediction with per-point diagonal additions d1, d2.

    Returns (mean, variance) at xs; variance excludes the diagonal
    additions at the new point.
    """
    m1 = beta0 + beta * x1
    m2 = beta0 + beta * x2
    a11 = alpha ** 2 + d1
    a22 = alpha ** 2 + d2
    a12 = k_se(x1, x2, alpha, lengthscale)
    v1, v2 = solve2(a11, a12, a22, y1 - m1, y2 - m2)
    ks1 = k_se(xs, x1, alpha, lengthscale)
    ks2 = k_se(xs, x2, alpha, lengthscale)
    mean = beta0 + beta * xs + ks1 * v1 + ks2 * v2
    w1, w2 = solve2(a11, a12, a22, ks1, ks2)
    var = alpha ** 2 - (ks1 * w1 + ks2 * w2)
    return mean, var
