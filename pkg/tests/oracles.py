"""Independent reference computations shared by the test modules."""

import numpy as np


def dense_extremum(f, lo, hi, mode, n=20001, zoom=2001):
    """Extremum of scalar ``f`` on ``[lo, hi]`` by brute-force sampling.

    A coarse scan locates the best sample, then a second scan over the two
    neighbouring cells refines it.
    """
    if hi == lo:
        return float(f(np.array([lo]))[0])
    sgn = 1.0 if mode == "min" else -1.0
    p = np.linspace(lo, hi, n)
    vals = sgn * f(p)
    k = int(np.argmin(vals))
    a, b = p[max(k - 1, 0)], p[min(k + 1, n - 1)]
    q = np.linspace(a, b, zoom)
    return sgn * float(min(vals.min(), (sgn * f(q)).min()))


def godunov_oracle(F, p1, p2, p3, v, x, variant):
    """Godunov-like value from the case table with dense-sampled extrema."""
    f = lambda p: F(p, v, x)
    if p2 >= max(p1, p3):
        return dense_extremum(f, min(p1, p3), p2, "min")
    if p2 <= min(p1, p3):
        return dense_extremum(f, p2, max(p1, p3), "max")
    if variant == "ext":
        lo, hi = (p1, p2) if p1 <= p2 else (p3, p2)
        return dense_extremum(f, lo, hi, "min")
    lo, hi = (p2, p3) if p3 >= p2 else (p2, p1)
    return dense_extremum(f, lo, hi, "max")
