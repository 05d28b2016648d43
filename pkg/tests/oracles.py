"""Independent reference computations for the tests.

Nothing here imports corrlab; each routine is a deliberately naive
re-derivation (plain loops, exact rationals, mpmath) of a quantity the
library computes another way.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np

# min gap / Phi(a_1) over monotone pairs with a_1 > 0 on uniform {0,1}^n,
# produced once by brute_force_min_ratio (n=4 takes a few minutes in pure
# Python, so it is frozen here).
FROZEN_MIN_RATIO = {1: 1.9218120556728058, 2: 1.9218120556728058,
                    3: 1.9218120556728058, 4: 1.8171602667311326}


def phi(x: float) -> float:
    if x >= 1:
        return x
    return min(x, x / math.log(1 / x) ** 2)


def monotone_tables(n: int):
    pts = list(itertools.product((0, 1), repeat=n))
    out = []
    for bits in itertools.product((0, 1), repeat=2**n):
        f = dict(zip(pts, bits))
        if all(f[x] <= f[y] for x in pts for y in pts
               if all(a <= b for a, b in zip(x, y))):
            out.append(f)
    return pts, out


def brute_force_min_ratio(n: int) -> float:
    pts, fs = monotone_tables(n)
    N = 2**n
    means = [sum(f.values()) / N for f in fs]
    halves = [[[sum(f[x] for x in pts if x[i] == b) / (N / 2) for b in (0, 1)]
               for i in range(n)] for f in fs]
    best = math.inf
    for a, f in enumerate(fs):
        for b, g in enumerate(fs):
            gap = sum(f[x] * g[x] for x in pts) / N - means[a] * means[b]
            a1 = sum(0.5 * (halves[a][i][0] * halves[b][i][0] + halves[a][i][1] * halves[b][i][1])
                     - means[a] * means[b] for i in range(n))
            if a1 > 1e-12:
                best = min(best, gap / phi(a1))
    return best


def efron_stein_inclusion_exclusion(values: np.ndarray, pi: np.ndarray):
    """``f^{=S} = sum_{T subset S} (-1)^{|S-T|} E[f | x_T]`` as full tables."""
    n = values.ndim

    def cond(T):
        v = values
        for j in reversed(range(n)):
            if j not in T:
                v = np.tensordot(v, pi[j], axes=([j], [0]))
                v = np.expand_dims(v, j)
        return np.broadcast_to(v, values.shape)

    out = {}
    for r in range(n + 1):
        for S in itertools.combinations(range(n), r):
            acc = np.zeros(values.shape)
            for q in range(len(S) + 1):
                for T in itertools.combinations(S, q):
                    acc = acc + (-1) ** (len(S) - len(T)) * cond(set(T))
            out[frozenset(S)] = acc
    return out


def talagrand_exact(n: int, k: int):
    """Exact rationals ``(eps, gap)`` for the nested Hamming-ball pair."""
    tot = 2**n
    ef = Fraction(sum(math.comb(n, s) for s in range(n - k, n + 1)), tot)
    eg = Fraction(sum(math.comb(n, s) for s in range(k + 1, n + 1)), tot)
    return ef, ef - ef * eg


def keller_binom(n: int, p: float):
    """Mean and sum of p-biased singleton coefficients of the signed
    threshold, using scipy's binomial pmf as a second route."""
    from scipy.stats import binom
    j = np.arange(n + 1)  # number of -1 coordinates
    w = binom.pmf(j, n, p)
    s = n - 2 * j
    f = np.where(s - n * (1 - 2 * p) >= -1e-9, 1.0, -1.0)
    mean = float(np.sum(w * f))
    # E[f chi_i] where chi_i = (x_i - mu) / sigma, summed over i
    mu, sigma = 1 - 2 * p, 2 * math.sqrt(p * (1 - p))
    d1 = float(np.sum(w * f * (s - n * mu))) / sigma
    return mean, d1


def witness_sup_mpmath(k: int, points: int = 4001) -> float:
    """Grid max of the witness using mpmath Chebyshev polynomials at 50 digits."""
    mpmath.mp.dps = 50
    best = mpmath.mpf(0)
    for i in range(points):
        t = mpmath.mpf(i) / (points - 1)
        v = t
        for j in range(k + 1):
            d = 4**j
            c = int(math.isqrt(d))
            s = 1 + mpmath.mpf(3) / d
            v *= mpmath.chebyt(c, (1 - t) * s) / mpmath.chebyt(c, s)
        best = max(best, abs(v))
    return float(best)


def ball_a2_mpmath(eps: float, n: int) -> tuple[float, float]:
    """Closed-form ``a_2`` for the nested balls via mpmath's incomplete gamma."""
    mpmath.mp.dps = 30

    def cdf(dof, x):
        return mpmath.gammainc(mpmath.mpf(dof) / 2, 0, mpmath.mpf(x) / 2, regularized=True)

    def quantile(q):
        return mpmath.findroot(lambda x: cdf(n, x) - q, n)

    r1sq, r2sq = quantile(eps), quantile(1 - eps)
    c1 = (cdf(n + 2, r1sq) - cdf(n, r1sq)) / mpmath.sqrt(2)
    c2 = (cdf(n + 2, r2sq) - cdf(n, r2sq)) / mpmath.sqrt(2)
    a2 = n * c1 * c2
    return float(a2), float(mpmath.sqrt(r1sq))


def interval_influence_quad(r: float) -> float:
    """``E[1{|x|<=r} (1 - x^2)] / sqrt(2)`` by mpmath quadrature."""
    mpmath.mp.dps = 30
    dens = lambda x: mpmath.exp(-x * x / 2) / mpmath.sqrt(2 * mpmath.pi)
    return float(mpmath.quad(lambda x: (1 - x * x) * dens(x), [-r, r]) / mpmath.sqrt(2))
