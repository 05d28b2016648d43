"""Monotone test functions: Boolean builtins, exhaustive enumeration for
small n, the nested Hamming-ball pair, and the p-biased majority with exact
binomial statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from urllib.parse import parse_qsl

import numpy as np
from scipy.special import gammaln

from .finite_product import FiniteSpace, TabulatedFunction, is_monotone

BUILTINS = ("dictator", "and", "or", "majority", "threshold", "tribes",
            "talagrand_f", "talagrand_g", "keller_sign", "random_monotone")

_DEFAULT_RANGE = {"majority": "pm1", "keller_sign": "pm1"}
DEDEKIND = {0: 2, 1: 3, 2: 6, 3: 20, 4: 168}


@dataclass(frozen=True)
class BuiltinSpec:
    name: str
    params: dict = field(default_factory=dict)
    output_range: str | None = None  # "01" or "pm1"; None = builtin default

    def resolved_range(self) -> str:
        return self.output_range or _DEFAULT_RANGE.get(self.name, "01")


def parse_builtin(text: str) -> BuiltinSpec:
    """``builtin:<name>?k=..&p=..&range=01|pm1``."""
    body = text[len("builtin:"):] if text.startswith("builtin:") else text
    name, _, query = body.partition("?")
    if name not in BUILTINS:
        raise ValueError(f"unknown builtin {name!r}")
    params = dict(parse_qsl(query, strict_parsing=bool(query)))
    rng = params.pop("range", None)
    if rng not in (None, "01", "pm1"):
        raise ValueError(f"range must be 01 or pm1, got {rng!r}")
    return BuiltinSpec(name, params, rng)


def default_tribes_width(n: int) -> int:
    if n <= 2:
        return 1
    return max(1, int(math.floor(math.log2(n) - math.log2(math.log(n)))))


def _bits(space: FiniteSpace) -> np.ndarray:
    """0/1 indicator of the top atom per coordinate, shape ``(m^n, n)``."""
    if space.m != 2:
        raise ValueError(f"Boolean builtins need m = 2, got m = {space.m}")
    top = max(space.omega)
    return (space.points() == top).astype(int)


def _random_monotone(space: FiniteSpace, seed: int, max_tries: int = 1000) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = np.array(np.unravel_index(np.arange(space.size), space.shape)).T
    for _ in range(max_tries):
        n_min = rng.integers(1, max(2, space.n) + 1)
        minimal = rng.integers(0, space.m, size=(n_min, space.n))
        up = np.any(np.all(pts[:, None, :] >= minimal[None, :, :], axis=2), axis=1)
        if 0 < up.sum() < space.size:
            return up.astype(float)
    raise RuntimeError("could not draw a non-constant monotone function")


def generate(spec: BuiltinSpec | str, space: FiniteSpace) -> TabulatedFunction:
    if isinstance(spec, str):
        spec = parse_builtin(spec)
    n = space.n
    p = spec.params
    name = spec.name
    if name == "random_monotone":
        vals = _random_monotone(space, int(p.get("seed", 0)))
    else:
        x = _bits(space)
        s = x.sum(axis=1)
        if name == "dictator":
            i = int(p.get("i", 1)) - 1
            if not 0 <= i < n:
                raise ValueError(f"dictator coordinate {i + 1} out of range")
            vals = x[:, i]
        elif name == "and":
            vals = s == n
        elif name == "or":
            vals = s >= 1
        elif name == "majority":
            vals = 2 * s >= n
        elif name == "threshold":
            vals = s >= int(p["k"])
        elif name == "tribes":
            w = int(p.get("w", default_tribes_width(n)))
            if w < 1:
                raise ValueError("tribe width must be >= 1")
            blocks = [x[:, j:j + w].all(axis=1) for j in range(0, n, w)]
            vals = np.any(blocks, axis=0)
        elif name == "talagrand_f":
            vals = s >= n - int(p["k"])
        elif name == "talagrand_g":
            vals = s > int(p["k"])
        elif name == "keller_sign":
            pp = float(p.get("p", _minus_prob(space)))
            signed = 2 * s - n  # sum of +-1 coordinates
            vals = signed - n * (1.0 - 2.0 * pp) >= -1e-9
        else:  # pragma: no cover - guarded by parse_builtin
            raise ValueError(name)
        vals = np.asarray(vals, dtype=float)
    if spec.resolved_range() == "pm1":
        vals = 2.0 * vals - 1.0
    f = TabulatedFunction(space, vals)
    assert is_monotone(f), f"builtin {name} produced a non-monotone table"
    return f


def _minus_prob(space: FiniteSpace) -> float:
    """Probability of the bottom atom (``pi(-1)`` in the p-biased cube)."""
    return float(space.pi[0][int(np.argmin(space.omega))])


def enumerate_monotone(n: int) -> list[TabulatedFunction]:
    """All monotone 0/1 functions on uniform ``{0,1}^n`` by scanning every
    truth table."""
    if not 1 <= n <= 4:
        raise ValueError("exhaustive enumeration supports 1 <= n <= 4")
    N = 2**n
    tables = np.arange(2**N, dtype=np.int64)
    bits = (tables[:, None] >> (N - 1 - np.arange(N))[None, :]) & 1  # table order
    ok = np.ones(len(tables), dtype=bool)
    for x in range(N):
        for i in range(n):
            mask = 1 << (n - 1 - i)
            if not x & mask:
                ok &= bits[:, x] <= bits[:, x | mask]
    space = FiniteSpace.uniform(2, n)
    return [TabulatedFunction(space, row.astype(float)) for row in bits[ok]]


def log_binomial_weights(n: int, p: float) -> np.ndarray:
    """``log(C(n,j) p^j (1-p)^(n-j))`` for ``j = 0..n``."""
    j = np.arange(n + 1)
    return (gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)
            + j * math.log(p) + (n - j) * math.log1p(-p))


def _fsum(x) -> float:
    return math.fsum(np.asarray(x, dtype=float).tolist())


@dataclass(frozen=True)
class ThresholdStats:
    """Exact statistics of ``f = sign(sum x_i - level)`` on the p-biased cube
    ``{-1,1}^n`` (``pi(-1) = p``, ``sign(0) = +1``)."""

    n: int
    level: float
    p: float
    mean: float
    degree1_sum: float
    gap: float

    @property
    def a1(self) -> float:
        # symmetric f: every singleton coefficient equals degree1_sum / n
        return self.degree1_sum**2 / self.n


def threshold_stats(n: int, level: float | None = None, p: float = 0.5) -> ThresholdStats:
    if not 1 <= n <= 10**6:
        raise ValueError("n must lie in [1, 1e6]")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if level is None:
        level = n * (1.0 - 2.0 * p)
    w = np.exp(log_binomial_weights(n, p))  # j = number of -1 coordinates
    j = np.arange(n + 1)
    dev = (n - 2.0 * j) - level
    f = np.where(dev >= -1e-9, 1.0, -1.0)
    mean = _fsum(w * f)
    # f * (S - n(1-2p)) summed against the biased characters
    d1 = _fsum(w * f * ((n - 2.0 * j) - n * (1.0 - 2.0 * p))) / (2.0 * math.sqrt(p * (1 - p)))
    gap = _fsum(w) - mean**2
    return ThresholdStats(n, float(level), p, mean, d1, gap)


@dataclass(frozen=True)
class TalagrandPairStats:
    """Nested Hamming balls ``f = [s >= n-k]``, ``g = [s > k]`` on uniform
    ``{0,1}^n`` (0/1 valued, ``s`` = number of ones)."""

    n: int
    k: int
    eps: float
    mean_g: float
    mean_fg: float
    gap: float
    degree1_f: float
    degree1_g: float

    @property
    def cross(self) -> float:
        """``sum_i f^(i) g^(i)`` (all singleton coefficients coincide)."""
        return self.degree1_f * self.degree1_g / self.n


def talagrand_pair_stats(n: int, k: int) -> TalagrandPairStats:
    if not 0 <= k < n / 2:
        raise ValueError("need 0 <= k < n/2 so that f is contained in g")
    w = np.exp(log_binomial_weights(n, 0.5))
    s = np.arange(n + 1)
    f = (s >= n - k).astype(float)
    g = (s > k).astype(float)
    # x_i -> 2x_i - 1 characters; sum_i chi_i = 2s - n
    chi = 2.0 * s - n
    ef, eg, efg = _fsum(w * f), _fsum(w * g), _fsum(w * f * g)
    return TalagrandPairStats(
        n, k, ef, eg, efg, efg - ef * eg, _fsum(w * f * chi), _fsum(w * g * chi))
