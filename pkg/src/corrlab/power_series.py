"""Power series with no constant term, sup-norms on [0, 1], and the
scaled-Chebyshev product that nearly attains the 1/log^2(length) floor.

Coefficient vectors follow the convention ``coeffs[0]`` = coefficient of
``t``, ``coeffs[1]`` = coefficient of ``t**2`` and so on.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
VIOLATION_THRESHOLD = 1e-3
MAX_CHEBYSHEV_DEGREE = 1024
MAX_WITNESS_K = 8


@dataclass(frozen=True)
class PowerSeries:
    """Finite power series ``sum_i c_i t^i`` starting at degree one.

    ``evaluator`` optionally overrides Horner evaluation with a numerically
    better route (e.g. a factored product) that represents the same
    polynomial.
    """

    coeffs: tuple[float, ...]
    evaluator: Callable[[np.ndarray], np.ndarray] | None = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if len(c) < 1:
            raise ValueError("power series needs degree >= 1")
        if not all(math.isfinite(x) for x in c):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def horner(self, t):
        t = np.asarray(t, dtype=float)
        acc = np.zeros_like(t)
        for c in reversed(self.coeffs):
            acc = (acc + c) * t
        return acc

    def __call__(self, t):
        if self.evaluator is not None:
            return self.evaluator(np.asarray(t, dtype=float))
        return self.horner(t)

    def to_json(self) -> str:
        return json.dumps(list(self.coeffs))

    @classmethod
    def from_json(cls, text: str) -> "PowerSeries":
        data = json.loads(text)
        if not isinstance(data, list):
            raise ValueError("coefficient file must hold a JSON array")
        return cls(tuple(data))


@dataclass(frozen=True)
class SupResult:
    argmax_t: float
    value: float
    grid_size: int
    refinement_iterations: int


def length(p: PowerSeries) -> float:
    """Sum of absolute coefficient values."""
    total = 0.0
    for c in p.coeffs:
        total += abs(c)
    return total


def _golden_max(fun, a: float, b: float, tol: float) -> tuple[float, float, int]:
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    it = 0
    while b - a > tol and it < 200:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
    t = 0.5 * (a + b)
    return t, fun(t), it


def sup_unit_interval(
    p: PowerSeries,
    grid_size: int | None = None,
    tol: float = 1e-12,
    n_peaks: int = 8,
) -> SupResult:
    """Maximum of ``|p(t)|`` on [0, 1].

    Dense grid scan followed by golden-section refinement around the
    ``n_peaks`` largest local maxima of the grid. The returned value is never
    below the best grid value.
    """
    if grid_size is None:
        grid_size = max(4096, 64 * p.degree)
    ts = np.linspace(0.0, 1.0, grid_size)
    vals = np.abs(p(ts))
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite polynomial values on the grid")

    interior = np.r_[vals[0] >= vals[1],
                     (vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:]),
                     vals[-1] >= vals[-2]]
    peaks = np.flatnonzero(interior)
    peaks = peaks[np.argsort(vals[peaks])[::-1][:n_peaks]]

    best_i = int(np.argmax(vals))
    best_t, best_v = float(ts[best_i]), float(vals[best_i])
    h = 1.0 / (grid_size - 1)

    def absval(t):
        return float(abs(p(np.array([t]))[0]))

    iterations = 0
    for i in peaks:
        a = max(0.0, ts[i] - h)
        b = min(1.0, ts[i] + h)
        t, v, it = _golden_max(absval, a, b, tol)
        iterations += it
        if v > best_v:
            best_t, best_v = t, v
    return SupResult(best_t, best_v, grid_size, iterations)


def chebyshev_first_kind(c: int) -> Polynomial:
    """Monomial coefficients of ``T_c`` from the three-term recurrence.

    The recurrence runs in exact integer arithmetic, so the only error is the
    final rounding of each coefficient to double precision (exact up to
    ``c = 52``; relative rounding ~1e-16 beyond).
    """
    return Polynomial([float(x) for x in _chebyshev_int(c)])


def _chebyshev_int(c: int) -> list[int]:
    if c < 0:
        raise ValueError("degree must be non-negative")
    if c > MAX_CHEBYSHEV_DEGREE:
        raise ValueError(f"degree {c} exceeds guard {MAX_CHEBYSHEV_DEGREE}")
    prev, cur = [1], [0, 1]
    if c == 0:
        return prev
    for _ in range(c - 1):
        nxt = [0] + [2 * x for x in cur]
        for i, x in enumerate(prev):
            nxt[i] -= x
        prev, cur = cur, nxt
    return cur


def chebyshev_monomial_eval(c: int, x):
    """Evaluate the monomial form of ``T_c`` exactly in rationals at each
    double ``x``.

    Float Horner on the monomial coefficients cancels catastrophically
    (about 2e-5 absolute at c = 32); the exact route isolates the
    coefficients from that rounding.
    """
    coeffs = _chebyshev_int(c)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.shape)
    for idx, xv in np.ndenumerate(xs):
        xf = Fraction(float(xv))
        acc = Fraction(0)
        for a in reversed(coeffs):
            acc = acc * xf + a
        out[idx] = float(acc)
    return out if np.ndim(x) else float(out[0])


def chebyshev_value(c: int, x):
    """Evaluate ``T_c(x)`` by the value recurrence (stable for the scaled
    arguments used here)."""
    x = np.asarray(x, dtype=float)
    if c == 0:
        return np.ones_like(x)
    prev, cur = np.ones_like(x), x.copy()
    for _ in range(c - 1):
        prev, cur = cur, 2.0 * x * cur - prev
    return cur


def _check_square(d: int) -> int:
    if d < 1 or math.isqrt(d) ** 2 != d:
        raise ValueError(f"d={d} is not a perfect square >= 1")
    return math.isqrt(d)


def _a_d_exact(d: int) -> list[Fraction]:
    c = _check_square(d)
    s = Fraction(d + 3, d)
    t = _chebyshev_int(c)
    scaled = [Fraction(x) * s**k for k, x in enumerate(t)]
    norm = sum(scaled)
    return [x / norm for x in scaled]


def build_a_d(d: int) -> Polynomial:
    """``T_sqrt(d)(t (1 + 3/d)) / T_sqrt(d)(1 + 3/d)`` in the monomial basis."""
    return Polynomial([float(x) for x in _a_d_exact(d)])


def a_d_value(d: int, t):
    c = _check_square(d)
    s = 1.0 + 3.0 / d
    return chebyshev_value(c, np.asarray(t, dtype=float) * s) / chebyshev_value(c, s)


def _shift_reflect(coeffs: Sequence[Fraction]) -> list[Fraction]:
    # q(t) = p(1 - t)
    out = [Fraction(0)] * len(coeffs)
    for k, ck in enumerate(coeffs):
        if ck == 0:
            continue
        for j in range(k + 1):
            out[j] += ck * math.comb(k, j) * (-1) ** j
    return out


def _convolve(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def build_hadamard_witness(k: int) -> PowerSeries:
    """``t * prod_{j=0..k} a_{4^j}(1 - t)``, expanded exactly in rationals.

    The expanded coefficients grow like ``2^O(2^k)`` so Horner evaluation
    loses all precision for large ``k``; evaluation goes through the
    factored form instead.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > MAX_WITNESS_K:
        raise ValueError(f"k={k} exceeds guard {MAX_WITNESS_K}")
    ds = [4**j for j in range(k + 1)]
    prod = [Fraction(1)]
    for d in ds:
        prod = _convolve(prod, _shift_reflect(_a_d_exact(d)))
    coeffs = tuple(float(x) for x in prod)  # coefficient of t^(i+1)

    def evaluate(t):
        out = t.copy()
        for d in ds:
            out = out * a_d_value(d, 1.0 - t)
        return out

    return PowerSeries(coeffs, evaluator=evaluate)


def nearest_witness_k(M: float) -> int:
    """Witness index whose nominal ``log^2 M = 4^k`` is closest to the given
    ``M`` on a log scale, clamped to the supported range."""
    if not M > 1.0:
        raise ValueError("M must exceed 1")
    k = round(math.log(math.log(M) ** 2, 4))
    return int(min(max(k, 1), MAX_WITNESS_K))


class LemmaPreconditionError(ValueError):
    """Raised when a series does not meet the lemma's hypotheses.

    ``reason`` is ``"leading-coefficient"`` or ``"length"``.
    """

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class LemmaAudit:
    M: float
    sup: float
    argmax: float
    product: float
    verdict: str

    def to_dict(self) -> dict:
        return {"M": self.M, "sup": self.sup, "argmax": self.argmax,
                "product": self.product, "verdict": self.verdict}


def audit_main_lemma(p: PowerSeries) -> LemmaAudit:
    """Measure ``sup|p| * log^2(length)`` for a series with ``c_1 = 1``.

    The verdict is ``"VIOLATION"`` below 1e-3, an order-of-magnitude red flag
    rather than the (unknown) universal constant.
    """
    if abs(p.coeffs[0] - 1.0) > 1e-12:
        raise LemmaPreconditionError(
            "leading-coefficient", f"c_1 = {p.coeffs[0]!r}, expected 1")
    M = length(p)
    if M < 1.5:
        raise LemmaPreconditionError("length", f"length {M!r} < 3/2")
    s = sup_unit_interval(p)
    product = s.value * math.log(M) ** 2
    verdict = "VIOLATION" if product < VIOLATION_THRESHOLD else "ok"
    return LemmaAudit(M, s.value, s.argmax_t, product, verdict)


def normalized_gap_series(levels: Sequence[float]) -> PowerSeries:
    """``u + sum_{l>=2} (a_{l j*} / a_{j*}) u^l`` from ``(a_{j*}, a_{2j*}, ...)``."""
    a0 = float(levels[0])
    if not a0 > 0:
        raise ValueError(f"a_j* must be positive, got {a0!r}")
    p = PowerSeries(tuple(float(a) / a0 for a in levels))
    if sum(abs(float(a)) for a in levels) <= 1.0:
        assert length(p) <= 1.0 / a0 + 1e-9
    return p


def tail_family(k: int) -> PowerSeries:
    """``t (1 - t)^k`` expanded; sup is ``(1/(k+1)) (k/(k+1))^k``."""
    coeffs = [math.comb(k, j) * (-1) ** j for j in range(k + 1)]
    return PowerSeries(tuple(float(c) for c in coeffs))
