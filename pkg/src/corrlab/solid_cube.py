"""Continuous product domains: Legendre analysis on [-1,1]^n with replacement
noise, cosine analysis on [0,1]^n with the reflected heat semigroup, and a
reflected Brownian motion simulator calibrated to the cosine spectrum.

Exact computations use tensor Gauss-Legendre quadrature and are restricted
to n <= 3.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre as npleg

from . import rng
from .correlation import CorrelationReport, make_report

MAX_DIM = 3
DEFAULT_DEGREE = 32
DEFAULT_QUAD = 64
BASES = ("legendre", "cosine")
DOMAIN = {"legendre": (-1.0, 1.0), "cosine": (0.0, 1.0)}
STREAM_PATH = 5
STREAM_MONO = 6


def legendre_phi(k: int, x):
    """``sqrt(2k+1) P_k(x)``, orthonormal under the uniform measure on [-1,1]."""
    if k < 0:
        raise ValueError("degree must be non-negative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev
    cur = x.copy()
    for j in range(1, k):  # Bonnet recurrence
        prev, cur = cur, ((2 * j + 1) * x * cur - j * prev) / (j + 1)
    return math.sqrt(2 * k + 1) * cur


def cosine_phi(k: int, x):
    """``1`` for ``k = 0``, else ``sqrt(2) cos(pi k x)`` on [0,1]."""
    if k < 0:
        raise ValueError("frequency must be non-negative")
    x = np.asarray(x, dtype=float)
    if k == 0:
        return np.ones_like(x)
    return math.sqrt(2.0) * np.cos(math.pi * k * x)


def _phi_1d(basis: str):
    if basis == "legendre":
        return legendre_phi
    if basis == "cosine":
        return cosine_phi
    raise ValueError(f"unknown basis {basis!r}")


@dataclass(frozen=True)
class SmoothFunctionOracle:
    dim: int
    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    name: str = ""
    monotone: bool = False
    neumann_compatible: bool = False

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"points have dim {X.shape[1]}, oracle has {self.dim}")
        return np.asarray(self.evaluate(X), dtype=float) * np.ones(X.shape[0])

    def scaled(self, c: float) -> "SmoothFunctionOracle":
        base = self.evaluate
        return replace(self, evaluate=lambda X: c * base(X), name=f"{c}*{self.name}")

    def reparameterized(self, src: str, dst: str) -> "SmoothFunctionOracle":
        """Same function composed with the increasing affine map from the
        ``dst`` basis domain onto the ``src`` one."""
        (a, b), (c, d) = DOMAIN[src], DOMAIN[dst]
        base = self.evaluate
        s = (b - a) / (d - c)
        return replace(self, evaluate=lambda X: base(a + (X - c) * s),
                       name=f"{self.name}[{dst}]", neumann_compatible=False)


def poly_oracle(coeffs: Sequence[float], i: int = 0, dim: int = 1) -> SmoothFunctionOracle:
    """``sum_k coeffs[k] x_i^k``; flagged monotone when the derivative has no
    sign change on [-1,1] (checked on a fine grid)."""
    c = np.asarray(coeffs, dtype=float)
    t = np.linspace(-1, 1, 2001)
    der = np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyder(c)) if len(c) > 1 else 0 * t
    mono = bool(np.all(der >= -1e-12))
    return SmoothFunctionOracle(dim, lambda X: np.polynomial.polynomial.polyval(X[:, i], c),
                                f"poly:{','.join(map(str, c))}", mono, False)


def coord_oracle(i: int, dim: int) -> SmoothFunctionOracle:
    """``x_i`` (0-based ``i``)."""
    if not 0 <= i < dim:
        raise ValueError("coordinate out of range")
    return SmoothFunctionOracle(dim, lambda X: X[:, i], f"coord:{i + 1}", True, False)


COSBUMP_NORM = math.sqrt(1.5)  # ||1 - cos(pi x)||_2 on [0,1]


def cosbump(dim: int = 1, i: int = 0) -> SmoothFunctionOracle:
    """``(1 - cos(pi x_i)) / sqrt(3/2)``: monotone, unit norm, zero slope at
    both ends."""
    return SmoothFunctionOracle(dim, lambda X: (1.0 - np.cos(math.pi * X[:, i])) / COSBUMP_NORM,
                                "cosbump", True, True)


def prodmono(factors: Sequence[Callable[[np.ndarray], np.ndarray]], name: str = "prodmono",
             monotone: bool = True, neumann: bool = False) -> SmoothFunctionOracle:
    """``prod_i u_i(x_i)`` from 1-D callables."""
    def ev(X):
        out = np.ones(X.shape[0])
        for i, u in enumerate(factors):
            out = out * u(X[:, i])
        return out
    return SmoothFunctionOracle(len(factors), ev, name, monotone, neumann)


_UNARY = {
    "x": lambda t: t, "x3": lambda t: t**3, "exp": np.exp, "tanh": np.tanh,
    "one": np.ones_like, "atan": np.arctan,
}


def parse_oracle(spec: str, dim: int) -> SmoothFunctionOracle:
    """``poly:c0,c1,...[@i]``, ``coord:i`` (1-based), ``cosbump``,
    ``prodmono:u1,u2,...`` with ``u`` in x, x3, exp, tanh, atan, one."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "poly":
            body, _, idx = rest.partition("@")
            return poly_oracle([float(v) for v in body.split(",")], int(idx or 1) - 1, dim)
        if kind == "coord":
            return coord_oracle(int(rest) - 1, dim)
        if kind == "cosbump":
            return cosbump(dim)
        if kind == "prodmono":
            names = rest.split(",")
            if len(names) != dim:
                raise ValueError("prodmono needs one factor per coordinate")
            o = prodmono([_UNARY[u] for u in names], spec)
            # a product of increasing factors need not be increasing
            return replace(o, monotone=sampled_monotone(o))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed oracle spec {spec!r}: {exc}") from None
    raise ValueError(f"unknown oracle spec {spec!r}")


def gauss_nodes(basis: str, Q: int):
    """Gauss-Legendre nodes and probability weights on the basis domain."""
    x, w = npleg.leggauss(Q)
    a, b = DOMAIN[basis]
    return a + (x + 1.0) * (b - a) / 2.0, w / 2.0


@dataclass(frozen=True)
class Grid:
    basis: str
    n: int
    nodes: np.ndarray
    weights: np.ndarray  # 1-D probability weights

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.nodes] * self.n), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def tabulate(self, oracle: SmoothFunctionOracle) -> np.ndarray:
        return oracle(self.points()).reshape((len(self.nodes),) * self.n)

    def integrate(self, table: np.ndarray) -> float:
        out = table
        for _ in range(self.n):
            out = np.tensordot(self.weights, out, axes=(0, 0))
        return float(out)


def make_grid(basis: str, n: int, Q: int) -> Grid:
    if n > MAX_DIM:
        raise ValueError(f"exact quadrature supports n <= {MAX_DIM}")
    if n < 1:
        raise ValueError("dimension must be positive")
    x, w = gauss_nodes(basis, Q)
    return Grid(basis, n, x, w)


@dataclass(frozen=True)
class SpectralExpansion:
    basis: str
    max_degree: int
    coeffs: np.ndarray  # shape (D+1,)*n
    norm_sq: float

    @property
    def n(self) -> int:
        return self.coeffs.ndim

    @property
    def residual(self) -> float:
        return self.norm_sq - float(np.sum(self.coeffs**2))

    def card_table(self) -> np.ndarray:
        idx = np.indices(self.coeffs.shape)
        return np.sum(idx > 0, axis=0)

    def sq_freq_table(self) -> np.ndarray:
        idx = np.indices(self.coeffs.shape)
        return np.sum(idx**2, axis=0)

    def coefficient(self, alpha) -> float:
        return float(self.coeffs[tuple(alpha)])

    def with_coeffs(self, coeffs: np.ndarray, norm_sq: float | None = None) -> "SpectralExpansion":
        if norm_sq is None:
            # truncation tail scales no faster than the kept part
            norm_sq = float(np.sum(coeffs**2)) + max(self.residual, 0.0)
        return SpectralExpansion(self.basis, self.max_degree, coeffs, norm_sq)

    def evaluate(self, X) -> np.ndarray:
        """Truncated series at rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ph = _phi_1d(self.basis)
        D = self.max_degree
        out = self.coeffs
        vals = [np.stack([ph(k, X[:, i]) for k in range(D + 1)], axis=1) for i in range(self.n)]
        # contract coordinate by coordinate, keeping the sample axis first
        res = np.einsum("ik,k...->i...", vals[0], out)
        for i in range(1, self.n):
            res = np.einsum("ik,ik...->i...", vals[i], res)
        return res


def spectral_transform(oracle: SmoothFunctionOracle, basis: str = "legendre",
                       D: int = DEFAULT_DEGREE, Q: int = DEFAULT_QUAD) -> SpectralExpansion:
    """Coefficients ``<f, phi_alpha>`` for ``alpha_i <= D`` by tensor quadrature."""
    if Q < 2 * D:
        raise ValueError(f"quadrature order {Q} must be at least 2D = {2 * D}")
    grid = make_grid(basis, oracle.dim, Q)
    F = grid.tabulate(oracle)
    ph = _phi_1d(basis)
    A = np.stack([ph(k, grid.nodes) * grid.weights for k in range(D + 1)])  # (D+1, Q)
    C = F
    for ax in range(oracle.dim):
        C = np.moveaxis(np.tensordot(A, C, axes=(1, ax)), 0, ax)
    return SpectralExpansion(basis, D, C, grid.integrate(F * F))


def replacement_noise(e: SpectralExpansion, rho: float) -> SpectralExpansion:
    if e.basis != "legendre":
        raise ValueError("replacement noise acts on the Legendre expansion")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    mult = float(rho) ** e.card_table()
    return e.with_coeffs(e.coeffs * mult)


def replacement_noise_product(factors, rho: float, Q: int = DEFAULT_QUAD):
    """Definitional ``T_rho`` of ``prod u_i(x_i)`` as a product of 1-D
    callables ``rho u_i + (1 - rho) E[u_i]``."""
    x, w = gauss_nodes("legendre", Q)
    out = []
    for u in factors:
        m = float(np.sum(w * u(x)))
        out.append(lambda t, u=u, m=m: rho * u(t) + (1.0 - rho) * m)
    return out


def reflected_heat(e: SpectralExpansion, t: float) -> SpectralExpansion:
    if e.basis != "cosine":
        raise ValueError("the reflected heat semigroup acts on the cosine expansion")
    if t < 0:
        raise ValueError("time must be non-negative")
    return e.with_coeffs(e.coeffs * np.exp(-t * e.sq_freq_table()))


def fold(y) -> np.ndarray:
    """Reflect the real line onto [0, 1] (period 2, mirrored)."""
    y = np.mod(np.asarray(y, dtype=float), 2.0)
    return np.where(y > 1.0, 2.0 - y, y)


def reflected_brownian_path(x0, t: float, steps: int, seed: int, samples: int = 1,
                            stream: int = STREAM_PATH) -> np.ndarray:
    """Endpoints of reflected Brownian motion on [0,1]^n started at ``x0``.

    Increments have standard deviation ``sqrt(2 dt) / pi`` so the folded
    process has generator eigenvalues ``k^2`` on ``phi_k``. Returns shape
    ``(samples, n)``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if t < 0:
        raise ValueError("time must be non-negative")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = len(x0)
    dt = t / steps
    sd = math.sqrt(2.0 * dt) / math.pi
    out = np.empty((samples, n))
    start = 0
    for c, size in enumerate(rng.chunk_sizes(samples)):
        # folding the free path is the reflected path, so only the free
        # endpoint is needed
        Z = rng.normal_block(seed, stream, c, (size, steps, n))
        out[start:start + size] = fold(x0[None, :] + sd * Z.sum(axis=1))
        start += size
    return out


def _sample_box(basis: str, n: int, size: int, seed: int, stream: int, chunk: int = 0):
    a, b = DOMAIN[basis]
    return a + (b - a) * rng.uniform_block(seed, stream, chunk, (size, n))


def sampled_monotone(oracle: SmoothFunctionOracle, basis: str = "legendre",
                     pairs: int = 10_000, seed: int = 0, tol: float = 1e-12) -> bool:
    """No violation over ``pairs`` random comparable pairs ``x <= y``."""
    X = _sample_box(basis, oracle.dim, pairs, seed, STREAM_MONO, 0)
    Y = _sample_box(basis, oracle.dim, pairs, seed, STREAM_MONO, 1)
    lo, hi = np.minimum(X, Y), np.maximum(X, Y)
    return bool(np.all(oracle(hi) >= oracle(lo) - tol))


def neumann_check(oracle: SmoothFunctionOracle, points: int = 64, h: float = 1e-8,
                  tol: float = 1e-6, seed: int = 0) -> bool:
    """One-sided normal derivative ``< tol`` at random points of every
    boundary face of [0,1]^n."""
    base = _sample_box("cosine", oracle.dim, points, seed, STREAM_MONO, 2)
    for i in range(oracle.dim):
        for face, step in ((0.0, h), (1.0, -h)):
            P = base.copy()
            P[:, i] = face
            Pin = P.copy()
            Pin[:, i] = face + step
            der = (oracle(Pin) - oracle(P)) / h
            if np.max(np.abs(der)) > tol:
                return False
    return True


def correlation_by_quadrature(f: SmoothFunctionOracle, g: SmoothFunctionOracle,
                              basis: str, Q: int) -> tuple[float, float, float]:
    grid = make_grid(basis, f.dim, Q)
    F, G = grid.tabulate(f), grid.tabulate(g)
    ef, eg = grid.integrate(F), grid.integrate(G)
    return grid.integrate(F * G) - ef * eg, ef, eg


def verify_cont_bound(f: SmoothFunctionOracle, g: SmoothFunctionOracle,
                      basis: str = "legendre", D: int = DEFAULT_DEGREE,
                      Q: int = DEFAULT_QUAD, j_star: int = 1, normalize: bool = False,
                      grid: Sequence[float] | None = None, seed: int = 0,
                      tol: float = 1e-8) -> CorrelationReport:
    """Quadrature check of the continuous monotone bound on the solid cube.

    The Legendre route sweeps replacement noise ``rho``; the cosine route
    sweeps heat time ``t`` (``q`` then decreases in ``t``, i.e. increases in
    ``e^{-t}``, which is the reported parameter).
    """
    if f.dim != g.dim:
        raise ValueError("oracles have different dimensions")
    if basis not in BASES:
        raise ValueError(f"unknown basis {basis!r}")
    if j_star != 1:
        raise ValueError("only j* = 1 is supported on the solid cube")
    notes = []
    ef_, eg_ = spectral_transform(f, basis, D, Q), spectral_transform(g, basis, D, Q)
    if normalize:
        for name, e in (("f", ef_), ("g", eg_)):
            nrm = math.sqrt(e.norm_sq)
            if nrm > 1.0:
                notes.append(f"{name} divided by its norm {nrm!r}")
        nf, ng = math.sqrt(ef_.norm_sq), math.sqrt(eg_.norm_sq)
        if nf > 1.0:
            f = f.scaled(1.0 / nf)
            ef_ = spectral_transform(f, basis, D, Q)
        if ng > 1.0:
            g = g.scaled(1.0 / ng)
            eg_ = spectral_transform(g, basis, D, Q)
    gap, _, _ = correlation_by_quadrature(f, g, basis, Q)
    card = ef_.card_table()
    prod = ef_.coeffs * eg_.coeffs
    a1 = float(np.sum(prod[card == 1]))
    res_f, res_g = max(ef_.residual, 0.0), max(eg_.residual, 0.0)
    trunc = math.sqrt(res_f * eg_.norm_sq) + math.sqrt(res_g * ef_.norm_sq)
    mono_f = f.monotone and sampled_monotone(f, basis, seed=seed)
    mono_g = g.monotone and sampled_monotone(g, basis, seed=seed + 1)
    hyp = {"basis": basis, "monotone_f": mono_f, "monotone_g": mono_g,
           "norm_f": math.sqrt(ef_.norm_sq), "norm_g": math.sqrt(eg_.norm_sq),
           "residual_f": ef_.residual, "residual_g": eg_.residual}
    met = mono_f and mono_g and hyp["norm_f"] <= 1 + 1e-9 and hyp["norm_g"] <= 1 + 1e-9
    if basis == "cosine":
        nf_ok = f.neumann_compatible and neumann_check(f)
        ng_ok = g.neumann_compatible and neumann_check(g)
        hyp.update(neumann_f=nf_ok, neumann_g=ng_ok)
        met = met and nf_ok and ng_ok
    grid = list(np.round(np.linspace(0, 1, 11), 10)) if grid is None else list(grid)
    sweep = []
    for r in grid:
        r = float(r)
        if basis == "legendre":
            q = float(np.sum(replacement_noise(ef_, r).coeffs * eg_.coeffs))
        else:
            t = math.inf if r == 0 else -math.log(r)
            mult = np.exp(-t * ef_.sq_freq_table()) if r > 0 else (ef_.sq_freq_table() == 0) * 1.0
            q = float(np.sum(ef_.coeffs * mult * eg_.coeffs))
        sweep.append((r, q))
    qs = [q for _, q in sweep]
    slack = max(trunc, 1e-12)
    ok = all(b >= a - slack for a, b in zip(qs, qs[1:]))
    rep = make_report(gap, a1, sweep, ok, hyp, met, tol, 1, notes)
    rep.extras.update({"truncation_error": trunc, "degree": D, "quad": Q})
    return rep


def rearrangement_check(f: Callable, g: Callable, Q: int = DEFAULT_QUAD,
                        domain: str = "legendre") -> bool:
    """``E[f(x)] E[g(y)] <= E[f(x) g(x)] + 1e-10`` for 1-D callables."""
    x, w = gauss_nodes(domain, Q)
    fx, gx = f(x), g(x)
    lhs = float(np.sum(w * fx)) * float(np.sum(w * gx))
    rhs = float(np.sum(w * fx * gx))
    return lhs <= rhs + 1e-10


def random_monotone_1d(seed: int, terms: int = 4):
    """Random increasing function on [-1,1]: positive mix of tanh ramps plus
    an optional linear term."""
    g = np.random.default_rng(seed)
    a = g.uniform(0.1, 2.0, size=terms)
    s = g.uniform(0.5, 8.0, size=terms)
    c = g.uniform(-1.0, 1.0, size=terms)
    lin = g.uniform(0.0, 1.0)
    return lambda x: lin * x + np.sum(a[:, None] * np.tanh(s[:, None] * (np.asarray(x)[None, :] - c[:, None])), axis=0)


def path_expectation(k: Sequence[int], x0, t: float, samples: int, seed: int,
                     steps: int = 8):
    """MC estimate and stderr of ``E[phi_k(B_t^R)]`` from ``x0``."""
    ends = reflected_brownian_path(x0, t, steps, seed, samples)
    vals = np.ones(samples)
    for i, ki in enumerate(k):
        vals = vals * cosine_phi(ki, ends[:, i])
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def heat_spectral_value(k: Sequence[int], x0, t: float) -> float:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    val = math.exp(-t * sum(ki * ki for ki in k))
    for ki, xi in zip(k, x0):
        val *= float(cosine_phi(ki, xi))
    return val
