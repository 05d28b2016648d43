"""Hermite analysis over Gaussian space, estimated by Monte Carlo.

All estimators draw from :mod:`corrlab.rng` streams, so an estimate is a pure
function of ``(seed, stream, samples)``. Stream ids used by the composite
experiments are fixed constants below.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammainc, ndtr

from . import rng
from .correlation import clip_unit, make_report, phi, CorrelationReport

SQRT2 = math.sqrt(2.0)
MC_SIGMA = 4.0

STREAM_GAP = 0
STREAM_F = 1
STREAM_G = 2
STREAM_OU_X = 3
STREAM_OU_Z = 4

KINDS = ("symmetric_convex_set", "quasiconcave_nonneg", "symmetric_convex_function",
         "other")


class HypothesisViolation(AssertionError):
    """A sign condition that must hold for the declared oracle kind failed
    beyond the Monte Carlo band."""


def hermite_eval(j: int, x):
    """Normalised probabilists' Hermite polynomial ``h_j`` (orthonormal under
    N(0, 1))."""
    if j < 0:
        raise ValueError("degree must be non-negative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if j == 0:
        return prev
    cur = x.copy()
    for k in range(1, j):
        prev, cur = cur, (x * cur - math.sqrt(k) * prev) / math.sqrt(k + 1)
    return cur


def hermite_multi(alpha: Sequence[int], X) -> np.ndarray:
    """``h_alpha(x) = prod_i h_{alpha_i}(x_i)`` for rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.ones(X.shape[0])
    for i, a in enumerate(alpha):
        if a:
            out = out * hermite_eval(a, X[:, i])
    return out


def normal_pdf(x):
    return np.exp(-0.5 * np.asarray(x, dtype=float) ** 2) / math.sqrt(2 * math.pi)


def normal_cdf(x):
    return ndtr(x)


@dataclass(frozen=True)
class BodyOracle:
    """Vectorised oracle ``evaluate(X) -> values`` for rows ``X`` of shape
    ``(N, dim)``."""

    dim: int
    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    kind: str = "symmetric_convex_set"
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown oracle kind {self.kind!r}")

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"points have dim {X.shape[1]}, oracle has {self.dim}")
        return np.asarray(self.evaluate(X), dtype=float)

    def rotated(self, R: np.ndarray) -> "BodyOracle":
        """``x -> self(R x)``."""
        R = np.asarray(R, dtype=float)
        base = self.evaluate
        return BodyOracle(self.dim, lambda X: base(X @ R.T), self.kind,
                          f"{self.name}@R", dict(self.meta, rotated=True))

    def check_symmetry(self, samples: int = 1000, seed: int = 0) -> bool:
        X = rng.normal_block(seed, 99, 0, (samples, self.dim)) * 2.0
        return bool(np.array_equal(self(X), self(-X)))


def ball(r: float, n: int) -> BodyOracle:
    r2 = float(r) ** 2
    return BodyOracle(n, lambda X: (np.einsum("ij,ij->i", X, X) <= r2).astype(float),
                      "symmetric_convex_set", f"ball:r={r}", {"radius": float(r)})


def interval(r: float) -> BodyOracle:
    return ball(r, 1)


def box(a: Sequence[float]) -> BodyOracle:
    a = np.asarray(a, dtype=float)
    return BodyOracle(len(a), lambda X: np.all(np.abs(X) <= a, axis=1).astype(float),
                      "symmetric_convex_set", "box:a=" + ",".join(map(str, a)),
                      {"half_widths": a.tolist()})


def slab(v: Sequence[float], w: float, n: int | None = None) -> BodyOracle:
    v = np.asarray(v, dtype=float)
    if n is not None and len(v) != n:
        raise ValueError("slab direction has the wrong dimension")
    v = v / np.linalg.norm(v)
    return BodyOracle(len(v), lambda X: (np.abs(X @ v) <= w).astype(float),
                      "symmetric_convex_set", f"slab:w={w}", {"direction": v.tolist(), "width": w})


def ellipsoid(A: np.ndarray) -> BodyOracle:
    """``{x : x^T A x <= 1}`` for symmetric positive definite ``A``."""
    A = np.asarray(A, dtype=float)
    if not np.allclose(A, A.T) or np.min(np.linalg.eigvalsh(A)) <= 0:
        raise ValueError("ellipsoid matrix must be symmetric positive definite")
    return BodyOracle(A.shape[0],
                      lambda X: (np.einsum("ij,jk,ik->i", X, A, X) <= 1.0).astype(float),
                      "symmetric_convex_set", "ellipsoid", {"A": A.tolist()})


def whole_space(n: int) -> BodyOracle:
    return BodyOracle(n, lambda X: np.ones(X.shape[0]), "symmetric_convex_set", "R^n")


def random_ellipsoid(n: int, seed: int, max_condition: float = 10.0) -> BodyOracle:
    """Random origin-symmetric ellipsoid whose matrix has condition number at
    most ``max_condition`` and typical Gaussian mass of order one half."""
    g = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(g.normal(size=(n, n)))
    eig = np.exp(g.uniform(0.0, math.log(max_condition), size=n))
    eig = eig / eig.mean() / n  # x^T A x ~ 1 near ||x||^2 ~ n
    return ellipsoid((Q * eig) @ Q.T)


def gauss_bump(n: int) -> BodyOracle:
    return BodyOracle(n, lambda X: np.exp(-0.5 * np.einsum("ij,ij->i", X, X)),
                      "quasiconcave_nonneg", "quasi:gauss-bump")


def abs_coordinate(n: int = 1, i: int = 0) -> BodyOracle:
    return BodyOracle(n, lambda X: np.abs(X[:, i]), "symmetric_convex_function",
                      f"cvx:abs{i + 1}", {"norm": 1.0})


def scaled_norm(n: int) -> BodyOracle:
    """``||x|| / sqrt(n)``, unit 2-norm since ``E||x||^2 = n``."""
    s = math.sqrt(n)
    return BodyOracle(n, lambda X: np.sqrt(np.einsum("ij,ij->i", X, X)) / s,
                      "symmetric_convex_function", "cvx:norm", {"norm": 1.0})


MAXABS2_NORMALIZER = math.sqrt(1.0 + 2.0 / math.pi)  # E[max(x1^2, x2^2)] = 1 + 2/pi


def max_abs2(n: int = 2) -> BodyOracle:
    if n < 2:
        raise ValueError("max(|x1|, |x2|) needs n >= 2")
    return BodyOracle(n, lambda X: np.maximum(np.abs(X[:, 0]), np.abs(X[:, 1])) / MAXABS2_NORMALIZER,
                      "symmetric_convex_function", "cvx:maxabs2", {"norm": 1.0})


def hu_pair_library(n: int = 4) -> list[BodyOracle]:
    """Norm-one centrally symmetric convex functions for the convex-function
    variant of the inequality."""
    return [abs_coordinate(1), abs_coordinate(n, 0), abs_coordinate(n, 1),
            scaled_norm(n), max_abs2(n)]


def _split_params(body: str) -> dict:
    out = {}
    for part in re.split(r",(?=[A-Za-z_]+=)", body):
        if not part:
            continue
        key, eq, val = part.partition("=")
        if not eq:
            raise ValueError(f"malformed body parameter {part!r}")
        out[key.strip()] = val.strip()
    return out


def parse_body(spec: str, dim: int | None = None) -> BodyOracle:
    """Body/function spec strings: ``ball:r=<r>``, ``box:a=<a1,...>``,
    ``slab:v=<v1,...>,w=<r>``, ``ellipsoid:A=<matrix file>``,
    ``quasi:gauss-bump``, ``cvx:abs1|norm|maxabs2``, ``interval:r=<r>``."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "ball":
            return ball(float(_split_params(rest)["r"]), _need_dim(dim))
        if kind == "interval":
            return interval(float(_split_params(rest)["r"]))
        if kind == "box":
            a = [float(x) for x in _split_params(rest)["a"].split(",")]
            if dim is not None and len(a) == 1:
                a = a * dim
            return box(a)
        if kind == "slab":
            p = _split_params(rest)
            return slab([float(x) for x in p["v"].split(",")], float(p["w"]), dim)
        if kind == "ellipsoid":
            return ellipsoid(np.loadtxt(_split_params(rest)["A"], ndmin=2))
        if kind == "quasi" and rest == "gauss-bump":
            return gauss_bump(_need_dim(dim))
        if kind == "cvx":
            if rest == "abs1":
                return abs_coordinate(dim or 1)
            if rest == "norm":
                return scaled_norm(_need_dim(dim))
            if rest == "maxabs2":
                return max_abs2(dim or 2)
        if kind == "whole":
            return whole_space(_need_dim(dim))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed body spec {spec!r}: {exc}") from None
    raise ValueError(f"unknown body spec {spec!r}")


def _need_dim(dim):
    if dim is None:
        raise ValueError("this body needs an explicit dimension")
    return int(dim)


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    samples: int
    seed: int
    stream: int

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples,
                "seed": self.seed, "stream": self.stream}


def _mc_features(oracle: BodyOracle, features: Callable[[np.ndarray], np.ndarray],
                 samples: int, seed: int, stream: int, threads=None):
    """Means of ``oracle(x) * features(x)`` and the covariance of those means."""
    if samples < 2:
        raise ValueError("need at least two samples")

    def work(c, size):
        X = rng.normal_block(seed, stream, c, (size, oracle.dim))
        Z = oracle(X)[:, None] * features(X)
        return Z.sum(axis=0), Z.T @ Z

    parts = rng.map_chunks(work, samples, threads)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    N = float(samples)
    mean = s1 / N
    cov = (s2 - N * np.outer(mean, mean)) / (N - 1.0) / N
    return mean, cov


def mc_hermite_coeff(oracle: BodyOracle, alpha: Sequence[int], samples: int = 10**6,
                     seed: int = 0, stream: int = 0, threads=None) -> McEstimate:
    """``E[oracle(x) h_alpha(x)]`` under N(0, I)."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != oracle.dim:
        raise ValueError("multi-index length differs from oracle dimension")
    mean, cov = _mc_features(oracle, lambda X: hermite_multi(alpha, X)[:, None],
                             samples, seed, stream, threads)
    return McEstimate(float(mean[0]), float(math.sqrt(max(cov[0, 0], 0.0))), samples, seed, stream)


def influence_directions(oracle: BodyOracle, V: np.ndarray, samples: int = 10**6,
                         seed: int = 0, stream: int = 0, threads=None,
                         check: bool = True) -> list[McEstimate]:
    """``Inf_v[K] = E[-K(x) h_2(<x, v>)]`` for each row ``v`` of ``V`` on a
    shared sample stream."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    V = V / np.linalg.norm(V, axis=1, keepdims=True)
    mean, cov = _mc_features(oracle, lambda X: -hermite_eval(2, X @ V.T),
                             samples, seed, stream, threads)
    out = [McEstimate(float(m), float(math.sqrt(max(c, 0.0))), samples, seed, stream)
           for m, c in zip(mean, np.diag(cov))]
    if check and oracle.kind == "symmetric_convex_set":
        for v, est in zip(V, out):
            if est.value < -MC_SIGMA * est.stderr:
                raise HypothesisViolation(
                    f"negative influence {est.value!r} +- {est.stderr!r} along {v.tolist()}")
    return out


def influence_direction(oracle: BodyOracle, v, samples: int = 10**6, seed: int = 0,
                        stream: int = 0, threads=None) -> McEstimate:
    return influence_directions(oracle, [v], samples, seed, stream, threads)[0]


def interval_influence_closed_form(r: float) -> float:
    """``sqrt(2) r phi_N(r)`` for the interval ``[-r, r]``."""
    return SQRT2 * float(r) * float(normal_pdf(r))


def total_influence(oracle: BodyOracle, samples: int = 10**6, seed: int = 0,
                    stream: int = 0, threads=None) -> McEstimate:
    """``sum_i Inf_{e_i}[K] = E[K(x)(n - |x|^2)] / sqrt(2)``."""
    n = oracle.dim
    mean, cov = _mc_features(
        oracle, lambda X: ((n - np.einsum("ij,ij->i", X, X)) / SQRT2)[:, None],
        samples, seed, stream, threads)
    return McEstimate(float(mean[0]), float(math.sqrt(max(cov[0, 0], 0.0))), samples, seed, stream)


def degree2_indices(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


def _degree2_features(n: int):
    idx = degree2_indices(n)
    ii = np.array([i for i, _ in idx])
    jj = np.array([j for _, j in idx])
    diag = ii == jj

    def features(X):
        P = X[:, ii] * X[:, jj]
        P[:, diag] = (P[:, diag] - 1.0) / SQRT2
        return P

    return idx, features


@dataclass(frozen=True)
class Degree2Matrix:
    """``M_ii = sqrt(2) f~(2 e_i)``, ``M_ij = f~(e_i + e_j)``."""

    values: np.ndarray
    stderr: np.ndarray

    @classmethod
    def from_coefficients(cls, n: int, coeffs, errs) -> "Degree2Matrix":
        M = np.zeros((n, n))
        E = np.zeros((n, n))
        for (i, j), c, e in zip(degree2_indices(n), coeffs, errs):
            if i == j:
                M[i, i], E[i, i] = SQRT2 * c, SQRT2 * e
            else:
                M[i, j] = M[j, i] = c
                E[i, j] = E[j, i] = e
        return cls(M, E)

    def coefficient(self, i: int, j: int) -> float:
        return self.values[i, i] / SQRT2 if i == j else self.values[i, j]


@dataclass(frozen=True)
class Degree2Profile:
    matrix_f: Degree2Matrix
    matrix_g: Degree2Matrix
    a2: float
    a2_stderr: float
    a2_frobenius: float

    @property
    def n(self) -> int:
        return self.matrix_f.values.shape[0]


def degree2_profile(oracle_f: BodyOracle, oracle_g: BodyOracle, samples: int = 10**6,
                    seed: int = 0, threads=None,
                    streams: tuple[int, int] = (STREAM_F, STREAM_G)) -> Degree2Profile:
    """All degree-2 Hermite coefficients of both oracles and their level
    inner product ``a_2``.

    ``f`` and ``g`` use independent streams so the product estimator is
    unbiased; its stderr propagates the full coefficient covariances.
    """
    if oracle_f.dim != oracle_g.dim:
        raise ValueError("oracles have different dimensions")
    n = oracle_f.dim
    _, feats = _degree2_features(n)
    mf, cf = _mc_features(oracle_f, feats, samples, seed, streams[0], threads)
    mg, cg = _mc_features(oracle_g, feats, samples, seed, streams[1], threads)
    a2 = float(mf @ mg)
    var = float(mg @ cf @ mg + mf @ cg @ mf)
    Mf = Degree2Matrix.from_coefficients(n, mf, np.sqrt(np.clip(np.diag(cf), 0, None)))
    Mg = Degree2Matrix.from_coefficients(n, mg, np.sqrt(np.clip(np.diag(cg), 0, None)))
    frob = 0.5 * float(np.sum(Mf.values * Mg.values))
    return Degree2Profile(Mf, Mg, a2, math.sqrt(max(var, 0.0)), frob)


def ou_pair_sampler(rho: float, n: int, seed: int, samples: int,
                    streams: tuple[int, int] = (STREAM_OU_X, STREAM_OU_Z)):
    """Yield ``(x, y)`` chunks with ``y = rho x + sqrt(1 - rho^2) z``."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    s = math.sqrt(max(0.0, 1.0 - rho * rho))
    for c, size in enumerate(rng.chunk_sizes(samples)):
        x = rng.normal_block(seed, streams[0], c, (size, n))
        z = rng.normal_block(seed, streams[1], c, (size, n))
        yield x, rho * x + s * z


def _gap_estimate(K: BodyOracle, L: BodyOracle, samples: int, seed: int, threads=None):
    def work(c, size):
        X = rng.normal_block(seed, STREAM_GAP, c, (size, K.dim))
        k, l = K(X), L(X)
        Z = np.stack([k, l, k * l], axis=1)
        return Z.sum(axis=0), Z.T @ Z

    parts = rng.map_chunks(work, samples, threads)
    N = float(samples)
    m = sum(p[0] for p in parts) / N
    S = (sum(p[1] for p in parts) - N * np.outer(m, m)) / (N - 1.0)
    gap = m[2] - m[0] * m[1]
    grad = np.array([-m[1], -m[0], 1.0])  # delta method
    se = math.sqrt(max(float(grad @ S @ grad), 0.0) / N)
    return McEstimate(float(gap), se, samples, seed, STREAM_GAP), m[0], m[1]


def q_sweep(K: BodyOracle, L: BodyOracle, rho_grid: Sequence[float], samples: int,
            seed: int):
    """``q(rho) = E[K(x) L(y)]`` with common random numbers across the grid.

    Returns estimates and, for consecutive grid points, the stderr of the
    increment (computed per sample, so the shared noise cancels).
    """
    grid = [float(r) for r in rho_grid]
    N = samples
    s_q = np.zeros(len(grid))
    s_q2 = np.zeros(len(grid))
    s_d = np.zeros(max(len(grid) - 1, 0))
    s_d2 = np.zeros(max(len(grid) - 1, 0))
    for c, size in enumerate(rng.chunk_sizes(N)):
        x = rng.normal_block(seed, STREAM_OU_X, c, (size, K.dim))
        z = rng.normal_block(seed, STREAM_OU_Z, c, (size, K.dim))
        kx = K(x)
        vals = np.stack([kx * L(r * x + math.sqrt(max(0.0, 1 - r * r)) * z) for r in grid])
        s_q += vals.sum(axis=1)
        s_q2 += (vals**2).sum(axis=1)
        d = np.diff(vals, axis=0)
        s_d += d.sum(axis=1)
        s_d2 += (d**2).sum(axis=1)
    q = s_q / N
    q_se = np.sqrt(np.clip((s_q2 / N - q**2) / (N - 1), 0, None))
    d = s_d / N
    d_se = np.sqrt(np.clip((s_d2 / N - d**2) / (N - 1), 0, None))
    return grid, q, q_se, d, d_se


def verify_robust_gci(K: BodyOracle, L: BodyOracle,
                      rho_grid: Sequence[float] = tuple(np.round(np.linspace(0, 1, 11), 10)),
                      samples: int = 10**6, seed: int = 0, threads=None,
                      sweep_samples: int | None = None) -> CorrelationReport:
    """Monte Carlo check of the degree-2 lower bound for symmetric bodies
    (and, with the hypothesis recorded, for quasiconcave or convex-function
    oracles)."""
    if K.dim != L.dim:
        raise ValueError("oracles have different dimensions")
    if samples < 2:
        raise ValueError("samples must be positive")
    gap, mk, ml = _gap_estimate(K, L, samples, seed, threads)
    prof = degree2_profile(K, L, samples, seed, threads)
    grid, q, q_se, d, d_se = q_sweep(K, L, rho_grid, sweep_samples or samples, seed)
    sweep_ok = bool(np.all(d >= -MC_SIGMA * d_se))
    same_kind = K.kind == L.kind and K.kind != "other"
    hyp = {"kind_f": K.kind, "kind_g": L.kind, "dim": K.dim,
           "norm_f": None, "norm_g": None}
    notes = []
    a2 = prof.a2
    rep = make_report(gap.value, a2, list(zip(grid, q.tolist())), sweep_ok, hyp, same_kind,
                      0.0, j_star=2, notes=notes,
                      gap_tol=MC_SIGMA * gap.stderr, a_tol=MC_SIGMA * prof.a2_stderr)
    rep.extras.update({
        "gap": gap.to_dict(), "a2": {"value": a2, "stderr": prof.a2_stderr},
        "a2_frobenius": prof.a2_frobenius, "mean_f": float(mk), "mean_g": float(ml),
        "sweep_stderr": q_se.tolist(), "increments": d.tolist(),
        "increment_stderr": d_se.tolist(), "samples": samples, "seed": seed,
    })
    return rep


def chi_square_cdf(dof: int, x: float) -> float:
    """Regularised lower incomplete gamma ``P(dof/2, x/2)``."""
    if x <= 0:
        return 0.0
    return float(gammainc(0.5 * dof, 0.5 * x))


def chi_square_quantile(dof: int, q: float, tol: float = 1e-10) -> float:
    """Bisection inverse of :func:`chi_square_cdf`."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("quantile level must lie in [0, 1]")
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return math.inf
    lo, hi = 0.0, max(1.0, float(dof))
    while chi_square_cdf(dof, hi) < q:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if chi_square_cdf(dof, mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ball_degree2_closed_form(r: float, n: int) -> float:
    """Exact ``K~(2 e_i)`` for the origin ball of radius ``r`` in R^n.

    ``E[K |x|^2] = n F_{n+2}(r^2)`` gives ``K~(2e_i) = (F_{n+2} - F_n)(r^2) / sqrt(2)``.
    """
    x = float(r) ** 2
    return (chi_square_cdf(n + 2, x) - chi_square_cdf(n, x)) / SQRT2


@dataclass
class BallsExperiment:
    eps: float
    n: int
    r1: float
    r2: float
    gap: float
    a2: McEstimate
    a2_exact: float
    ratio: float
    ratio_exact: float
    a2_lower_ok: bool

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["a2"] = self.a2.to_dict()
        d["phi_a2"] = phi(clip_unit(self.a2.value))
        return d


def balls_tightness(eps: float, n: int, samples: int = 10**6, seed: int = 0,
                    threads=None) -> BallsExperiment:
    """Nested origin balls with Gaussian masses ``eps`` and ``1 - eps``.

    The gap is exactly ``eps^2``; ``a_2 = sum_i K~(2e_i) L~(2e_i)`` is
    estimated by Monte Carlo (off-diagonal terms vanish by symmetry) and
    also returned in closed form.
    """
    if not 0.0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    r1 = math.sqrt(chi_square_quantile(n, eps))
    r2 = math.sqrt(chi_square_quantile(n, 1.0 - eps))
    K, L = ball(r1, n), ball(r2, n)

    def diag(X):
        return (X * X - 1.0) / SQRT2

    mk, ck = _mc_features(K, diag, samples, seed, STREAM_F, threads)
    ml, cl = _mc_features(L, diag, samples, seed, STREAM_G, threads)
    a2 = float(mk @ ml)
    se = math.sqrt(max(float(ml @ ck @ ml + mk @ cl @ mk), 0.0))
    exact = n * ball_degree2_closed_form(r1, n) * ball_degree2_closed_form(r2, n)
    gap = eps * eps
    est = McEstimate(a2, se, samples, seed, STREAM_F)
    return BallsExperiment(eps, n, r1, r2, gap, est, exact,
                           gap / phi(clip_unit(a2)), gap / phi(clip_unit(exact)),
                           a2 >= gap - MC_SIGMA * se)
