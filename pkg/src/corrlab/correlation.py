"""Correlation gaps, level inner products and the quantitative bound reports.

Tolerances: identities checked by exact enumeration use 1e-12 / 1e-10,
anything downstream of Gram-Schmidt uses 1e-9.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .finite_product import (
    Basis, TabulatedFunction, _same_space, cardinality_table, degree_table,
    fourier, is_monotone, noise_definitional, project_fi,
)
from .power_series import normalized_gap_series, sup_unit_interval

DEFAULT_RHO_GRID = tuple(np.round(np.linspace(0.0, 1.0, 21), 10))


def phi(x: float) -> float:
    """``min(x, x / log^2(1/x))`` on [0, 1] with natural log."""
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"phi is defined on [0, 1], got {x!r}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    return min(x, x / math.log(1.0 / x) ** 2)


def psi(x: float) -> float:
    """``x / log(e/x)``, continued by 0 at 0."""
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"psi is defined on [0, 1], got {x!r}")
    if x == 0.0:
        return 0.0
    return x / (1.0 - math.log(x))


def binary_entropy(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log(p) - (1 - p) * math.log1p(-p)


def clip_unit(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def bound_ratio(gap: float, phi_value: float) -> float:
    if phi_value > 0:
        return gap / phi_value
    if gap > 0:
        return math.inf
    return 1.0


def correlation_gap(f: TabulatedFunction, g: TabulatedFunction) -> float:
    _same_space(f.space, g.space)
    return f.inner(g) - f.mean() * g.mean()


@dataclass(frozen=True)
class LevelProfile:
    j_star: int
    a: dict
    grading: str = "card"

    def level(self, ell: int) -> float:
        return float(self.a.get(ell, 0.0))

    @property
    def a_jstar(self) -> float:
        return self.level(self.j_star)

    @property
    def gap(self) -> float:
        return sum(v for ell, v in self.a.items() if ell > 0)

    def q(self, rho: float) -> float:
        return sum(v * rho**ell for ell, v in self.a.items())


def level_profile(f: TabulatedFunction, g: TabulatedFunction, basis: Basis,
                  grading: str = "card", j_star: int = 1) -> LevelProfile:
    """``a_l = sum over level-l multi-indices of f^(alpha) g^(alpha)``.

    ``grading`` is ``"card"`` (``#alpha``) or ``"degree"`` (``|alpha|``). Under
    ``#alpha`` grading, ``a_1`` is cross-checked against
    ``sum_i E[f^{=i} g^{=i}]`` computed from the one-coordinate averages.
    """
    _same_space(f.space, g.space)
    fe, ge = fourier(f, basis), fourier(g, basis)
    if grading == "card":
        lev = cardinality_table(f.space.shape)
    elif grading == "degree":
        lev = degree_table(f.space.shape)
    else:
        raise ValueError(f"unknown grading {grading!r}")
    prod = fe.coeffs * ge.coeffs
    a = {int(ell): float(np.sum(prod[lev == ell])) for ell in np.unique(lev)}
    if grading == "card":
        es = singleton_sum(f, g)
        scale = max(1.0, f.norm() * g.norm())
        if abs(a.get(1, 0.0) - es) > 1e-10 * scale:
            raise ArithmeticError(f"a_1 routes disagree: {a.get(1, 0.0)!r} vs {es!r}")
    return LevelProfile(j_star, a, grading)


def singleton_sum(f: TabulatedFunction, g: TabulatedFunction) -> float:
    """``sum_i (E[f_i g_i] - E[f] E[g])`` from coordinate averages alone."""
    ef, eg = f.mean(), g.mean()
    total = 0.0
    for i in range(f.space.n):
        fi, gi = project_fi(f, i), project_fi(g, i)
        total += fi.inner(gi) - ef * eg
    return total


def noise_sweep(f: TabulatedFunction, g: TabulatedFunction,
                grid: Sequence[float] = DEFAULT_RHO_GRID, slack: float = 1e-12):
    """``[(rho, <T_rho f, g>)]`` computed exactly, plus a monotone verdict."""
    pts = [(float(r), noise_definitional(f, float(r)).inner(g)) for r in grid]
    qs = [q for _, q in pts]
    ok = all(b >= a - slack for a, b in zip(qs, qs[1:]))
    return pts, ok


@dataclass
class CorrelationReport:
    gap: float
    a_jstar: float
    phi_value: float
    psi_value: float
    ratio: float
    sweep_monotone: bool
    sweep: list = field(default_factory=list)
    hypotheses: dict = field(default_factory=dict)
    verdict: str = "pass"
    notes: list = field(default_factory=list)
    j_star: int = 1
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "gap": self.gap, "a_jstar": self.a_jstar, "j_star": self.j_star,
            "phi": self.phi_value, "psi": self.psi_value,
            "ratio": None if math.isinf(self.ratio) else self.ratio,
            "ratio_infinite": math.isinf(self.ratio),
            "sweep": [{"rho": r, "q": q} for r, q in self.sweep],
            "sweep_monotone": self.sweep_monotone,
            "hypotheses": self.hypotheses, "verdict": self.verdict,
            "notes": list(self.notes),
        }
        if self.extras:
            out["extras"] = self.extras
        return out


def make_report(gap: float, a_jstar: float, sweep, sweep_ok: bool,
                hypotheses: dict, hyp_met: bool, tol: float,
                j_star: int = 1, notes=None, gap_tol: float | None = None,
                a_tol: float | None = None) -> CorrelationReport:
    """Shared tail of every verify routine: Phi/Psi, ratio and verdict.

    ``gap_tol`` / ``a_tol`` override ``tol`` for the two sign checks (Monte
    Carlo callers pass 4 standard errors).
    """
    notes = list(notes or [])
    gap_tol = tol if gap_tol is None else gap_tol
    a_tol = tol if a_tol is None else a_tol
    a_clip = clip_unit(a_jstar)
    if a_jstar > 1.0:
        notes.append(f"a_jstar={a_jstar!r} clipped to 1 before phi")
    ph, ps = phi(a_clip), psi(a_clip)
    if a_clip == 0.0:
        notes.append("a_jstar = 0: the bound is vacuous")
    if hyp_met:
        failures = []
        if gap < -gap_tol:
            failures.append("gap < 0")
        if a_jstar < -a_tol:
            failures.append("a_jstar < 0")
        if not sweep_ok:
            failures.append("noise sweep not monotone")
        verdict = "violation" if failures else "pass"
        notes.extend(failures)
    else:
        verdict = "hypotheses-unmet"
    return CorrelationReport(gap, a_jstar, ph, ps, bound_ratio(gap, ph), sweep_ok,
                             list(sweep), hypotheses, verdict, notes, j_star)


def verify_bound(f: TabulatedFunction, g: TabulatedFunction, basis: Basis,
                 j_star: int = 1, normalize: bool = False,
                 grid: Sequence[float] = DEFAULT_RHO_GRID,
                 tamper=None) -> CorrelationReport:
    """Check the monotone-family lower bound for one pair.

    ``tamper`` (test hook) receives the level profile and may return a
    corrupted one, which the verdict must then catch.
    """
    notes = []
    nf, ng = f.norm(), g.norm()
    if normalize:
        if nf > 1.0:
            f = f.scale(1.0 / nf)
            notes.append(f"f divided by its norm {nf!r}")
        if ng > 1.0:
            g = g.scale(1.0 / ng)
            notes.append(f"g divided by its norm {ng!r}")
    hyp = {
        "monotone_f": is_monotone(f), "monotone_g": is_monotone(g),
        "norm_f": f.norm(), "norm_g": g.norm(),
    }
    norm_ok = hyp["norm_f"] <= 1 + 1e-9 and hyp["norm_g"] <= 1 + 1e-9
    if not norm_ok:
        notes.append("norm exceeds 1; rerun with normalize=True")
    prof = level_profile(f, g, basis, "card", j_star)
    if tamper is not None:
        prof = tamper(prof)
    sweep, ok = noise_sweep(f, g, grid)
    met = hyp["monotone_f"] and hyp["monotone_g"] and norm_ok
    return make_report(correlation_gap(f, g), prof.a_jstar, sweep, ok, hyp, met,
                       1e-9, j_star, notes)


@dataclass(frozen=True)
class FrameworkAudit:
    passed: bool
    length_ok: bool
    divisibility_ok: bool
    sign_ok: bool
    sup: float | None
    sup_times_a: float | None
    dominated: bool | None
    offending_levels: tuple = ()

    def to_dict(self) -> dict:
        return dict(self.__dict__, offending_levels=list(self.offending_levels))


def framework_audit(levels: LevelProfile, tol: float = 1e-9) -> FrameworkAudit:
    """Replay the interpolation argument on a level profile.

    Checks total absolute level mass <= 1, vanishing off multiples of j*,
    ``a_j* >= 0``, then builds the normalised gap series and confirms
    ``a_j* * sup p <= gap`` (the endpoint dominates the interpolation).
    """
    js = levels.j_star
    length_ok = sum(abs(v) for v in levels.a.values()) <= 1.0 + tol
    bad = tuple(sorted(ell for ell, v in levels.a.items()
                       if ell % js and abs(v) >= tol))
    div_ok = not bad
    a = levels.a_jstar
    sign_ok = a >= -tol
    sup = dominated = sup_a = None
    if a > tol:
        top = max(levels.a)
        series = [levels.level(ell * js) for ell in range(1, top // js + 1)]
        p = normalized_gap_series(series)
        sup = sup_unit_interval(p).value
        sup_a = a * sup
        dominated = sup_a <= levels.gap + tol
    passed = length_ok and div_ok and sign_ok and dominated is not False
    return FrameworkAudit(passed, length_ok, div_ok, sign_ok, sup, sup_a, dominated, bad)


class CertificateRefusal(Exception):
    """No disjoint partition: ``witness`` is a coordinate both functions use."""

    def __init__(self, message: str, witness: int | None = None):
        super().__init__(message)
        self.witness = witness


def depends_on(f: TabulatedFunction, i: int, tol: float = 1e-9) -> bool:
    """Does changing coordinate ``i`` alone ever change ``f``?"""
    v = f.values
    ref = np.take(v, [0], axis=i)
    return bool(np.max(np.abs(v - ref)) > tol)


def disjointness_certificate(f: TabulatedFunction, g: TabulatedFunction, tol: float = 1e-9):
    """Partition ``S`` (0-based coordinates ``f`` may use; ``g`` uses the
    complement) for monotone pairs with vanishing singleton mass."""
    if not (is_monotone(f) and is_monotone(g)):
        raise ValueError("disjointness certificate needs monotone inputs")
    a1 = singleton_sum(f, g)
    if a1 >= tol:
        raise CertificateRefusal(f"a_1 = {a1!r} > 0", None)
    S = set()
    ef, eg = f.mean(), g.mean()
    for i in range(f.space.n):
        dfi = (project_fi(f, i).values - ef)
        dgi = (project_fi(g, i).values - eg)
        w = f.space.pi[i]
        nf = math.sqrt(float(np.sum(w * dfi**2)))
        ng = math.sqrt(float(np.sum(w * dgi**2)))
        if min(nf, ng) >= tol:
            raise CertificateRefusal(f"both functions vary on average in coordinate {i}", i)
        if depends_on(f, i, tol):
            if depends_on(g, i, tol):
                raise CertificateRefusal(f"both functions depend on coordinate {i}", i)
            S.add(i)
    for i in range(f.space.n):
        if i not in S and depends_on(f, i, tol):
            raise CertificateRefusal(f"f depends on coordinate {i} outside S", i)
        if i in S and depends_on(g, i, tol):
            raise CertificateRefusal(f"g depends on coordinate {i} inside S", i)
    return frozenset(S)


@dataclass(frozen=True)
class PairSweep:
    """Vectorised statistics for every ordered pair of a function list."""

    gap: np.ndarray
    a1: np.ndarray
    q: np.ndarray  # shape (len(grid), N, N)
    grid: tuple

    def monotone(self, slack: float = 1e-12) -> np.ndarray:
        return np.all(np.diff(self.q, axis=0) >= -slack, axis=0)


def pair_sweep(functions: Sequence[TabulatedFunction], basis: Basis,
               grid: Sequence[float] = DEFAULT_RHO_GRID) -> PairSweep:
    """Gap, ``a_1`` and definitional ``<T_rho f, g>`` for all pairs at once."""
    sp = basis.space
    w = sp.weights().ravel()
    F = np.array([f.values.ravel() for f in functions])
    coeffs = np.array([fourier(f, basis).coeffs.ravel() for f in functions])
    card = cardinality_table(sp.shape).ravel()
    mean = F @ w
    gap = (F * w) @ F.T - np.outer(mean, mean)
    c1 = coeffs[:, card == 1]
    a1 = c1 @ c1.T
    qs = []
    for r in grid:
        T = np.array([noise_definitional(f, float(r)).values.ravel() for f in functions])
        qs.append((T * w) @ F.T)
    return PairSweep(gap, a1, np.array(qs), tuple(float(r) for r in grid))
