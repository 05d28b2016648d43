"""Harmonic analysis on finite product probability spaces.

Functions are dense tables over ``Omega^n`` stored as ndarrays of shape
``(m,) * n``; flattening in C order gives the lexicographic enumeration with
coordinate 1 most significant, which is the on-disk order.
"""
from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

MIN_PROB = 1e-12
MAX_TABLE = 250_000
MAX_BOOLEAN_N = 12


class SpaceMismatchError(ValueError):
    pass


class DegenerateBasisError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FiniteSpace:
    """``(Omega, pi)^n``. ``pi`` is either one probability vector shared by
    all coordinates or an ``(n, m)`` array of per-coordinate measures."""

    omega: tuple[float, ...]
    pi: np.ndarray
    n: int

    def __post_init__(self):
        omega = tuple(float(w) for w in self.omega)
        pi = np.asarray(self.pi, dtype=float)
        m = len(omega)
        if m < 2:
            raise ValueError("need at least two atoms")
        if self.n < 1:
            raise ValueError("need n >= 1")
        if pi.ndim == 1:
            pi = np.broadcast_to(pi, (self.n, m))
        if pi.shape != (self.n, m):
            raise ValueError(f"pi has shape {pi.shape}, expected ({self.n}, {m})")
        if np.any(np.abs(pi.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("probabilities must sum to 1")
        if np.any(pi < MIN_PROB):
            raise ValueError("pi must have full support (all entries >= 1e-12)")
        if m**self.n > MAX_TABLE or (m == 2 and self.n > MAX_BOOLEAN_N):
            raise ValueError(f"table size {m}^{self.n} exceeds the dense-table cap")
        object.__setattr__(self, "omega", omega)
        pi = np.array(pi)
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    @property
    def m(self) -> int:
        return len(self.omega)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n

    @property
    def size(self) -> int:
        return self.m**self.n

    @property
    def identical(self) -> bool:
        return bool(np.all(self.pi == self.pi[0]))

    def __eq__(self, other):
        return (isinstance(other, FiniteSpace) and self.omega == other.omega
                and self.n == other.n and np.array_equal(self.pi, other.pi))

    def __hash__(self):
        return hash((self.omega, self.n, self.pi.tobytes()))

    def weights(self) -> np.ndarray:
        """Product measure as a table."""
        w = np.ones(())
        for i in range(self.n):
            w = np.multiply.outer(w, self.pi[i])
        return w

    def points(self) -> np.ndarray:
        """Atom labels of every point, shape ``(m^n, n)`` in table order."""
        grid = np.array(list(itertools.product(self.omega, repeat=self.n)))
        return grid.reshape(self.size, self.n)

    def with_n(self, n: int) -> "FiniteSpace":
        return FiniteSpace(self.omega, self.pi[0], n)

    def coordinate(self, i: int) -> "FiniteSpace":
        return FiniteSpace(self.omega, self.pi[i], 1)

    def to_dict(self) -> dict:
        pi = self.pi[0].tolist() if self.identical else self.pi.tolist()
        return {"omega": list(self.omega), "pi": pi, "n": self.n}

    @classmethod
    def uniform(cls, m: int, n: int) -> "FiniteSpace":
        return cls(tuple(range(m)), np.full(m, 1.0 / m), n)

    @classmethod
    def pbiased(cls, p: float, n: int) -> "FiniteSpace":
        """``{-1, 1}^n`` with ``pi(-1) = p``."""
        return cls((-1.0, 1.0), np.array([p, 1.0 - p]), n)


_SPEC_RE = re.compile(r"^(uniform|pbiased):(.*)$")


def parse_space(spec: str | dict) -> FiniteSpace:
    """Parse ``uniform:m=<m>,n=<n>``, ``pbiased:p=<p>,n=<n>`` or a JSON
    object ``{omega, pi, n}`` (string or already-decoded dict)."""
    if isinstance(spec, dict):
        return FiniteSpace(tuple(spec["omega"]), np.asarray(spec["pi"]), int(spec["n"]))
    s = spec.strip()
    if s.startswith("{"):
        return parse_space(json.loads(s))
    mt = _SPEC_RE.match(s)
    if not mt:
        raise ValueError(f"malformed space spec {spec!r}")
    kind, rest = mt.groups()
    params = {}
    for part in filter(None, rest.split(",")):
        key, _, val = part.partition("=")
        if not val:
            raise ValueError(f"malformed space spec {spec!r}")
        params[key.strip()] = val.strip()
    try:
        if kind == "uniform":
            return FiniteSpace.uniform(int(params["m"]), int(params["n"]))
        return FiniteSpace.pbiased(float(params["p"]), int(params["n"]))
    except KeyError as exc:
        raise ValueError(f"space spec {spec!r} misses {exc}") from None


@dataclass(frozen=True)
class MultiIndex:
    entries: tuple[int, ...]

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for i, a in enumerate(self.entries) if a != 0)

    @property
    def cardinality(self) -> int:
        return sum(1 for a in self.entries if a != 0)

    @property
    def degree(self) -> int:
        return sum(self.entries)

    @classmethod
    def unit(cls, n: int, i: int, j: int = 1) -> "MultiIndex":
        e = [0] * n
        e[i] = j
        return cls(tuple(e))


@dataclass(frozen=True, eq=False)
class TabulatedFunction:
    space: FiniteSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.space.size:
            raise SpaceMismatchError(
                f"table has {v.size} entries, space needs {self.space.size}")
        v = np.array(v.reshape(self.space.shape))
        if not np.all(np.isfinite(v)):
            raise ValueError("table values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def mean(self) -> float:
        return float(np.sum(self.values * self.space.weights()))

    def inner(self, other: "TabulatedFunction") -> float:
        _same_space(self.space, other.space)
        return float(np.sum(self.values * other.values * self.space.weights()))

    def norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def __add__(self, other):
        _same_space(self.space, other.space)
        return TabulatedFunction(self.space, self.values + other.values)

    def __sub__(self, other):
        _same_space(self.space, other.space)
        return TabulatedFunction(self.space, self.values - other.values)

    def scale(self, c: float) -> "TabulatedFunction":
        return TabulatedFunction(self.space, self.values * c)

    def to_dict(self) -> dict:
        return {"space": self.space.to_dict(), "values": self.values.ravel().tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "TabulatedFunction":
        return cls(parse_space(data["space"]), np.asarray(data["values"], dtype=float))


def _same_space(a: FiniteSpace, b: FiniteSpace):
    if a != b:
        raise SpaceMismatchError("functions live on different spaces")


@dataclass(frozen=True, eq=False)
class Basis:
    """Per-coordinate orthonormal bases; ``phi[i, j, w]`` = ``phi_j`` of
    coordinate ``i`` at atom ``w``."""

    space: FiniteSpace
    phi: np.ndarray

    def coordinate_matrix(self, i: int) -> np.ndarray:
        return self.phi[i]

    def analysis_matrices(self) -> np.ndarray:
        # A[i, j, w] = pi_i(w) phi_j(w): E[f phi_j] along axis i
        return self.phi * self.space.pi[:, None, :]

    def basis_function(self, alpha: Sequence[int]) -> TabulatedFunction:
        v = np.ones(())
        for i, a in enumerate(alpha):
            v = np.multiply.outer(v, self.phi[i, a])
        return TabulatedFunction(self.space, v)


def _gram_schmidt(omega: np.ndarray, pi: np.ndarray, order: Sequence[int]) -> np.ndarray:
    m = len(omega)
    # standardised labels span the same monomial flag; better conditioned
    x = (omega - omega.mean()) / (omega.std() or 1.0)
    out = []
    for power in order:
        v = x**power
        for _ in range(2):  # second pass re-orthogonalises
            for u in out:
                v = v - np.sum(pi * u * v) * u
        nrm = np.sqrt(np.sum(pi * v * v))
        if nrm < 1e-12:
            raise DegenerateBasisError("Gram matrix is singular (duplicate atoms?)")
        # coefficient of x**power stays +1 before scaling: sign is canonical
        out.append(v / nrm)
    phi = np.array(out)
    phi[0] = 1.0
    assert phi.shape == (m, m)
    return phi


def build_basis(space: FiniteSpace, monomial_order: Sequence[int] | None = None) -> Basis:
    """Orthonormal basis from Gram-Schmidt on ``1, x, ..., x^(m-1)``.

    ``monomial_order`` permutes the non-constant monomials (its first entry
    must be 0) and yields a different but equally valid basis.
    """
    m = space.m
    order = list(range(m)) if monomial_order is None else list(monomial_order)
    if sorted(order) != list(range(m)) or order[0] != 0:
        raise ValueError("monomial_order must be a permutation of 0..m-1 starting at 0")
    omega = np.array(space.omega)
    if len(set(space.omega)) != m:
        raise DegenerateBasisError("atoms must be distinct")
    phi = np.stack([_gram_schmidt(omega, space.pi[i], order) for i in range(space.n)])
    return Basis(space, phi)


def _apply_axes(table: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Contract axis ``i`` of ``table`` with ``mats[i]`` (``out_i = M_i @ in_i``)."""
    out = table
    for i, mat in enumerate(mats):
        out = np.moveaxis(np.tensordot(mat, out, axes=([1], [i])), 0, i)
    return out


def cardinality_table(shape: tuple[int, ...]) -> np.ndarray:
    """``#alpha`` for every multi-index of a coefficient tensor."""
    card = np.zeros(shape, dtype=int)
    for i in range(len(shape)):
        idx = [None] * len(shape)
        idx[i] = slice(None)
        card = card + (np.arange(shape[i]) != 0)[tuple(idx)]
    return card


def degree_table(shape: tuple[int, ...]) -> np.ndarray:
    deg = np.zeros(shape, dtype=int)
    for i in range(len(shape)):
        idx = [None] * len(shape)
        idx[i] = slice(None)
        deg = deg + np.arange(shape[i])[tuple(idx)]
    return deg


@dataclass(frozen=True, eq=False)
class FourierExpansion:
    space: FiniteSpace
    basis: Basis
    coeffs: np.ndarray

    def __getitem__(self, alpha) -> float:
        if isinstance(alpha, MultiIndex):
            alpha = alpha.entries
        return float(self.coeffs[tuple(alpha)])

    def items(self) -> Iterator[tuple[MultiIndex, float]]:
        for alpha in itertools.product(range(self.space.m), repeat=self.space.n):
            yield MultiIndex(alpha), float(self.coeffs[alpha])

    def inverse(self) -> TabulatedFunction:
        mats = [self.basis.phi[i].T for i in range(self.space.n)]
        return TabulatedFunction(self.space, _apply_axes(self.coeffs, mats))

    def weight(self) -> float:
        return float(np.sum(self.coeffs**2))


def fourier(f: TabulatedFunction, basis: Basis) -> FourierExpansion:
    """``f^(alpha) = E[f phi_alpha]`` for all ``m^n`` multi-indices."""
    _same_space(f.space, basis.space)
    A = basis.analysis_matrices()
    coeffs = _apply_axes(f.values, list(A))
    return FourierExpansion(f.space, basis, coeffs)


@dataclass(frozen=True, eq=False)
class EfronSteinDecomposition:
    space: FiniteSpace
    components: dict = field(default_factory=dict)

    def __getitem__(self, S) -> TabulatedFunction:
        S = frozenset(S)
        if S in self.components:
            return self.components[S]
        return TabulatedFunction(self.space, np.zeros(self.space.shape))

    def total(self) -> TabulatedFunction:
        acc = np.zeros(self.space.shape)
        for comp in self.components.values():
            acc = acc + comp.values
        return TabulatedFunction(self.space, acc)


def support_masks(shape: tuple[int, ...]) -> Iterator[tuple[frozenset, np.ndarray]]:
    n = len(shape)
    nonzero = [np.arange(shape[i]) != 0 for i in range(n)]
    for r in range(n + 1):
        for S in itertools.combinations(range(n), r):
            mask = np.ones(())
            for i in range(n):
                mask = np.multiply.outer(mask, nonzero[i] if i in S else ~nonzero[i])
            yield frozenset(S), mask.astype(bool)


def efron_stein(f: TabulatedFunction, basis: Basis, tol: float = 1e-13) -> EfronSteinDecomposition:
    """``f^{=S} = sum_{supp(alpha) = S} f^(alpha) phi_alpha``; components whose
    coefficients are all below ``tol * max(1, max|f|)`` are dropped."""
    fe = fourier(f, basis)
    scale = tol * max(1.0, float(np.max(np.abs(f.values))))
    comps = {}
    for S, mask in support_masks(f.space.shape):
        block = np.where(mask, fe.coeffs, 0.0)
        if np.max(np.abs(block)) <= scale:
            continue
        comps[S] = FourierExpansion(f.space, basis, block).inverse()
    return EfronSteinDecomposition(f.space, comps)


def _check_rho(rho: float):
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho!r}")


def noise_spectral(f: TabulatedFunction, basis: Basis, rho: float) -> TabulatedFunction:
    """Multiply each coefficient by ``rho ** #alpha`` and transform back."""
    _check_rho(rho)
    fe = fourier(f, basis)
    mult = float(rho) ** cardinality_table(f.space.shape)
    return FourierExpansion(f.space, basis, fe.coeffs * mult).inverse()


def coordinate_noise(f: TabulatedFunction, i: int, rho: float) -> TabulatedFunction:
    """Keep coordinate ``i`` with probability ``rho``, else redraw it from
    ``pi_i``; exact expectation."""
    _check_rho(rho)
    sp = f.space
    if not 0 <= i < sp.n:
        raise IndexError(f"coordinate {i} out of range for n={sp.n}")
    avg = np.tensordot(f.values, sp.pi[i], axes=([i], [0]))
    avg = np.expand_dims(avg, i)
    return TabulatedFunction(sp, rho * f.values + (1.0 - rho) * avg)


def noise_definitional(f: TabulatedFunction, rho: float) -> TabulatedFunction:
    """Replacement-noise expectation computed one coordinate at a time."""
    _check_rho(rho)
    out = f
    for i in range(f.space.n):
        out = coordinate_noise(out, i, rho)
    return out


def project_fi(f: TabulatedFunction, i: int) -> TabulatedFunction:
    """Average of ``f`` over all coordinates except ``i``, as a function on
    ``(Omega, pi_i)``."""
    sp = f.space
    v = f.values
    for j in reversed(range(sp.n)):
        if j != i:
            v = np.tensordot(v, sp.pi[j], axes=([j], [0]))
    return TabulatedFunction(sp.coordinate(i), v)


def is_monotone(f: TabulatedFunction, tol: float = 1e-12) -> bool:
    """Nondecreasing along every covering pair (one coordinate, one step)."""
    v = f.values
    for i in range(f.space.n):
        if np.any(np.diff(v, axis=i) < -tol):
            return False
    return True


def is_monotone_bruteforce(f: TabulatedFunction) -> bool:
    """Quadratic scan over all comparable pairs; test oracle for
    :func:`is_monotone`."""
    pts = np.array(list(itertools.product(range(f.space.m), repeat=f.space.n)))
    vals = f.values.ravel()
    le = np.all(pts[:, None, :] <= pts[None, :, :], axis=2)
    return not np.any(le & (vals[:, None] > vals[None, :]))
