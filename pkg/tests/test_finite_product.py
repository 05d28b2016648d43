import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrlab import finite_product as fp

import oracles


def random_space(g, m, n):
    pi = g.dirichlet(np.ones(m) * 2, size=n)
    pi = pi / pi.sum(axis=1, keepdims=True)
    return fp.FiniteSpace(tuple(float(x) for x in sorted(g.normal(size=m))), pi, n)


def test_space_validation():
    with pytest.raises(ValueError):
        fp.FiniteSpace((0, 1), np.array([0.5, 0.6]), 2)
    with pytest.raises(ValueError):
        fp.FiniteSpace((0, 1), np.array([1.0, 0.0]), 2)
    with pytest.raises(ValueError):
        fp.FiniteSpace((0,), np.array([1.0]), 2)
    with pytest.raises(ValueError):
        fp.FiniteSpace.uniform(2, 13)


def test_parse_space():
    s = fp.parse_space("uniform:m=3,n=2")
    assert s.m == 3 and s.n == 2 and s.size == 9
    p = fp.parse_space("pbiased:p=0.1,n=3")
    assert p.omega == (-1.0, 1.0) and p.pi[0][0] == pytest.approx(0.1)
    j = fp.parse_space('{"omega": [0, 1, 2], "pi": [0.2, 0.3, 0.5], "n": 2}')
    assert j.m == 3
    assert fp.parse_space(j.to_dict()) == j
    for bad in ("uniform:m=2", "cube:n=2", "uniform:m=,n=2"):
        with pytest.raises(ValueError):
            fp.parse_space(bad)


def test_uniform_boolean_basis():
    b = fp.build_basis(fp.FiniteSpace.uniform(2, 1))
    assert b.phi[0, 0].tolist() == [1.0, 1.0]
    assert b.phi[0, 1] == pytest.approx([-1.0, 1.0])


def test_pbiased_basis_closed_form():
    p = 0.1
    b = fp.build_basis(fp.FiniteSpace.pbiased(p, 1))
    mu, sigma = 1 - 2 * p, 2 * np.sqrt(p * (1 - p))
    assert b.phi[0, 1] == pytest.approx([(-1 - mu) / sigma, (1 - mu) / sigma])


def test_basis_orthonormal_random():
    g = np.random.default_rng(1)
    for m in (2, 3, 5):
        sp = random_space(g, m, 2)
        b = fp.build_basis(sp)
        for i in range(2):
            G = (b.phi[i] * sp.pi[i]) @ b.phi[i].T
            assert np.max(np.abs(G - np.eye(m))) < 1e-12


def test_duplicate_atoms_rejected():
    sp = fp.FiniteSpace((0.0, 0.0, 1.0), np.array([0.3, 0.3, 0.4]), 1)
    with pytest.raises(fp.DegenerateBasisError):
        fp.build_basis(sp)
    with pytest.raises(ValueError):
        fp.build_basis(fp.FiniteSpace.uniform(3, 1), [1, 0, 2])


def test_and_coefficients():
    sp = fp.FiniteSpace.uniform(2, 2)
    f = fp.TabulatedFunction(sp, [0, 0, 0, 1])
    fe = fp.fourier(f, fp.build_basis(sp))
    assert [v for _, v in fe.items()] == pytest.approx([0.25] * 4)


def test_constant_single_coefficient():
    sp = fp.FiniteSpace.uniform(3, 2)
    fe = fp.fourier(fp.TabulatedFunction(sp, np.full(9, 2.0)), fp.build_basis(sp))
    nz = [a for a, v in fe.items() if abs(v) > 1e-12]
    assert nz == [fp.MultiIndex((0, 0))] and fe[(0, 0)] == pytest.approx(2.0)


def test_space_mismatch():
    a, b = fp.FiniteSpace.uniform(2, 2), fp.FiniteSpace.uniform(2, 3)
    with pytest.raises(fp.SpaceMismatchError):
        fp.TabulatedFunction(a, np.zeros(4)).inner(fp.TabulatedFunction(b, np.zeros(8)))
    with pytest.raises(fp.SpaceMismatchError):
        fp.TabulatedFunction(a, np.zeros(5))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(1, 3), st.integers(0, 2**32 - 1),
       st.sampled_from([0.0, 0.3, 0.7, 1.0]))
def test_noise_routes_agree(m, n, seed, rho):
    g = np.random.default_rng(seed)
    sp = random_space(g, m, n)
    f = fp.TabulatedFunction(sp, g.normal(size=sp.size))
    b = fp.build_basis(sp)
    d = fp.noise_spectral(f, b, rho).values - fp.noise_definitional(f, rho).values
    assert np.max(np.abs(d)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_parseval_and_inverse(m, n, seed):
    g = np.random.default_rng(seed)
    sp = random_space(g, m, n)
    f = fp.TabulatedFunction(sp, g.normal(size=sp.size))
    fe = fp.fourier(f, fp.build_basis(sp))
    assert abs(fe.weight() - f.inner(f)) < 1e-9
    assert np.max(np.abs(fe.inverse().values - f.values)) < 1e-10


def test_efron_stein_matches_inclusion_exclusion():
    g = np.random.default_rng(3)
    for m, n in ((2, 3), (3, 3), (5, 2)):
        sp = random_space(g, m, n)
        f = fp.TabulatedFunction(sp, g.normal(size=sp.size))
        es = fp.efron_stein(f, fp.build_basis(sp))
        ref = oracles.efron_stein_inclusion_exclusion(f.values, sp.pi)
        for S, comp in ref.items():
            assert np.max(np.abs(es[S].values - comp)) < 1e-10


def test_efron_stein_basis_independent():
    g = np.random.default_rng(4)
    sp = random_space(g, 4, 2)
    f = fp.TabulatedFunction(sp, g.normal(size=sp.size))
    a = fp.efron_stein(f, fp.build_basis(sp))
    b = fp.efron_stein(f, fp.build_basis(sp, [0, 3, 1, 2]))
    for S in a.components:
        assert np.max(np.abs(a[S].values - b[S].values)) < 1e-9
    assert np.max(np.abs(a.total().values - f.values)) < 1e-12


def test_efron_stein_orthogonal():
    g = np.random.default_rng(5)
    sp = random_space(g, 3, 3)
    f = fp.TabulatedFunction(sp, g.normal(size=sp.size))
    es = fp.efron_stein(f, fp.build_basis(sp))
    keys = list(es.components)
    for i, S in enumerate(keys):
        for T in keys[i + 1:]:
            assert abs(es[S].inner(es[T])) < 1e-12


def test_project_fi_and_noise_edge_cases():
    sp = fp.FiniteSpace.uniform(2, 2)
    f = fp.TabulatedFunction(sp, [0, 0, 0, 1])
    assert fp.project_fi(f, 0).values.tolist() == pytest.approx([0, 0.5])
    assert np.allclose(fp.noise_definitional(f, 1.0).values, f.values)
    assert np.allclose(fp.noise_definitional(f, 0.0).values, 0.25)
    with pytest.raises(ValueError):
        fp.noise_definitional(f, 1.5)


def test_monotone_checks_agree():
    g = np.random.default_rng(6)
    sp = fp.FiniteSpace.uniform(3, 2)
    for _ in range(200):
        f = fp.TabulatedFunction(sp, g.integers(0, 2, size=9))
        assert fp.is_monotone(f) == fp.is_monotone_bruteforce(f)


def test_tabulated_roundtrip():
    sp = fp.FiniteSpace.pbiased(0.3, 2)
    f = fp.TabulatedFunction(sp, [1.0, 2.0, 3.0, 4.0])
    h = fp.TabulatedFunction.from_dict(f.to_dict())
    assert h.space == sp and np.array_equal(h.values, f.values)
