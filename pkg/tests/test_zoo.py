import math

import numpy as np
import pytest

from corrlab import zoo
from corrlab.finite_product import FiniteSpace, is_monotone_bruteforce

import oracles


def test_parse_builtin():
    s = zoo.parse_builtin("builtin:threshold?k=2&range=pm1")
    assert s.name == "threshold" and s.params == {"k": "2"} and s.resolved_range() == "pm1"
    assert zoo.parse_builtin("builtin:majority").resolved_range() == "pm1"
    with pytest.raises(ValueError):
        zoo.parse_builtin("builtin:parity")
    with pytest.raises(ValueError):
        zoo.parse_builtin("builtin:and?range=xy")


@pytest.mark.parametrize("name", ["dictator", "and", "or", "majority", "threshold?k=2",
                                  "tribes", "talagrand_f?k=1", "talagrand_g?k=1",
                                  "keller_sign", "random_monotone?seed=3"])
def test_builtins_monotone(name):
    f = zoo.generate("builtin:" + name, FiniteSpace.uniform(2, 4))
    assert is_monotone_bruteforce(f)


def test_builtin_values():
    sp = FiniteSpace.uniform(2, 3)
    assert zoo.generate("builtin:and", sp).mean() == pytest.approx(1 / 8)
    assert zoo.generate("builtin:or", sp).mean() == pytest.approx(7 / 8)
    assert zoo.generate("builtin:dictator?i=2", sp).values[0, 1, 0] == 1
    assert zoo.generate("builtin:majority", sp).mean() == pytest.approx(0.0)
    with pytest.raises(ValueError):
        zoo.generate("builtin:dictator?i=4", sp)
    with pytest.raises(ValueError):
        zoo.generate("builtin:and", FiniteSpace.uniform(3, 2))


def test_enumeration_matches_brute_force():
    for n in (1, 2, 3):
        ours = sorted(tuple(f.values.ravel().astype(int)) for f in zoo.enumerate_monotone(n))
        pts, fs = oracles.monotone_tables(n)
        ref = sorted(tuple(f[x] for x in pts) for f in fs)
        assert ours == ref
    assert len(zoo.enumerate_monotone(4)) == 168


def test_dedekind_counts():
    assert [len(zoo.enumerate_monotone(n)) for n in (1, 2, 3, 4)] == [3, 6, 20, 168]


def test_threshold_stats_against_enumeration():
    # p-biased majority on n = 5 computed from the full table
    from corrlab.finite_product import build_basis, fourier
    p, n = 0.3, 5
    sp = FiniteSpace.pbiased(p, n)
    f = zoo.generate(f"builtin:keller_sign?p={p}", sp)
    st = zoo.threshold_stats(n, p=p)
    fe = fourier(f, build_basis(sp))
    d1 = sum(fe[tuple(1 if j == i else 0 for j in range(n))] for i in range(n))
    assert st.mean == pytest.approx(f.mean(), abs=1e-12)
    assert st.degree1_sum == pytest.approx(d1, abs=1e-12)
    assert st.gap == pytest.approx(1 - f.mean() ** 2, abs=1e-12)


def test_threshold_stats_against_scipy_binom():
    for p, n in ((0.5, 200), (0.1, 1000)):
        st = zoo.threshold_stats(n, p=p)
        mean, d1 = oracles.keller_binom(n, p)
        assert st.mean == pytest.approx(mean, abs=1e-10)
        assert st.degree1_sum == pytest.approx(d1, rel=1e-10)


def test_talagrand_pair_exact():
    for n, k in ((20, 4), (50, 15), (100, 38)):
        st = zoo.talagrand_pair_stats(n, k)
        eps, gap = oracles.talagrand_exact(n, k)
        assert st.eps == pytest.approx(float(eps), rel=1e-13)
        assert st.gap == pytest.approx(float(gap), abs=1e-15)
    with pytest.raises(ValueError):
        zoo.talagrand_pair_stats(10, 5)


def test_talagrand_pair_against_table():
    from corrlab.finite_product import build_basis, fourier
    n, k = 8, 2
    sp = FiniteSpace.uniform(2, n)
    f = zoo.generate(f"builtin:talagrand_f?k={k}", sp)
    g = zoo.generate(f"builtin:talagrand_g?k={k}", sp)
    st = zoo.talagrand_pair_stats(n, k)
    b = build_basis(sp)
    fe, ge = fourier(f, b), fourier(g, b)
    units = [tuple(1 if j == i else 0 for j in range(n)) for i in range(n)]
    assert st.cross == pytest.approx(sum(fe[u] * ge[u] for u in units), abs=1e-12)
    assert st.gap == pytest.approx(f.inner(g) - f.mean() * g.mean(), abs=1e-12)


def test_default_tribes_width():
    assert zoo.default_tribes_width(2) == 1
    assert zoo.default_tribes_width(16) == int(math.floor(4 - math.log2(math.log(16))))
