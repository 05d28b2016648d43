import math

import numpy as np
import pytest
from scipy.stats import norm as scipy_norm

from corrlab import gaussian as gs
from corrlab import rng

import oracles

N = 200_000  # unit tests; the acceptance suite runs 1e6


def within(est, target, sigma=4.0):
    return abs(est.value - target) <= sigma * est.stderr + 1e-15


def test_hermite_examples():
    assert gs.hermite_eval(2, 1.0) == pytest.approx(0.0)
    assert gs.hermite_eval(0, 3.7) == 1.0
    assert gs.hermite_eval(3, 2.0) == pytest.approx(2 / math.sqrt(6))
    x = np.linspace(-3, 3, 7)
    assert gs.hermite_eval(4, x) == pytest.approx((x**4 - 6 * x**2 + 3) / math.sqrt(24))


def test_hermite_orthonormal_quadrature():
    x, w = np.polynomial.hermite_e.hermegauss(40)
    w = w / w.sum()
    for j in range(5):
        for k in range(5):
            v = np.sum(w * gs.hermite_eval(j, x) * gs.hermite_eval(k, x))
            assert v == pytest.approx(float(j == k), abs=1e-12)


def test_rng_reproducible_and_thread_independent():
    a = rng.normal_block(1, 2, 3, (10, 2))
    assert np.array_equal(a, rng.normal_block(1, 2, 3, (10, 2)))
    assert not np.array_equal(a, rng.normal_block(1, 2, 4, (10, 2)))
    K = gs.ball(1.0, 3)
    e1 = gs.influence_direction(K, [1, 0, 0], 3 * rng.CHUNK + 5, seed=4, threads=1)
    e4 = gs.influence_direction(K, [1, 0, 0], 3 * rng.CHUNK + 5, seed=4, threads=4)
    assert e1 == e4


def test_normal_block_accuracy():
    u = rng.uniform_block(0, 0, 0, (1000,))
    assert np.all((u > 0) & (u < 1))
    assert np.max(np.abs(scipy_norm.cdf(rng.normal_block(0, 0, 0, (1000,))) - u)) < 1e-9


def test_constant_oracle_orthogonality():
    one = gs.whole_space(2)
    for alpha in ((2, 0), (1, 1), (0, 1)):
        assert within(gs.mc_hermite_coeff(one, alpha, N, seed=1), 0.0)


def test_interval_coefficient_and_influence():
    est = gs.mc_hermite_coeff(gs.interval(1.0), (2,), N, seed=2)
    assert within(est, -oracles.interval_influence_quad(1.0))
    # sqrt(2) * phi_N(1) = 0.3421983; the commonly quoted 0.342228 is a misprint
    assert gs.interval_influence_closed_form(1.0) == pytest.approx(0.3421983, abs=1e-7)
    assert gs.interval_influence_closed_form(0.0) == 0.0
    assert gs.interval_influence_closed_form(8.0) < 1e-12
    assert gs.interval_influence_closed_form(1.0) == pytest.approx(oracles.interval_influence_quad(1.0), abs=1e-14)


def test_influence_trivial_cases():
    assert within(gs.influence_direction(gs.whole_space(2), [1, 0], N, seed=3), 0.0)
    sl = gs.slab([1, 0], 1.0)
    assert within(gs.influence_direction(sl, [0, 1], N, seed=3), 0.0)


def test_odd_levels_vanish():
    K = gs.box([1.0, 0.5])
    for alpha in ((1, 0), (0, 1), (3, 0), (2, 1), (1, 2)):
        assert within(gs.mc_hermite_coeff(K, alpha, N, seed=5), 0.0)


def test_prop_b_violation_raises_for_fake_body():
    # complement of a ball is symmetric but not convex: negative influence
    fake = gs.BodyOracle(1, lambda X: (np.abs(X[:, 0]) > 1).astype(float),
                         "symmetric_convex_set", "fake")
    with pytest.raises(gs.HypothesisViolation):
        gs.influence_directions(fake, [[1.0]], N, seed=1)


def test_degree2_profile_routes_and_trivial():
    K = gs.interval(1.0)
    prof = gs.degree2_profile(K, K, N, seed=6)
    assert prof.a2 == pytest.approx(prof.a2_frobenius, abs=1e-12)
    assert abs(prof.a2 - 0.34222**2) <= 4 * prof.a2_stderr
    z = gs.degree2_profile(gs.ball(1.5, 3), gs.whole_space(3), N, seed=6)
    assert abs(z.a2) <= 4 * z.a2_stderr + 1e-12
    box = gs.degree2_profile(gs.box([1.0, 2.0]), gs.box([0.5, 1.0]), N, seed=7)
    off = box.matrix_f.values[0, 1]
    assert abs(off) <= 4 * box.matrix_f.stderr[0, 1]


def test_degree2_matrix_rotation_covariance():
    g = np.random.default_rng(0)
    R, _ = np.linalg.qr(g.normal(size=(2, 2)))
    K = gs.box([1.0, 0.4])
    M = gs.degree2_profile(K, K, N, seed=8).matrix_f.values
    MR = gs.degree2_profile(K.rotated(R), K, N, seed=8).matrix_f.values
    # K(Rx) has matrix R^T M R
    assert np.max(np.abs(MR - R.T @ M @ R)) < 0.02


def test_ou_sampler_correlation():
    xs, ys = zip(*gs.ou_pair_sampler(0.5, 1, seed=1, samples=10**6))
    x, y = np.concatenate(xs)[:, 0], np.concatenate(ys)[:, 0]
    assert abs(np.corrcoef(x, y)[0, 1] - 0.5) < 0.004
    assert abs(y.std() - 1) < 0.004
    (x1, y1), = gs.ou_pair_sampler(1.0, 2, seed=1, samples=100)
    assert np.array_equal(x1, y1)
    with pytest.raises(ValueError):
        next(gs.ou_pair_sampler(1.2, 1, 0, 10))


def test_verify_interval_pair():
    K = gs.interval(1.0)
    rep = gs.verify_robust_gci(K, K, samples=N, seed=9)
    eps = 2 * scipy_norm.cdf(1) - 1
    assert abs(rep.gap - eps * (1 - eps)) <= 4 * rep.extras["gap"]["stderr"]
    assert rep.gap >= rep.phi_value
    assert rep.verdict == "pass" and rep.sweep_monotone


def test_verify_independent_slabs():
    rep = gs.verify_robust_gci(gs.slab([1, 0], 1.0), gs.slab([0, 1], 1.0), samples=N, seed=10)
    assert abs(rep.gap) <= 4 * rep.extras["gap"]["stderr"]
    assert abs(rep.a_jstar) <= 4 * rep.extras["a2"]["stderr"]


def test_verify_errors():
    with pytest.raises(ValueError):
        gs.verify_robust_gci(gs.ball(1, 2), gs.ball(1, 3), samples=N)
    with pytest.raises(ValueError):
        gs.verify_robust_gci(gs.ball(1, 2), gs.ball(1, 2), samples=0)


def test_chi_square():
    assert gs.chi_square_cdf(2, 2 * math.log(2)) == pytest.approx(0.5, abs=1e-12)
    assert gs.chi_square_cdf(1, 1.0) == pytest.approx(2 * scipy_norm.cdf(1) - 1, abs=1e-12)
    assert gs.chi_square_quantile(5, 0.0) == 0.0
    for dof in (1, 2, 10, 100):
        for q in (0.1, 0.5, 0.9):
            assert gs.chi_square_cdf(dof, gs.chi_square_quantile(dof, q)) == pytest.approx(q, abs=1e-10)


def test_balls_calibration():
    b = gs.balls_tightness(0.5, 2, N, seed=1)
    assert b.r1 == pytest.approx(math.sqrt(2 * math.log(2)), abs=1e-8)
    assert b.r1 == pytest.approx(b.r2) and b.gap == 0.25
    a2, r1 = oracles.ball_a2_mpmath(0.1, 20)
    assert gs.balls_tightness(0.1, 20, N, seed=2).a2_exact == pytest.approx(a2, rel=1e-9)


def test_parse_body():
    assert gs.parse_body("ball:r=2", 3).meta["radius"] == 2.0
    assert gs.parse_body("box:a=1,2").dim == 2
    assert gs.parse_body("slab:v=1,1,w=0.5").meta["width"] == 0.5
    assert gs.parse_body("quasi:gauss-bump", 2).kind == "quasiconcave_nonneg"
    assert gs.parse_body("cvx:abs1").kind == "symmetric_convex_function"
    for bad in ("ball:q=1", "cone:r=1", "ball:r=1"):
        with pytest.raises(ValueError):
            gs.parse_body(bad)


def test_symmetry_spot_checks():
    for K in (gs.ball(1, 3), gs.box([1, 2]), gs.random_ellipsoid(4, 1), gs.max_abs2(3),
              gs.gauss_bump(2)):
        assert K.check_symmetry()


def test_random_ellipsoid_condition():
    for s in range(5):
        A = np.array(gs.random_ellipsoid(6, s).meta["A"])
        ev = np.linalg.eigvalsh(A)
        assert ev.max() / ev.min() <= 10 + 1e-9


def test_hu_normalizer():
    # E[max(x1^2, x2^2)] = E[R^2] E[max(cos^2, sin^2)] in polar form
    import mpmath
    ang = mpmath.quad(lambda t: max(mpmath.cos(t) ** 2, mpmath.sin(t) ** 2),
                      [0, mpmath.pi / 4, 3 * mpmath.pi / 4, mpmath.pi]) / mpmath.pi
    assert 2 * float(ang) == pytest.approx(gs.MAXABS2_NORMALIZER**2, rel=1e-12)
    for f in gs.hu_pair_library(4):
        est = gs.mc_hermite_coeff(gs.BodyOracle(f.dim, lambda X, f=f: f(X) ** 2, "other"),
                                  (0,) * f.dim, N, seed=3)
        assert within(est, 1.0)


def test_total_influence_rotation_invariant():
    K = gs.random_ellipsoid(3, 2)
    R, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(3, 3)))
    a = gs.total_influence(K, N, seed=1)
    b = gs.total_influence(K.rotated(R), N, seed=2)
    assert abs(a.value - b.value) <= 4 * math.hypot(a.stderr, b.stderr)
