import numpy as np
import pytest

from gossipopt import (
    ErgodicAverage,
    FixedPoint,
    MetricsError,
    QuadraticFamily,
    build_complete_graph,
    build_erdos_renyi,
    fixed_point,
    generate_quadratic,
    gossip_matrix,
    linear_rate_fit,
    merit_cvx,
    merit_sc,
    spectral_data,
)


def two_agent_pull():
    """f1 = ||x - 1||^2, f2 = ||x + 1||^2 in one dimension."""
    A = np.ones((2, 1, 1))
    b = np.array([[1.0], [-1.0]])
    return QuadraticFamily(A, b, ridge=0.0)


def zero_losses(m=2, d=1):
    return QuadraticFamily(np.zeros((m, 1, d)), np.zeros((m, 1)), ridge=0.0)


def test_fixed_point_hand_example():
    fp = fixed_point(two_agent_pull(), tol=1e-10)
    np.testing.assert_allclose(fp.x_star, [0.0], atol=1e-12)
    np.testing.assert_allclose(fp.Y_star, [[2.0], [-2.0]], atol=1e-12)
    assert abs(fp.Y_star.sum()) <= 1e-12


def test_fixed_point_symmetric_zero():
    A = np.tile(np.eye(2)[None, :, :], (2, 1, 1))
    fam = QuadraticFamily(A, np.zeros((2, 2)), ridge=0.0)
    fp = fixed_point(fam, tol=1e-10)
    np.testing.assert_allclose(fp.x_star, np.zeros(2), atol=1e-12)
    np.testing.assert_allclose(fp.Y_star, np.zeros((2, 2)), atol=1e-12)


def test_fixed_point_random_residual():
    fam = generate_quadratic(m=20, h=10, n=8, ridge=0.0, seed=30)
    fp = fixed_point(fam, tol=1e-8)
    assert np.linalg.norm(fam.gradients(fp.X_star).sum(axis=0)) <= 1e-8


def test_merit_sc_zero_at_fixed_point():
    gm = gossip_matrix(build_complete_graph(2), c=0.5)
    M = spectral_data(gm).M
    fp = fixed_point(two_agent_pull(), tol=1e-10)
    assert merit_sc(fp.X_star, fp.Y_star, 0.7, fp, M) <= 1e-24


def test_merit_sc_frobenius_term_only(rng):
    gm = gossip_matrix(build_complete_graph(2), c=0.5)
    M = spectral_data(gm).M
    fp = fixed_point(two_agent_pull(), tol=1e-10)
    E = rng.standard_normal((2, 1))
    E /= np.linalg.norm(E)
    assert merit_sc(fp.X_star + E, fp.Y_star, 0.3, fp, M) == pytest.approx(1.0, rel=1e-12)


def test_merit_sc_hand_dual_term():
    # complete graph m=2, c=1/2: the disagreement direction has M-eigenvalue 1;
    # dual offset [1, -1] with theta 2 contributes 4 * 2 = 8
    gm = gossip_matrix(build_complete_graph(2), c=0.5)
    M = spectral_data(gm).M
    fp = FixedPoint(x_star=np.zeros(1), X_star=np.zeros((2, 1)), Y_star=np.zeros((2, 1)))
    Y = np.array([[1.0], [-1.0]])
    assert merit_sc(fp.X_star, Y, 2.0, fp, M) == pytest.approx(8.0, abs=1e-12)


def test_merit_sc_positive_under_perturbations(rng):
    g = build_erdos_renyi(5, 0.6, seed=5)
    gm = gossip_matrix(g, c=0.5)
    M = spectral_data(gm).M
    fam = generate_quadratic(m=5, h=6, n=3, ridge=0.0, seed=31)
    fp = fixed_point(fam, tol=1e-8)
    IW = np.eye(5) - gm.W
    for _ in range(20):
        dX = rng.standard_normal((5, 3)) * 1e-3
        assert merit_sc(fp.X_star + dX, fp.Y_star, 0.5, fp, M) >= 1e-16
        dY = IW @ rng.standard_normal((5, 3))  # perturbation in range(I - W)
        assert merit_sc(fp.X_star, fp.Y_star + dY, 0.5, fp, M) >= 1e-16


def test_merit_cvx_zero_at_fixed_point():
    fam = two_agent_pull()
    gm = gossip_matrix(build_complete_graph(2), c=0.5)
    fp = fixed_point(fam, tol=1e-10)
    assert merit_cvx(fp.X_star, fp, fam, gm, delta=1.0) <= 1e-12


def test_merit_cvx_consensual_suboptimal_point():
    fam = two_agent_pull()
    gm = gossip_matrix(build_complete_graph(2), c=0.5)
    fp = fixed_point(fam, tol=1e-10)
    X = np.full((2, 1), 0.5)  # consensual but away from the optimum
    expected = fam.values(X).sum() - fam.values(fp.X_star).sum()
    assert merit_cvx(X, fp, fam, gm, delta=1.0) == pytest.approx(expected, rel=1e-12)
    assert expected > 0.0


def test_merit_cvx_hand_consensus_term():
    # complete graph m=2, c=1/2: I - W has eigenvalue 1/2 on disagreement,
    # so X = [1, -1] gives <(I-W)X, X> = 1 with zero losses
    fam = zero_losses()
    gm = gossip_matrix(build_complete_graph(2), c=0.5)
    fp = FixedPoint(x_star=np.zeros(1), X_star=np.zeros((2, 1)), Y_star=np.zeros((2, 1)))
    X = np.array([[1.0], [-1.0]])
    assert merit_cvx(X, fp, fam, gm, delta=1.0) == pytest.approx(1.0, abs=1e-12)


def test_merit_cvx_nonnegative_random(rng):
    fam = generate_quadratic(m=4, h=5, n=3, ridge=0.0, seed=32)
    gm = gossip_matrix(build_erdos_renyi(4, 0.7, seed=6), c=0.5)
    fp = fixed_point(fam, tol=1e-8)
    for _ in range(50):
        X = rng.standard_normal((4, 3)) * rng.uniform(0.1, 10.0)
        assert merit_cvx(X, fp, fam, gm, delta=1.0) >= 0.0


def test_ergodic_average_constant():
    erg = ErgodicAverage((2, 2))
    C = np.full((2, 2), 3.5)
    for _ in range(7):
        erg.update(C)
    np.testing.assert_array_equal(erg.value, C)


def test_ergodic_average_two_point():
    erg = ErgodicAverage((1, 2))
    erg.update(np.zeros((1, 2)))
    erg.update(np.full((1, 2), 2.0))
    np.testing.assert_allclose(erg.value, np.ones((1, 2)))


def test_ergodic_average_matches_direct_sum(rng):
    erg = ErgodicAverage((3, 2))
    xs = [rng.standard_normal((3, 2)) for _ in range(5)]
    for x in xs:
        erg.update(x)
    np.testing.assert_allclose(erg.value, sum(xs) / 5.0, atol=1e-12)


def test_ergodic_average_empty_errors():
    with pytest.raises(MetricsError):
        _ = ErgodicAverage((1, 1)).value


def test_linear_rate_fit_exact_geometric():
    ks = np.arange(200)
    vs = 0.5**ks
    assert linear_rate_fit(ks, vs) == pytest.approx(np.log(0.5), abs=1e-9)


def test_linear_rate_fit_constant():
    ks = np.arange(50)
    assert linear_rate_fit(ks, np.ones(50)) == pytest.approx(0.0, abs=1e-12)


def test_linear_rate_fit_sublinear_flattens():
    ks = np.arange(1, 2001)
    slope = linear_rate_fit(ks, 1.0 / ks)
    assert abs(slope) < 0.01  # nothing like a geometric certificate


def test_linear_rate_fit_skips_nonpositive_and_errors_when_short():
    ks = np.arange(30)
    vs = np.ones(30)
    vs[20:] = 0.0  # last half keeps only 5 positive rows
    with pytest.raises(MetricsError):
        linear_rate_fit(ks, vs)
