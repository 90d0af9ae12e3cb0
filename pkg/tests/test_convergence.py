import math

import numpy as np
import pytest

from bridgekac.convergence import (
    OperatorSequence,
    apply_cutoff,
    check_theorem31,
    cutoff_contraction_check,
    matrix_function,
    q_truncation_study,
    resolvent_distance,
    spike_multiplication_sequence,
    stabilization_level,
    truncation_study,
)
from bridgekac.feynman_kac import McConfig, QuadratureConfig, bump
from bridgekac.oracles import OracleConfig, build_grid_operator
from bridgekac.potentials import inverted_quadratic, truncate, zero
from bridgekac.stochastic import RngSeed


def test_resolvent_distance_closed_form():
    # diag(1/n, 0) against 0 probed with (1, 1): distance 1 / sqrt(n^2 + 1)
    for n in (1, 4, 10):
        A = np.diag([1.0 / n, 0.0])
        B = np.zeros((2, 2))
        got = resolvent_distance(A, B, np.array([1.0, 1.0]))
        assert got == pytest.approx(1.0 / math.sqrt(n * n + 1.0), rel=1e-12)


def test_resolvent_distance_validation():
    A = np.zeros((2, 2))
    with pytest.raises(ValueError):
        resolvent_distance(A, np.zeros((3, 3)), np.ones(2))
    with pytest.raises(ValueError):
        resolvent_distance(A, A, np.ones(3))
    with pytest.raises(ValueError):
        resolvent_distance(A, A, np.zeros(2))


def test_matrix_function_diagonalizes_correctly():
    # rotate a known diagonal and check f transfers through the eigenbasis
    d = np.array([-1.0, 0.5, 2.0])
    theta = 0.3
    G = np.eye(3)
    G[0, 0] = G[1, 1] = math.cos(theta)
    G[0, 1], G[1, 0] = -math.sin(theta), math.sin(theta)
    A = G @ np.diag(d) @ G.T
    got = matrix_function(np.exp, A)
    want = G @ np.diag(np.exp(d)) @ G.T
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)


def test_apply_cutoff_clamps_symmetrically():
    f = apply_cutoff(lambda x: np.asarray(x) ** 3, 2.0)
    np.testing.assert_allclose(
        f(np.array([-3.0, -1.0, 0.5, 3.0])), [-2.0, -1.0, 0.125, 2.0]
    )
    assert f.level == 2.0
    with pytest.raises(ValueError):
        apply_cutoff(np.exp, 0.0)


def test_cutoff_contraction_holds_exactly():
    gen = np.random.default_rng(12)
    for _ in range(5):
        M = gen.standard_normal((20, 20))
        A = 0.5 * (M + M.T)
        v = gen.standard_normal(20)
        v /= np.linalg.norm(v)
        for m in (0.5, 2.0, 10.0):
            lhs, rhs = cutoff_contraction_check(A, v, lambda lam: np.exp(-lam), m)
            assert lhs <= rhs * (1.0 + 1e-12)


def test_spike_sequence_exact_norms_and_distances():
    levels = [4, 16, 64]
    seq, psi = spike_multiplication_sequence(256, levels)
    assert np.linalg.norm(psi) == pytest.approx(1.0, rel=1e-14)
    for n, A in zip(levels, seq.members):
        image = A @ psi
        assert np.linalg.norm(image) == pytest.approx(1.0, rel=1e-14)
        assert np.linalg.norm(A @ image) == pytest.approx(math.sqrt(n), rel=1e-14)
        d = resolvent_distance(A, seq.limit, psi)
        assert d == pytest.approx(1.0 / math.sqrt(n + 1.0), rel=1e-12)


def test_spike_sequence_validation():
    with pytest.raises(ValueError):
        spike_multiplication_sequence(256, [3])
    with pytest.raises(ValueError):
        spike_multiplication_sequence(256, [512])


def test_check_theorem31_flags_spike_square_blowup():
    seq, psi = spike_multiplication_sequence(256, [4, 16, 64])
    rep = check_theorem31(seq, lambda lam: lam, psi)
    np.testing.assert_allclose(rep.f_norms, [1.0, 1.0, 1.0], rtol=1e-12)
    np.testing.assert_allclose(rep.f2_norms, [2.0, 4.0, 8.0], rtol=1e-12)
    np.testing.assert_allclose(rep.f_distances, [1.0, 1.0, 1.0], rtol=1e-12)
    assert not rep.f2_bounded
    assert not rep.distances_vanish
    assert rep.consistent  # hypothesis failed, so no claim is contradicted


def test_check_theorem31_bounded_calculus_converges():
    gen = np.random.default_rng(4)
    M = gen.standard_normal((12, 12))
    A = 0.5 * (M + M.T)
    P = gen.standard_normal((12, 12))
    B = 0.5 * (P + P.T)
    members = tuple(A + B / n for n in (1, 10, 100, 1000))
    psi = gen.standard_normal(12)
    rep = check_theorem31(OperatorSequence(members, A, "perturbed"), np.exp, psi)
    assert rep.f2_bounded
    assert rep.distances_vanish
    assert rep.consistent
    assert rep.resolvent_sup[-1] < rep.resolvent_sup[0] * 0.01


def test_check_theorem31_grid_semigroup_realization():
    # truncations of an inverted quadratic: once the clip leaves the box the
    # grid Hamiltonian equals the limit and the calculus distances hit zero
    V = inverted_quadratic(0.05)
    L, n_pts, t = 6.0, 200, 1.0
    members = tuple(
        build_grid_operator(truncate(V, n), L, n_pts).hamiltonian for n in (1.0, 2.0, 4.0)
    )
    limit = build_grid_operator(V, L, n_pts).hamiltonian
    op = build_grid_operator(V, L, n_pts)
    h = op.h
    psi = bump(width=1.0).evaluate(op.grid[:, None]) * math.sqrt(h)
    rep = check_theorem31(
        OperatorSequence(members, limit, "grid-semigroup"),
        lambda lam: np.exp(-t * lam), psi,
    )
    assert rep.f2_bounded
    assert rep.f_distances[-1] < 1e-12
    assert rep.distances_vanish
    assert rep.consistent


def test_fractional_power_hypothesis_is_weaker_than_square():
    # multiplication by n^{1/3} on [0, 1/n): the image converges, the squared
    # norms diverge like n^{1/3}, yet |x|^{3/2} norms stay exactly 1
    k = 512
    levels = [8, 64, 512]
    psi = np.full(k, math.sqrt(1.0 / k))
    sq_norms = []
    frac_norms = []
    image_norms = []
    for n in levels:
        a = round(n ** (1.0 / 3.0))
        assert a**3 == n
        A = np.diag(np.where(np.arange(k) < k // n, float(a), 0.0))
        image_norms.append(np.linalg.norm(A @ psi))
        sq_norms.append(np.linalg.norm(matrix_function(lambda x: x * x, A) @ psi))
        frac = matrix_function(lambda x: np.abs(x) ** 1.5, A)
        frac_norms.append(np.linalg.norm(frac @ psi))
    np.testing.assert_allclose(image_norms, [n ** (-1 / 6) for n in levels], rtol=1e-10)
    np.testing.assert_allclose(sq_norms, [n ** (1 / 6) for n in levels], rtol=1e-10)
    np.testing.assert_allclose(frac_norms, [1.0, 1.0, 1.0], rtol=1e-10)


def test_stabilization_level_basic():
    levels = [1, 2, 4, 8, 16]
    flat = [1.0, 1.0, 1.0, 1.0, 1.0]
    assert stabilization_level(levels, flat) == 8
    growing = [1.0, 2.0, 3.0, 4.0, 5.0]
    assert stabilization_level(levels, growing) is None
    late = [1.0, 2.0, 2.0, 2.0, 2.0]
    assert stabilization_level(levels, late) == 16


def test_stabilization_level_respects_flags_and_errors():
    levels = [1, 2, 4, 8, 16]
    flat = [1.0, 1.0, 1.0, 1.0, 1.0]
    # untrusted values never contribute to a stabilization run
    trusted = [True, True, True, False, False]
    assert stabilization_level(levels, flat, trusted=trusted) is None
    # three-sigma window lets noisy increments count
    noisy = [1.0, 1.01, 0.99, 1.01, 1.0]
    errs = [0.02] * 5
    assert stabilization_level(levels, noisy, std_errors=errs) == 8
    assert stabilization_level(levels, noisy) is None


def test_truncation_study_bounded_potential_is_flat():
    # levels beyond the range of V leave every truncation inactive
    V = inverted_quadratic(0.05)
    phi = bump(width=1.0)
    report = truncation_study(
        V, phi, phi, 1.0, [8.0, 16.0, 32.0, 64.0, 128.0],
        McConfig(n_samples=400, n_steps=16),
        RngSeed(2), quadrature=QuadratureConfig(8),
        oracle=OracleConfig(domain_half_width=8.0, n_points=400),
    )
    assert report.left_values[0] == pytest.approx(report.left_values[-1], rel=1e-9)
    assert report.right_values[0] == report.right_values[-1]
    assert report.left_monotone and report.right_monotone
    assert report.all_agree
    assert report.right_stabilized_at == 64.0


def test_truncation_study_validation():
    V = zero()
    phi = bump()
    with pytest.raises(ValueError):
        truncation_study(V, phi, phi, 1.0, [4.0, 2.0],
                         McConfig(n_samples=10, n_steps=2), RngSeed(0))


def test_q_truncation_study_monotone_under_common_random_numbers():
    report = q_truncation_study(
        0.5, 0.5, inverted_quadratic(1.0), 0.5, [0.5, 1.0, 2.0, 4.0, 8.0],
        McConfig(n_samples=3000, n_steps=32), RngSeed(7),
    )
    values = [e.mean for e in report.estimates]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[1] > values[0]  # low clips genuinely bind at this t
    assert report.monotone
    assert report.divergence_onset is None


def test_q_truncation_study_flags_divergent_regime():
    report = q_truncation_study(
        0.0, 0.0, inverted_quadratic(1.0), 3.0, [1.0, 4.0, 16.0, 64.0],
        McConfig(n_samples=5000, n_steps=64), RngSeed(11),
    )
    assert report.divergence_onset is not None
    assert report.stabilized_at is None
    values = [e.mean for e in report.estimates]
    assert values[-1] > values[0]
