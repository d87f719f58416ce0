import numpy as np
import pytest
from hypothesis import given, strategies as st

from netrobust.balancing import (
    BalanceConfig,
    asymmetry,
    balance,
    balancing_bound_report,
    balancing_sweep,
    build_symmetrizer,
    cross_term_gap,
    gaussian_network,
    ordered_eigenvectors,
    psd_lemma_gap,
    sandwich_gap,
    sum_square_gap,
    verify_psd_lemma,
)
from netrobust.errors import BadConfig, PatternTooLarge
from netrobust.matrix_core import solve_gramian, spectral_radius


def test_config_validation():
    with pytest.raises(BadConfig):
        BalanceConfig(epsilon=1.5)
    with pytest.raises(BadConfig):
        BalanceConfig(gamma_mode="nope")
    with pytest.raises(BadConfig):
        BalanceConfig(gamma_mode="custom")


def test_ordered_eigenvectors_is_basis_independent():
    # repeated eigenvalue: any rotation inside the eigenspace gives the same basis
    q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((4, 4)))
    P = q @ np.diag([3.0, 2.0, 2.0, 1.0]) @ q.T
    w, u = ordered_eigenvectors(P)
    assert np.allclose(w, [3, 2, 2, 1])
    assert np.allclose(u @ np.diag(w) @ u.T, P)
    r = np.eye(4)
    c, s = np.cos(0.3), np.sin(0.3)
    r[1:3, 1:3] = [[c, -s], [s, c]]
    q2 = q @ r
    _, u2 = ordered_eigenvectors(q2 @ np.diag([3.0, 2.0, 2.0, 1.0]) @ q2.T)
    assert np.allclose(u, u2, atol=1e-8)


def test_symmetrizer_is_symmetric_with_bounded_radius():
    a = gaussian_network(12, 0.8, 1)
    cfg = BalanceConfig(0.5, "random-diagonal", gamma_cap=0.8, seed=4)
    lam = build_symmetrizer(solve_gramian(a), cfg)
    assert np.allclose(lam, lam.T)
    assert np.max(np.abs(np.linalg.eigvalsh(lam))) <= 0.8 + 1e-12


def test_balance_endpoints():
    a = gaussian_network(10, 0.7, 2)
    assert balance(a, BalanceConfig(0.0)) is a
    full = balance(a, BalanceConfig(1.0))
    assert asymmetry(full.entries) <= 1e-12


def test_gamma_cap_above_rho_rejected():
    a = gaussian_network(6, 0.5, 0)
    with pytest.raises(BadConfig):
        balance(a, BalanceConfig(0.5, gamma_cap=0.9))


@given(st.integers(0, 10_000), st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]),
       st.sampled_from(["scaled-identity", "random-diagonal"]))
def test_bounds_hold(seed, eps, mode):
    rep = balancing_bound_report(gaussian_network(10, 0.9, seed), BalanceConfig(eps, mode, seed=seed))
    assert rep.passed


def test_custom_diagonal():
    a = gaussian_network(4, 0.6, 9)
    rho = spectral_radius(a).rho
    cfg = BalanceConfig(0.5, "custom", custom_diagonal=(rho, -rho, 0.0, 0.1))
    assert balancing_bound_report(a, cfg).passed
    with pytest.raises(BadConfig):
        balance(a, BalanceConfig(0.5, "custom", custom_diagonal=(1.0, 0, 0, 0)))


def test_sweep_fraction():
    rows, frac = balancing_sweep([1, 2], [0.2, 0.8], n=8)
    assert len(rows) == 4 and all(r.passed for r in rows)
    assert 0.0 <= frac <= 1.0
    assert frac == sum(r.h2_after < r.h2_before for r in rows) / 4


def _lam(a, seed):
    # Lambda shares the eigenvectors of P(A), with eigenvalues inside [-rho, rho]
    cfg = BalanceConfig(0.5, "random-diagonal", gamma_cap=spectral_radius(a).rho, seed=seed)
    return build_symmetrizer(solve_gramian(a), cfg)


@given(st.integers(0, 10_000), st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=3))
def test_psd_lemma_property(seed, pattern):
    a = gaussian_network(6, 0.7, seed)
    lam = _lam(a, seed)
    assert verify_psd_lemma(a, lam, pattern)


def test_psd_lemma_scalar_oracle():
    # n = 1: a^{2t} lam^{2s} <= gamma^{2s} / (1 - a^2) with gamma = |a|
    a, lam = 0.6, -0.5
    gap = psd_lemma_gap([[a]], [[lam]], [(2, 1)])
    assert gap == pytest.approx(0.6**2 / (1 - 0.36) - 0.6**4 * 0.25, rel=1e-12)


def test_pattern_too_large():
    with pytest.raises(PatternTooLarge):
        psd_lemma_gap(np.eye(2) * 0.5, np.eye(2) * 0.5, [(9, 0)])
    with pytest.raises(PatternTooLarge):
        psd_lemma_gap(np.eye(2) * 0.5, np.eye(2) * 0.5, [(1, 1)] * 7)


@given(st.integers(0, 10_000))
def test_gap_helpers_nonnegative(seed):
    rng = np.random.default_rng(seed)
    a = gaussian_network(5, 0.8, seed)
    assert sandwich_gap(a, _lam(a, seed)) >= -1e-8
    x, y = rng.standard_normal((2, 5, 5))
    assert cross_term_gap(x, y) >= -1e-8
    mats = rng.standard_normal((int(rng.integers(1, 7)), 5, 5))
    assert sum_square_gap(list(mats)) >= -1e-8


def test_random_diagonal_radius_capped():
    rng = np.random.default_rng(10)
    m = rng.standard_normal((10, 10))
    P = np.eye(10) + m @ m.T
    lam = build_symmetrizer(P, BalanceConfig(0.5, "random-diagonal", gamma_cap=0.6, seed=1))
    assert np.max(np.abs(np.linalg.eigvalsh(lam))) <= 0.6 + 1e-12


def test_regular_network_bounds():
    from netrobust.topologies import regular

    rep = balancing_bound_report(regular(6, 0.5), BalanceConfig(0.5))
    assert rep.passed


def test_psd_lemma_length_three_pattern():
    a = gaussian_network(8, 0.7, 12)
    assert verify_psd_lemma(a, _lam(a, 12), [(1, 2), (2, 1), (0, 3)])
