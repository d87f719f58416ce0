"""Epsilon spectral balancing ``A_eps = (1 - eps) A + eps U Gamma U^T``.

``U`` holds the eigenvectors of the Gramian ``P(A)`` and ``Gamma`` is a real
diagonal matrix with spectral radius at most ``rho(A)``.  Balancing pulls a
network toward a symmetric one while keeping it stable, with explicit caps
on how much the max norm and H2 norm can grow.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import BadConfig, PatternTooLarge, UnstableMatrix
from .matrix_core import (
    GramianSolution,
    MatrixLike,
    NetworkMatrix,
    as_network,
    psd_gap,
    require_stable,
    solve_gramian,
    spectral_radius,
    top_singular_value,
)
from .topologies import philox_generator

__all__ = [
    "GAMMA_MODES",
    "BalanceConfig",
    "BalanceBoundReport",
    "ordered_eigenvectors",
    "build_symmetrizer",
    "balance",
    "balancing_bound_report",
    "verify_psd_lemma",
    "psd_lemma_gap",
    "sandwich_gap",
    "cross_term_gap",
    "sum_square_gap",
    "gaussian_network",
    "balancing_sweep",
    "asymmetry",
]

GAMMA_MODES = ("scaled-identity", "random-diagonal", "custom")
CLUSTER_TOL = 1e-10


@dataclass(frozen=True)
class BalanceConfig:
    epsilon: float = 0.5
    gamma_mode: str = "scaled-identity"
    gamma_cap: Optional[float] = None  # None means rho(A)
    seed: int = 0
    custom_diagonal: Optional[tuple] = None

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise BadConfig(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.gamma_mode not in GAMMA_MODES:
            raise BadConfig(f"gamma_mode must be one of {GAMMA_MODES}")
        if self.gamma_cap is not None and self.gamma_cap < 0:
            raise BadConfig("gamma_cap must be nonnegative")
        if self.gamma_mode == "custom" and self.custom_diagonal is None:
            raise BadConfig("custom gamma_mode needs custom_diagonal")


@dataclass(frozen=True)
class BalanceBoundReport:
    epsilon: float
    gamma: float
    sigma1_before: float
    sigma1_after: float
    sigma1_cap: float
    trace_before: float
    trace_after: float
    trace_cap: float
    rho_after: float
    rho_cap: float

    @property
    def sigma1_pass(self) -> bool:
        return self.sigma1_after <= self.sigma1_cap * (1 + 1e-6)

    @property
    def trace_pass(self) -> bool:
        return self.trace_after <= self.trace_cap * (1 + 1e-6)

    @property
    def rho_pass(self) -> bool:
        return self.rho_after <= self.rho_cap + 1e-6

    @property
    def passed(self) -> bool:
        return self.sigma1_pass and self.trace_pass and self.rho_pass


def ordered_eigenvectors(P, cluster_tol: float = CLUSTER_TOL):
    """Eigen-decomposition of symmetric ``P`` with a reproducible basis.

    Eigenvalues come out in descending order, each eigenvector has its first
    nonzero component positive, and inside clusters of (numerically) repeated
    eigenvalues the basis is rebuilt by Gram-Schmidt on the projections of
    the standard basis vectors, so it depends only on the eigenspace.
    """
    p = np.asarray(P, dtype=float)
    w, u = np.linalg.eigh(0.5 * (p + p.T))
    w, u = w[::-1], u[:, ::-1].copy()
    n = len(w)
    scale = max(1.0, abs(w[0]))
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and w[stop - 1] - w[stop] <= cluster_tol * scale:
            stop += 1
        if stop - start > 1:
            u[:, start:stop] = _canonical_basis(u[:, start:stop])
        start = stop
    for j in range(n):
        nz = np.flatnonzero(np.abs(u[:, j]) > 1e-12)
        if nz.size and u[nz[0], j] < 0:
            u[:, j] = -u[:, j]
    return w, u


def _canonical_basis(q):
    n, k = q.shape
    basis = []
    for i in range(n):
        v = q @ q[i]  # projection of e_i onto span(q)
        for b in basis:
            v = v - (b @ v) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
            if len(basis) == k:
                break
    return np.column_stack(basis)


def _gamma_diagonal(n, config: BalanceConfig, cap):
    if config.gamma_mode == "scaled-identity":
        return np.full(n, cap)
    if config.gamma_mode == "random-diagonal":
        rng = philox_generator(config.seed)
        return rng.uniform(-cap, cap, size=n)
    g = np.asarray(config.custom_diagonal, dtype=float)
    if g.shape != (n,):
        raise BadConfig(f"custom_diagonal has length {g.size}, expected {n}")
    if np.max(np.abs(g)) > cap + 1e-12:
        raise BadConfig("custom_diagonal exceeds gamma_cap")
    return g


def build_symmetrizer(P, config: BalanceConfig):
    """``Lambda = U Gamma U^T`` for the Gramian ``P`` (array or GramianSolution)."""
    if isinstance(P, GramianSolution):
        P = P.P
    p = np.asarray(P, dtype=float)
    if config.gamma_cap is None:
        if config.gamma_mode != "custom":
            raise BadConfig("gamma_cap must be set when only the Gramian is given")
        cap = float(np.max(np.abs(config.custom_diagonal)))
    else:
        cap = float(config.gamma_cap)
    _, u = ordered_eigenvectors(p)
    g = _gamma_diagonal(p.shape[0], config, cap)
    lam = (u * g) @ u.T
    return 0.5 * (lam + lam.T)


def _resolve(A, config):
    net = as_network(A)
    rho = require_stable(net).rho
    cap = rho if config.gamma_cap is None else config.gamma_cap
    if cap > rho + 1e-12:
        raise BadConfig(f"gamma_cap {cap} exceeds rho(A) = {rho}")
    return net, rho, replace(config, gamma_cap=cap)


def balance(A: MatrixLike, config: BalanceConfig = BalanceConfig()) -> NetworkMatrix:
    """Return the epsilon-balanced network ``(1 - eps) A + eps Lambda``."""
    net, _, cfg = _resolve(A, config)
    if cfg.epsilon == 0.0:
        return net
    lam = build_symmetrizer(solve_gramian(net), cfg)
    return NetworkMatrix.from_array((1.0 - cfg.epsilon) * net.entries + cfg.epsilon * lam)


def balancing_bound_report(A: MatrixLike, config: BalanceConfig = BalanceConfig()) -> BalanceBoundReport:
    """Compare the balanced network's energy against the theoretical caps.

    With ``q = 1 - eps + eps * gamma`` the caps are
    ``sigma1(P(A_eps)) <= sigma1(P(A)) / (1 - q^2)``,
    ``trace(P(A_eps)) <= trace(P(A)) / (1 - q^2)^2`` and
    ``rho(A_eps) <= q``.
    """
    net, gamma, cfg = _resolve(A, config)
    if cfg.epsilon <= 0.0:
        raise BadConfig("the bound report needs epsilon in (0, 1]")
    sol = solve_gramian(net)
    lam = build_symmetrizer(sol, cfg)
    a_eps = NetworkMatrix.from_array((1.0 - cfg.epsilon) * net.entries + cfg.epsilon * lam)
    q = 1.0 - cfg.epsilon + cfg.epsilon * gamma
    try:
        sol_eps = solve_gramian(a_eps)
    except UnstableMatrix:
        raise UnstableMatrix("balanced network came out unstable") from None
    s_before = top_singular_value(sol.P)
    t_before = float(np.trace(sol.P))
    return BalanceBoundReport(
        epsilon=cfg.epsilon,
        gamma=gamma,
        sigma1_before=s_before,
        sigma1_after=top_singular_value(sol_eps.P),
        sigma1_cap=s_before / (1.0 - q * q),
        trace_before=t_before,
        trace_after=float(np.trace(sol_eps.P)),
        trace_cap=t_before / (1.0 - q * q) ** 2,
        rho_after=sol_eps.spectrum.rho,
        rho_cap=q,
    )


def psd_lemma_gap(A: MatrixLike, Lam, pattern: Sequence) -> float:
    """``min eig(gamma^(2 t_lam) P(A) - M^T M)`` for ``M = A^t1 Lam^s1 A^t2 Lam^s2 ...``.

    ``pattern`` lists ``(t_j, s_j)`` exponent pairs, ``t_lam = sum s_j`` and
    ``gamma = rho(A)``.  At most 6 pairs with exponents up to 8.
    """
    if len(pattern) > 6 or any(t > 8 or s > 8 or t < 0 or s < 0 for t, s in pattern):
        raise PatternTooLarge("pattern limited to 6 pairs with exponents in [0, 8]")
    net = as_network(A)
    gamma = require_stable(net).rho
    a = net.entries
    lam = np.asarray(Lam, dtype=float)
    m = np.eye(net.n)
    t_lam = 0
    for t, s in pattern:
        m = m @ np.linalg.matrix_power(a, int(t)) @ np.linalg.matrix_power(lam, int(s))
        t_lam += int(s)
    p = solve_gramian(net).P
    return psd_gap(m.T @ m, gamma ** (2 * t_lam) * p)


def verify_psd_lemma(A: MatrixLike, Lam, pattern: Sequence, tol: float = 1e-8) -> bool:
    """Check ``M^T M <= gamma^(2 t_lam) P(A)``; see :func:`psd_lemma_gap`."""
    return psd_lemma_gap(A, Lam, pattern) >= -tol


def sandwich_gap(A: MatrixLike, Lam) -> float:
    """``min eig(gamma^2 P - Lam P Lam)`` with ``P = P(A)`` and ``gamma = rho(A)``."""
    net = as_network(A)
    gamma = require_stable(net).rho
    p = solve_gramian(net).P
    lam = np.asarray(Lam, dtype=float)
    return psd_gap(lam @ p @ lam, gamma**2 * p)


def cross_term_gap(X, Y) -> float:
    """``min eig(X^T X + Y^T Y - X^T Y - Y^T X)``; never negative beyond rounding."""
    x = np.asarray(X, dtype=float)
    y = np.asarray(Y, dtype=float)
    return psd_gap(x.T @ y + y.T @ x, x.T @ x + y.T @ y)


def sum_square_gap(mats: Sequence) -> float:
    """``min eig(k sum A_i^T A_i - (sum A_i)^T (sum A_i))`` for ``k`` matrices."""
    ms = [np.asarray(m, dtype=float) for m in mats]
    total = sum(ms)
    return psd_gap(total.T @ total, len(ms) * sum(m.T @ m for m in ms))


def asymmetry(A) -> float:
    a = np.asarray(A, dtype=float)
    return float(np.max(np.abs(a - a.T)))


def gaussian_network(n: int, rho: float, seed: int) -> NetworkMatrix:
    """i.i.d. standard normal matrix rescaled to spectral radius ``rho``."""
    rng = philox_generator(seed)
    a = rng.standard_normal((n, n))
    r = float(np.max(np.abs(np.linalg.eigvals(a))))
    return NetworkMatrix.from_array(a * (rho / r))


@dataclass(frozen=True)
class SweepRow:
    seed: int
    epsilon: float
    h2_before: float
    h2_after: float
    cap: float
    sigma1_before: float
    sigma1_after: float
    sigma1_cap: float
    rho_after: float
    rho_cap: float
    passed: bool


def balancing_sweep(
    seeds: Sequence[int],
    eps_grid: Sequence[float],
    n: int = 40,
    rho: float = 0.9,
    gamma_mode: str = "random-diagonal",
):
    """Balance seeded Gaussian networks over an epsilon grid.

    Returns ``(rows, strict_decrease_fraction)`` where the fraction counts
    cells whose H2 norm went strictly down.
    """
    rows = []
    for seed in seeds:
        a = gaussian_network(n, rho, seed)
        gamma = spectral_radius(a).rho
        for eps in eps_grid:
            cfg = BalanceConfig(epsilon=float(eps), gamma_mode=gamma_mode, gamma_cap=min(gamma, rho), seed=seed)
            r = balancing_bound_report(a, cfg)
            rows.append(
                SweepRow(seed, float(eps), r.trace_before, r.trace_after, r.trace_cap,
                         r.sigma1_before, r.sigma1_after, r.sigma1_cap, r.rho_after, r.rho_cap, r.passed)
            )
    frac = float(np.mean([r.h2_after < r.h2_before for r in rows])) if rows else 0.0
    return rows, frac
