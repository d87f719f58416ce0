"""Energy-type robustness measures derived from the identity Gramian."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import BadShock, NotSymmetric
from .matrix_core import (
    MatrixLike,
    as_network,
    require_stable,
    solve_gramian,
    top_singular_value,
)

__all__ = [
    "EnergyReport",
    "energy_report",
    "symmetric_max_norm",
    "impulse_energy",
    "energy_with_gramian",
]


@dataclass(frozen=True)
class EnergyReport:
    """Max norm, average norm, H2 norm, scaled H2 norm and stability margin."""

    n: int
    max_norm: float
    avg_norm: float
    h2: float
    scaled_h2: float
    rho: float
    distance_to_instability: float

    def to_dict(self) -> dict:
        return asdict(self)


def energy_report(A: MatrixLike, tol: float = 1e-10) -> EnergyReport:
    """All energy measures of ``A`` from a single Gramian solve.

    ``max_norm`` is the worst-case energy over unit deterministic shocks
    (the top eigenvalue of ``P``), ``avg_norm`` the expected energy per node
    under an identity-covariance shock (``trace(P) / n``), ``h2`` is
    ``trace(P)`` and ``scaled_h2`` is ``(1 - rho) * trace(P)``.
    """
    return energy_with_gramian(A, tol)[1]


def energy_with_gramian(A: MatrixLike, tol: float = 1e-10):
    """Return ``(GramianSolution, EnergyReport)`` for callers that need both."""
    net = as_network(A)
    sol = solve_gramian(net, tol=tol)
    rho = sol.spectrum.rho
    h2 = float(np.trace(sol.P))
    dist = 1.0 - rho
    rep = EnergyReport(
        n=net.n,
        max_norm=top_singular_value(sol.P),
        avg_norm=h2 / net.n,
        h2=h2,
        scaled_h2=dist * h2,
        rho=rho,
        distance_to_instability=dist,
    )
    return sol, rep


def symmetric_max_norm(A: MatrixLike) -> float:
    """``1 / (1 - rho^2)``: the max norm of a symmetric network, no Lyapunov solve."""
    net = as_network(A)
    if not net.is_symmetric:
        raise NotSymmetric("closed form needs a symmetric matrix")
    rho = require_stable(net).rho
    return 1.0 / (1.0 - rho * rho)


def impulse_energy(
    A: MatrixLike,
    omega,
    horizon: int = 1_000_000,
    increment_tol: float = 1e-14,
) -> float:
    """Total energy ``sum_k x(k)^T x(k)`` of the response to a unit shock.

    The sum starts at the shocked state itself (``x = omega``), the
    convention under which the total equals ``omega^T P omega``.  The
    simulation stops at ``horizon`` steps or once an increment falls below
    ``increment_tol``; transient growth in non-normal networks is allowed to
    play out since increments only become small after it.
    """
    net = as_network(A)
    w = np.asarray(omega, dtype=float).ravel()
    if w.shape != (net.n,):
        raise BadShock(f"shock has length {w.size}, expected {net.n}")
    if abs(np.linalg.norm(w) - 1.0) > 1e-12:
        raise BadShock("shock must have unit Euclidean norm")
    require_stable(net)
    a = net.entries
    x = w.copy()
    total = 0.0
    for _ in range(horizon):
        inc = float(x @ x)
        total += inc
        if inc < increment_tol:
            break
        x = a @ x
    return total
