"""Dense matrix kernels for linear discrete-time networks.

Everything here works on a state transition matrix ``A`` of the system
``x(k+1) = A x(k)``.  The central object is the identity Gramian, the
unique solution ``P`` of ``P = A^T P A + I`` for Schur-stable ``A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    NoConvergence,
    NotNonnegative,
    NotSymmetric,
    ParseError,
    RenormalizationOverflow,
    SingularSystem,
    UnstableMatrix,
)

__all__ = [
    "NetworkMatrix",
    "GramianSolution",
    "SpectrumEstimate",
    "PerronResult",
    "as_network",
    "solve_gramian",
    "kronecker_gramian",
    "spectral_radius",
    "require_stable",
    "robust_spectral_radius",
    "top_singular_value",
    "perron_vector",
    "resolvent_column_sums",
    "psd_gap",
    "psd_order_holds",
    "read_matrix_csv",
    "write_matrix_csv",
    "format_float",
]

SYMMETRY_TOL = 1e-12
STABILITY_MARGIN = 1e-9


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NetworkMatrix:
    """Square real network matrix with cached structural flags.

    Build with :meth:`from_array`; the ``entries`` array is read-only so
    instances can be shared freely.
    """

    entries: np.ndarray
    rho_estimate: Optional[float] = None
    is_symmetric: bool = False
    is_nonnegative: bool = False

    @classmethod
    def from_array(cls, a, rho_estimate=None) -> "NetworkMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        if rho_estimate is not None and rho_estimate < 0:
            raise ValueError("rho_estimate must be nonnegative")
        sym = bool(np.max(np.abs(a - a.T)) <= SYMMETRY_TOL)
        return cls(
            entries=_frozen(a),
            rho_estimate=rho_estimate,
            is_symmetric=sym,
            is_nonnegative=bool(np.all(a >= 0)),
        )

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    def with_rho(self, rho: float) -> "NetworkMatrix":
        return NetworkMatrix(self.entries, rho, self.is_symmetric, self.is_nonnegative)


MatrixLike = Union[NetworkMatrix, np.ndarray, Sequence[Sequence[float]]]


def as_network(a: MatrixLike) -> NetworkMatrix:
    if isinstance(a, NetworkMatrix):
        return a
    return NetworkMatrix.from_array(a)


@dataclass(frozen=True)
class GramianSolution:
    P: np.ndarray
    residual: float
    doublings_used: int
    converged: bool
    trace_history: tuple = field(default=(), repr=False)
    spectrum: Optional["SpectrumEstimate"] = field(default=None, repr=False)


@dataclass(frozen=True)
class SpectrumEstimate:
    rho: float
    method: str  # "symmetric-eig", "gelfand-squaring" or "power-iteration"
    iterations: int
    uncertainty: float


@dataclass(frozen=True)
class PerronResult:
    lambda_pf: float
    v_right: np.ndarray
    pi_left: np.ndarray
    converged: bool
    iterations: int


# ---------------------------------------------------------------------------
# spectral radius


def _gelfand(a, tol, max_squarings, visit=None):
    """Gelfand squaring; ``visit(b, log_norm)`` sees each normalized power.

    ``b * exp(log_norm)`` equals ``A^(2^m)`` for ``m = 0, 1, ...``.
    """
    n = a.shape[0]
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return 0.0, 0, 0.0
    b = a / norm
    log_norm = math.log(norm)  # log ||A^k||_F with k = 2**m
    logs = [log_norm]
    if visit is not None:
        visit(b, log_norm)
    for m in range(1, max_squarings + 1):
        b = b @ b
        c = np.linalg.norm(b)
        if not math.isfinite(c):
            raise RenormalizationOverflow(f"renormalized power overflowed after {m} squarings")
        if c == 0.0 and 2**m <= 2 * n:
            # A^(2^m) = 0 with 2^(m-1) < n: genuinely nilpotent
            if visit is not None:
                visit(None, -math.inf)
            return 0.0, m, 0.0
        if c < 1e-280:
            # Normalized powers of a defective matrix tend to a nilpotent
            # matrix and eventually underflow; extrapolate what we have.
            return _extrapolate(logs, m)
        b /= c
        log_norm = 2.0 * log_norm + math.log(c)
        logs.append(log_norm / 2.0**m)
        if visit is not None:
            visit(b, log_norm)
        diff = abs(math.exp(logs[-1]) - math.exp(logs[-2]))
        if diff < tol:
            return math.exp(logs[-1]), m, diff
    return math.exp(logs[-1]), max_squarings, diff


def _extrapolate(logs, m):
    """Two Richardson sweeps on log ||A^(2^j)||^(1/2^j).

    The log-estimates behave like ``log rho + (alpha*j + c) / 2^j`` where the
    ``j`` term comes from Jordan blocks; two sweeps cancel both terms.
    """
    e = np.array(logs)
    if len(logs) < 4:
        raise RenormalizationOverflow(
            f"renormalization collapsed after {m} squarings", math.exp(e.min())
        )
    r1 = 2.0 * e[1:] - e[:-1]
    r2 = 2.0 * r1[1:] - r1[:-1]
    rho = math.exp(r2[-1])
    raw = math.exp(e[-1])
    unc = abs(raw - rho) + abs(math.exp(r2[-1]) - math.exp(r2[-2]))
    if unc > 1e-3 * max(raw, 1e-300):
        raise RenormalizationOverflow(
            f"renormalization collapsed after {m} squarings before the estimate settled",
            math.exp(e.min()),
        )
    return rho, m, unc


def _power_radius(a, tol, max_iter, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(a.shape[0])
    x /= np.linalg.norm(x)
    est_prev = 0.0
    for it in range(1, max_iter + 1):
        # two steps per round so real +/- pairs don't oscillate
        y = a @ (a @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0, it, 0.0
        est = math.sqrt(ny)
        x = y / ny
        if abs(est - est_prev) < tol:
            return est, it, abs(est - est_prev)
        est_prev = est
    return est_prev, max_iter, abs(est - est_prev)


def spectral_radius(
    A: MatrixLike,
    method: str = "auto",
    tol: float = 1e-8,
    max_squarings: int = 40,
) -> SpectrumEstimate:
    """Estimate the spectral radius of ``A``.

    Symmetric input is handled by an exact symmetric eigensolve.  Anything
    else goes through Gelfand's formula ``rho = lim ||A^k||^(1/k)``
    evaluated at ``k = 2**m`` by repeated squaring with renormalization,
    which is reliable for defective and strongly non-normal matrices where
    plain power iteration is not.

    Parameters
    ----------
    A : NetworkMatrix or array_like
    method : {"auto", "symmetric-eig", "gelfand-squaring", "power-iteration"}
    tol : float
        Stop once successive Gelfand estimates differ by less than this.
    max_squarings : int

    Raises
    ------
    RenormalizationOverflow
        If renormalized powers leave the floating-point range.
    """
    net = as_network(A)
    a = net.entries
    if method == "auto":
        method = "symmetric-eig" if net.is_symmetric else "gelfand-squaring"
    if method == "symmetric-eig":
        if not net.is_symmetric:
            raise NotSymmetric("symmetric-eig requested for a non-symmetric matrix")
        w = np.linalg.eigvalsh(a)
        return SpectrumEstimate(float(np.max(np.abs(w))), method, 1, 0.0)
    if method == "gelfand-squaring":
        rho, it, unc = _gelfand(a, tol, max_squarings)
        return SpectrumEstimate(float(rho), method, it, float(unc))
    if method == "power-iteration":
        rho, it, unc = _power_radius(a, tol, 100_000)
        return SpectrumEstimate(float(rho), method, it, float(unc))
    raise ValueError(f"unknown method {method!r}")


def robust_spectral_radius(A: MatrixLike) -> SpectrumEstimate:
    """Like :func:`spectral_radius` but never raises on renormalization trouble.

    When Gelfand squaring collapses, the eigenvalue modulus from a dense
    eigensolve is reported and the uncertainty spans up to the last valid
    Gelfand upper bound.
    """
    try:
        return spectral_radius(A)
    except RenormalizationOverflow as exc:
        a = as_network(A).entries
        rho = float(np.max(np.abs(np.linalg.eigvals(a))))
        upper = exc.upper_bound if exc.upper_bound is not None else rho
        return SpectrumEstimate(rho, "gelfand-squaring", 0, max(upper - rho, 0.0))


def require_stable(A: MatrixLike) -> SpectrumEstimate:
    """Return the spectral estimate, raising UnstableMatrix if rho >= 1 - 1e-9."""
    est = robust_spectral_radius(A)
    _check_margin(est)
    return est


# ---------------------------------------------------------------------------
# Gramian


def solve_gramian(
    A: MatrixLike,
    tol: float = 1e-10,
    max_doublings: int = 64,
    check_stability: bool = True,
) -> GramianSolution:
    """Solve ``P = A^T P A + I`` by squared-Smith doubling.

    The iteration keeps ``S = sum_{k < 2^m} (A^T)^k A^k`` and ``B = A^(2^m)``
    and updates ``S <- S + B^T S B``, ``B <- B @ B``.  It stops when the
    Frobenius norm of the update drops to ``tol``.

    Parameters
    ----------
    A : NetworkMatrix or array_like
        Schur-stable matrix.
    tol : float, default 1e-10
    max_doublings : int, default 64
    check_stability : bool, default True
        Skip the spectral-radius guard when the caller already knows ``A``
        is stable.

    Returns
    -------
    GramianSolution

    Raises
    ------
    UnstableMatrix
        If the spectral radius estimate is at least ``1 - 1e-9``.
    NoConvergence
        If ``max_doublings`` is exhausted with the residual above tolerance.
    """
    net = as_network(A)
    a = net.entries
    n = net.n
    state = _Doubling(n, tol)
    spectrum = None
    if check_stability and not net.is_symmetric:
        # one pass of squarings serves both the radius estimate and the series
        try:
            rho, it, unc = _gelfand(a, 1e-8, 40, visit=state.absorb)
            spectrum = SpectrumEstimate(float(rho), "gelfand-squaring", it, float(unc))
        except RenormalizationOverflow:
            spectrum = robust_spectral_radius(net)
        _check_margin(spectrum)
    elif check_stability:
        spectrum = require_stable(net)
    if not state.done:
        state.run(a, max_doublings)
    p = 0.5 * (state.s + state.s.T)
    residual = float(np.linalg.norm(p - a.T @ p @ a - np.eye(n)))
    ok = residual <= tol * (1.0 + np.linalg.norm(p))
    if not state.done and not ok:
        raise NoConvergence(
            f"doubling stopped after {state.used} steps with residual {residual:.3e}"
        )
    return GramianSolution(
        _frozen(p), residual, state.used, bool(ok), tuple(state.traces), spectrum
    )


class _Doubling:
    """Accumulator for ``S <- S + B^T S B`` with ``B = A^(2^m)``."""

    def __init__(self, n, tol):
        self.s = np.eye(n)
        self.tol = tol
        self.traces = [float(n)]
        self.used = 0
        self.done = False
        self.diverged = False
        self.last = None  # (normalized power, log scale) not yet absorbed

    def absorb(self, b, log_norm):
        if self.done or self.diverged:
            return
        if b is None:
            self.done = True
            return
        self.last = (b, log_norm)
        if 2.0 * log_norm > 600.0:
            self.diverged = True
            return
        with np.errstate(over="ignore", invalid="ignore"):
            upd = math.exp(2.0 * log_norm) * (b.T @ (self.s @ b))
        if not np.isfinite(upd).all():
            self.diverged = True
            return
        self._add(upd)
        self.last = None

    def _add(self, upd):
        self.s = self.s + upd
        self.used += 1
        self.traces.append(float(np.trace(self.s)))
        if np.linalg.norm(upd) <= self.tol:
            self.done = True

    def run(self, a, max_doublings):
        if self.diverged:
            raise UnstableMatrix("Gramian series diverged")
        if self.last is not None:
            b, log_norm = self.last
            b = b * math.exp(log_norm)
        elif self.used == 0:
            b = a.copy()
        else:
            # absorb() consumed every power handed to it; continue from the
            # next one, recomputed from scratch
            b = np.linalg.matrix_power(a, 2**self.used)
        while self.used < max_doublings and not self.done:
            with np.errstate(over="ignore", invalid="ignore"):
                upd = b.T @ (self.s @ b)
            if not np.isfinite(upd).all():
                raise UnstableMatrix("Gramian series overflowed")
            self._add(upd)
            if self.done:
                break
            with np.errstate(over="ignore", invalid="ignore"):
                b = b @ b
            if not b.any():
                self.done = True
                break
            if not np.all(np.isfinite(b)):
                break


def _check_margin(est):
    if est.rho >= 1.0 - STABILITY_MARGIN:
        raise UnstableMatrix(f"spectral radius estimate {est.rho:.12g} is not below 1 - 1e-9")


def kronecker_gramian(A: MatrixLike) -> np.ndarray:
    """Direct solve of ``vec(P) = (I - A^T kron A^T)^{-1} vec(I)``; small n only."""
    a = np.asarray(as_network(A).entries)
    n = a.shape[0]
    if n > 40:
        raise ValueError("Kronecker oracle is for small matrices (n <= 40)")
    m = np.eye(n * n) - np.kron(a.T, a.T)
    p = np.linalg.solve(m, np.eye(n).reshape(-1)).reshape(n, n)
    return 0.5 * (p + p.T)


def top_singular_value(P, sym_tol: float = 1e-10) -> float:
    """Largest singular value of a symmetric PSD matrix (its top eigenvalue)."""
    if isinstance(P, GramianSolution):
        P = P.P
    p = np.asarray(P, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {p.shape}")
    if np.max(np.abs(p - p.T)) > sym_tol:
        raise NotSymmetric("P is not symmetric within tolerance")
    n = p.shape[0]
    w = scipy.linalg.eigh(p, eigvals_only=True, subset_by_index=[n - 1, n - 1])
    return float(w[0])


# ---------------------------------------------------------------------------
# Perron vectors and resolvents


def _perron_iterate(m, shift, tol, max_iter):
    n = m.shape[0]
    v = np.full(n, 1.0 / n)
    lam_prev = math.inf
    for it in range(1, max_iter + 1):
        w = m @ v + shift * v
        total = w.sum()
        if total == 0.0:
            return 0.0, v, True, it
        w /= total
        lam = total - shift  # v sums to one
        delta = np.max(np.abs(w - v))
        v = w
        if delta <= tol * np.max(np.abs(v)) and abs(lam - lam_prev) <= tol * max(abs(lam), 1e-300):
            return lam, v, True, it
        lam_prev = lam
    return lam, v, False, max_iter


def perron_vector(A: MatrixLike, tol: float = 1e-10, max_iter: int = 100_000) -> PerronResult:
    """Perron root with right and left Perron vectors (each summing to 1).

    Power iteration is run on ``A + s I`` with ``s`` equal to the largest
    row sum, which removes the peripheral eigenvalues of periodic matrices
    (cycles, stars) from the dominant circle without moving eigenvectors.
    """
    net = as_network(A)
    if not net.is_nonnegative:
        raise NotNonnegative("Perron iteration needs an entry-wise nonnegative matrix")
    a = net.entries
    shift = float(np.max(a.sum(axis=1)))
    if shift == 0.0:
        n = net.n
        u = np.full(n, 1.0 / n)
        return PerronResult(0.0, _frozen(u), _frozen(u), True, 0)
    lam_r, v, ok_r, it_r = _perron_iterate(a, shift, tol, max_iter)
    lam_l, pi, ok_l, it_l = _perron_iterate(a.T, shift, tol, max_iter)
    lam = 0.5 * (lam_r + lam_l)
    return PerronResult(float(max(lam, 0.0)), _frozen(v), _frozen(pi), ok_r and ok_l, max(it_r, it_l))


def resolvent_column_sums(A: MatrixLike, check_stability: bool = True) -> np.ndarray:
    """Column sums of ``(I - A)^{-1}`` via one LU solve of ``(I - A)^T c = 1``."""
    net = as_network(A)
    if check_stability:
        require_stable(net)
    n = net.n
    m = np.eye(n) - net.entries
    lu, piv = scipy.linalg.lu_factor(m.T, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < 1e-14:
        raise SingularSystem("I - A is numerically singular")
    c = scipy.linalg.lu_solve((lu, piv), np.ones(n), check_finite=False)
    return c


def psd_gap(X, Y) -> float:
    """Smallest eigenvalue of the symmetric part of ``Y - X``."""
    x = np.asarray(X, dtype=float)
    y = np.asarray(Y, dtype=float)
    if x.shape != y.shape or x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionMismatch(f"shapes {x.shape} and {y.shape} do not match")
    d = y - x
    return float(np.linalg.eigvalsh(0.5 * (d + d.T))[0])


def psd_order_holds(X, Y, tol: float = 1e-10) -> bool:
    """True iff ``X <= Y`` in the Loewner order, i.e. ``min eig(Y - X) >= -tol``."""
    return psd_gap(X, Y) >= -tol


# ---------------------------------------------------------------------------
# CSV format: "n=<int>" then n rows of n comma separated floats


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _parse_row(text, lineno, n=None):
    try:
        row = [float(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise ParseError(f"bad number ({exc})", lineno) from None
    if n is not None and len(row) != n:
        raise ParseError(f"expected {n} values, found {len(row)}", lineno)
    return row


def read_matrix_csv(path) -> NetworkMatrix:
    lines = Path(path).read_text().splitlines()
    rows = []
    n = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if n is None:
            if not line.startswith("n="):
                raise ParseError("first line must be 'n=<int>'", lineno)
            try:
                n = int(line[2:])
            except ValueError:
                raise ParseError(f"bad dimension {line[2:]!r}", lineno) from None
            if n < 1:
                raise ParseError("dimension must be positive", lineno)
            continue
        if len(rows) == n:
            raise ParseError("more rows than declared", lineno)
        rows.append(_parse_row(line, lineno, n))
    if n is None:
        raise ParseError("empty matrix file")
    if len(rows) != n:
        raise ParseError(f"expected {n} rows, found {len(rows)}", len(lines))
    return NetworkMatrix.from_array(np.array(rows))


def write_matrix_csv(path, A: MatrixLike) -> None:
    a = as_network(A).entries
    out = [f"n={a.shape[0]}"]
    out.extend(",".join(format_float(x) for x in row) for row in a)
    Path(path).write_text("\n".join(out) + "\n")
