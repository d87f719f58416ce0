"""Generators for the canonical network families.

All random generation goes through numpy's counter-based ``Philox`` bit
generator keyed by the user seed, so a given ``(seed, n)`` yields the same
matrix on every platform and regardless of generation order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import BadSpec, ParseError, ZeroDegreeRow
from .matrix_core import NetworkMatrix, read_matrix_csv

__all__ = [
    "KINDS",
    "TopologySpec",
    "generate",
    "network_sequence",
    "philox_generator",
    "regular",
    "star",
    "cycle",
    "directed_line",
    "platoon",
    "wigner",
    "degree_normalized",
    "read_adjacency",
]

KINDS = ("star", "regular", "cycle", "directed-line", "platoon", "wigner", "degree-normalized")
_GAMMA_KINDS = ("star", "regular", "cycle", "degree-normalized")
SEED_MASK = (1 << 64) - 1


def philox_generator(seed: int, *extra: int) -> np.random.Generator:
    """Counter-based generator keyed by ``seed`` (plus optional stream ids)."""
    key = [int(seed) & SEED_MASK, *(int(e) & SEED_MASK for e in extra)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class TopologySpec:
    """Parameters of one network family.

    ``lambda_values`` and ``epsilon_values`` may hold a single value, which is
    broadcast to every vehicle; this is what makes a platoon spec usable
    across a whole size grid.
    """

    kind: str
    gamma: Optional[float] = None
    lambda_values: Optional[Tuple[float, ...]] = None
    epsilon_values: Optional[Tuple[float, ...]] = None
    sigma: Optional[float] = None
    seed: Optional[int] = None
    adjacency_path: Optional[str] = None
    adjacency: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    dl_orientation: str = "subdiagonal"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadSpec(f"unknown topology kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in _GAMMA_KINDS:
            if self.gamma is None or not 0.0 < self.gamma < 1.0:
                raise BadSpec(f"{self.kind} needs gamma in (0, 1), got {self.gamma!r}")
        if self.kind == "wigner":
            if self.sigma is None or not 0.0 < self.sigma < 0.5:
                raise BadSpec(f"wigner needs sigma in (0, 1/2), got {self.sigma!r}")
            if self.seed is None:
                raise BadSpec("wigner needs an explicit seed")
        if self.kind == "platoon" and self.lambda_values is not None:
            lam = np.asarray(self.lambda_values, dtype=float)
            if lam.size == 0 or np.any(lam <= 0.0) or np.any(lam >= 1.0):
                raise BadSpec("platoon lambda values must lie in (0, 1)")
        if self.kind == "degree-normalized" and self.adjacency is None and self.adjacency_path is None:
            raise BadSpec("degree-normalized needs an adjacency matrix or adjacency_path")
        if self.dl_orientation not in ("subdiagonal", "superdiagonal"):
            raise BadSpec(f"bad dl_orientation {self.dl_orientation!r}")

    @property
    def is_random(self) -> bool:
        return self.kind == "wigner"

    def min_n(self) -> int:
        return 3 if self.kind == "cycle" else 2


# ---------------------------------------------------------------------------
# raw constructors returning ndarrays


def regular(n: int, gamma: float) -> np.ndarray:
    return gamma / (n - 1) * (np.ones((n, n)) - np.eye(n))


def star(n: int, gamma: float) -> np.ndarray:
    a = np.zeros((n, n))
    a[0, 1:] = gamma / (n - 1)
    a[1:, 0] = gamma
    return a


def cycle(n: int, gamma: float) -> np.ndarray:
    a = np.zeros((n, n))
    idx = np.arange(n)
    a[idx, (idx + 1) % n] = gamma / 2
    a[(idx + 1) % n, idx] = gamma / 2
    return a


def directed_line(n: int, orientation: str = "subdiagonal") -> np.ndarray:
    k = -1 if orientation == "subdiagonal" else 1
    return np.eye(n, k=k)


def platoon(n: int, lambdas=0.5, eps=1.0) -> np.ndarray:
    lam = np.broadcast_to(np.asarray(lambdas, dtype=float).ravel(), (n,)) if np.size(lambdas) == 1 \
        else np.asarray(lambdas, dtype=float)
    if lam.shape != (n,):
        raise BadSpec(f"need {n} lambda values, got {lam.size}")
    e = np.asarray(eps, dtype=float).ravel()
    if e.size == 1:
        e = np.full(n - 1, e[0])
    if e.shape != (n - 1,):
        raise BadSpec(f"need {n - 1} superdiagonal values, got {e.size}")
    return np.diag(lam) + np.diag(e, k=1)


def wigner(n: int, sigma: float, seed: int) -> np.ndarray:
    rng = philox_generator(seed)
    g = rng.normal(0.0, sigma, size=(n, n))
    w = np.triu(g)
    w = w + np.triu(w, k=1).T
    return w / np.sqrt(n)


def degree_normalized(adj, gamma: float) -> Tuple[np.ndarray, bool]:
    """``gamma * D^{-1} Adj``; rows of isolated nodes stay zero.

    Returns the matrix and whether any zero-degree row was found.
    """
    adj = np.asarray(adj, dtype=float)
    deg = adj.sum(axis=1)
    zero = deg == 0
    out = np.zeros_like(adj)
    out[~zero] = gamma * adj[~zero] / deg[~zero, None]
    return out, bool(zero.any())


def read_adjacency(path, n: Optional[int] = None) -> np.ndarray:
    """Read an adjacency matrix from a matrix CSV or an ``i,j,weight`` edge list."""
    text = Path(path).read_text()
    first = next((ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")), "")
    if first.startswith("n="):
        return np.array(read_matrix_csv(path).entries)
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError("edge rows need 'i,j,weight'", lineno)
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"bad edge {line!r}", lineno) from None
        if i < 0 or j < 0:
            raise ParseError("node indices are 0-based and nonnegative", lineno)
        edges.append((i, j, w))
    size = max((max(i, j) for i, j, _ in edges), default=-1) + 1
    if n is not None:
        if n < size:
            raise BadSpec(f"edge list references node {size - 1} but n={n}")
        size = n
    adj = np.zeros((size, size))
    for i, j, w in edges:
        adj[i, j] += w
    return adj


# ---------------------------------------------------------------------------


def generate(spec: TopologySpec, n: int) -> NetworkMatrix:
    """Build the ``n``-node member of the family described by ``spec``."""
    if n < spec.min_n():
        raise BadSpec(f"{spec.kind} needs n >= {spec.min_n()}, got {n}")
    kind = spec.kind
    if kind == "regular":
        a = regular(n, spec.gamma)
    elif kind == "star":
        a = star(n, spec.gamma)
    elif kind == "cycle":
        a = cycle(n, spec.gamma)
    elif kind == "directed-line":
        a = directed_line(n, spec.dl_orientation)
    elif kind == "platoon":
        lam = spec.lambda_values if spec.lambda_values is not None else (0.5,)
        eps = spec.epsilon_values if spec.epsilon_values is not None else (1.0,)
        a = platoon(n, lam, eps)
    elif kind == "wigner":
        a = wigner(n, spec.sigma, spec.seed)
    else:
        adj = spec.adjacency if spec.adjacency is not None else read_adjacency(spec.adjacency_path, n)
        adj = np.asarray(adj, dtype=float)
        if adj.shape != (n, n):
            raise BadSpec(f"adjacency has shape {adj.shape}, expected ({n}, {n})")
        a, isolated = degree_normalized(adj, spec.gamma)
        if isolated:
            warnings.warn("zero-degree rows left as zero rows", ZeroDegreeRow, stacklevel=2)
    return NetworkMatrix.from_array(a)


def network_sequence(spec: TopologySpec, n_grid: Sequence[int]) -> list:
    """One matrix per grid size; random kinds use the seed ``seed XOR n``."""
    if len(n_grid) == 0:
        raise BadSpec("n_grid is empty")
    out = []
    for n in n_grid:
        s = spec
        if spec.is_random:
            s = _replace_seed(spec, (spec.seed ^ int(n)) & SEED_MASK)
        try:
            out.append(generate(s, int(n)))
        except BadSpec as exc:
            raise BadSpec(f"n={n}: {exc}") from exc
    return out


def _replace_seed(spec, seed):
    from dataclasses import replace

    return replace(spec, seed=seed)
