"""Graphs, Laplacians and the graph Fourier transform."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from .errors import DegenerateError, EigensolverError, ValidationError

VARIANTS = ("combinatorial", "normalized", "scaled")

# eigenvalue excursions outside the admissible range are clamped, larger ones are errors
_CLAMP_SLACK = 1e-8
_MAX_CONNECT_RETRIES = 50


@dataclass(frozen=True, eq=False)
class Graph:
    """Weighted undirected graph on ``M >= 2`` nodes.

    Parameters
    ----------
    adjacency : ndarray, shape (M, M)
        Symmetric matrix of non-negative edge weights with zero diagonal.
    """

    adjacency: np.ndarray

    def __post_init__(self):
        A = np.array(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValidationError(f"adjacency must be square, got shape {A.shape}")
        if A.shape[0] < 2:
            raise ValidationError("a graph needs at least 2 nodes")
        if not np.all(np.isfinite(A)):
            raise ValidationError("adjacency contains non-finite weights")
        if not np.array_equal(A, A.T):
            raise ValidationError("adjacency must be symmetric")
        if np.any(np.diag(A) != 0):
            raise ValidationError("adjacency must have a zero diagonal")
        if np.any(A < 0):
            raise ValidationError("edge weights must be non-negative")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def num_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency)))

    def edges(self):
        """Return ``(i, j, w)`` triples with ``i < j`` in lexicographic order."""
        i, j = np.nonzero(np.triu(self.adjacency))
        return [(int(a), int(b), float(self.adjacency[a, b])) for a, b in zip(i, j)]

    def is_connected(self) -> bool:
        n, _ = connected_components(self.adjacency > 0, directed=False)
        return n == 1

    def fingerprint(self) -> str:
        """SHA-256 of the canonical edge list (node count plus ``i j w`` lines)."""
        lines = [f"nodes {self.num_nodes}"]
        lines += [f"{i} {j} {w:.17g}" for i, j, w in self.edges()]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()

    def laplacian(self, variant: str = "combinatorial") -> np.ndarray:
        return laplacian(self, variant)

    def spectrum(self, variant: str = "scaled") -> SpectralDecomposition:
        """Cached eigendecomposition of the requested Laplacian variant."""
        cache = self._spectra
        if variant not in cache:
            cache[variant] = eigendecompose(self.laplacian(variant), variant)
        return cache[variant]

    @cached_property
    def _spectra(self) -> dict:
        return {}


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Ascending eigenvalues and orthonormal eigenvectors of a Laplacian.

    Column ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``.
    """

    variant: str
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.T


def laplacian(graph: Graph, variant: str = "combinatorial") -> np.ndarray:
    """Laplacian matrix of ``graph``.

    ``combinatorial`` is ``D - A``, ``normalized`` is ``D^-1/2 (D - A) D^-1/2``
    and ``scaled`` is ``(D - A) / lambda_max(D - A)``.
    """
    if variant not in VARIANTS:
        raise ValidationError(f"unknown Laplacian variant {variant!r}")
    A = graph.adjacency
    deg = A.sum(axis=1)
    L = np.diag(deg) - A
    if variant == "combinatorial":
        return L
    if variant == "normalized":
        if np.any(deg <= 0):
            raise DegenerateError("normalized Laplacian undefined: graph has an isolated node")
        s = 1.0 / np.sqrt(deg)
        Ln = s[:, None] * L * s[None, :]
        return 0.5 * (Ln + Ln.T)
    lam_max = np.linalg.eigvalsh(L)[-1]
    if lam_max <= 0:
        raise DegenerateError("scaled Laplacian undefined: graph has no edges")
    return L / lam_max


def eigendecompose(matrix: np.ndarray, variant: str = "combinatorial") -> SpectralDecomposition:
    """Symmetric eigendecomposition with clamping and a fixed sign convention.

    Eigenvalues are clamped below at 0 (and above at 1 for the scaled variant).
    Each eigenvector is flipped so its largest-magnitude entry is positive.
    """
    L = np.asarray(matrix, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValidationError("eigendecompose expects a square matrix")
    if not np.allclose(L, L.T, rtol=0, atol=1e-12 * max(1.0, np.abs(L).max())):
        raise ValidationError("eigendecompose expects a symmetric matrix")
    try:
        lam, U = np.linalg.eigh(0.5 * (L + L.T))
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigensolver did not converge: {exc}") from exc
    if lam[0] < -_CLAMP_SLACK * max(1.0, abs(lam[-1])):
        raise ValidationError(f"matrix is not PSD (min eigenvalue {lam[0]:.3g})")
    upper = 1.0 if variant == "scaled" else np.inf
    lam = np.clip(lam, 0.0, upper)
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    lam.setflags(write=False)
    U.setflags(write=False)
    return SpectralDecomposition(variant, lam, U)


def graph_fourier_transform(sd: SpectralDecomposition, y: np.ndarray) -> np.ndarray:
    """Graph Fourier coefficients ``U^T y``; accepts a signal or an (N, M) stack of signals."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != sd.size:
        raise ValidationError(f"signal length {y.shape[-1]} does not match graph size {sd.size}")
    return y @ sd.eigenvectors


def knn_graph(coords: np.ndarray, k: int) -> Graph:
    """Symmetrized k-nearest-neighbour graph with Gaussian edge weights.

    Nodes ``i`` and ``j`` are linked when either is among the other's ``k``
    nearest neighbours. Weights are ``exp(-d^2 / (2 sigma^2))`` with ``sigma``
    the mean distance to the k nearest neighbours. Distance ties are broken by
    node index.
    """
    X = _as_coords(coords)
    M = X.shape[0]
    if not 0 < k < M:
        raise ValidationError(f"k must satisfy 0 < k < {M}, got {k}")
    dist = cdist(X, X)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(M), k)
    cols = order.ravel()
    knn_d = dist[rows, cols]
    sigma = knn_d.mean()
    if sigma <= 0:
        raise DegenerateError("k-NN graph undefined: coincident coordinates")
    mask = np.zeros((M, M), dtype=bool)
    mask[rows, cols] = True
    mask |= mask.T
    W = np.where(mask, np.exp(-np.where(mask, dist, 0.0) ** 2 / (2 * sigma**2)), 0.0)
    return Graph(W)


def threshold_graph(coords: np.ndarray, threshold: float) -> Graph:
    """Link nodes closer than ``threshold`` with inverse-distance weights."""
    if not threshold > 0:
        raise ValidationError("threshold must be positive")
    X = _as_coords(coords)
    dist = cdist(X, X)
    off = ~np.eye(X.shape[0], dtype=bool)
    if np.any(dist[off] == 0):
        raise DegenerateError("coincident points: inverse-distance weight undefined")
    mask = off & (dist < threshold)
    W = np.zeros_like(dist)
    W[mask] = 1.0 / dist[mask]
    return Graph(W)


def random_graph(kind: str, params: dict | None = None, seed: int = 0) -> Graph:
    """Connected random graph.

    ``kind='sensor'`` places ``n`` points uniformly in the unit square and
    builds a ``k``-NN graph (``n=30, k=6`` by default).
    ``kind='barabasi_albert'`` starts from ``m0`` isolated nodes and attaches
    each new node to ``m`` distinct existing nodes with probability
    proportional to degree + 1 (``n=30, m0=10, m=5`` by default).

    Disconnected draws are rejected and redrawn from the same generator, up to
    50 attempts.
    """
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    if kind == "sensor":
        n = int(params.pop("n", 30))
        k = int(params.pop("k", 6))
        _reject_extra(params)
        if n < 2 or not 0 < k < n:
            raise ValidationError(f"infeasible sensor parameters n={n}, k={k}")

        def draw():
            return knn_graph(rng.uniform(size=(n, 2)), k)

    elif kind in ("barabasi_albert", "ba"):
        n = int(params.pop("n", 30))
        m0 = int(params.pop("m0", 10))
        m = int(params.pop("m", 5))
        _reject_extra(params)
        if not (1 <= m <= m0 < n):
            raise ValidationError(f"infeasible Barabasi-Albert parameters n={n}, m0={m0}, m={m}")

        def draw():
            W = np.zeros((n, n))
            for new in range(m0, n):
                weight = W[:new, :new].sum(axis=1) + 1.0
                targets = rng.choice(new, size=m, replace=False, p=weight / weight.sum())
                W[new, targets] = W[targets, new] = 1.0
            return Graph(W)

    else:
        raise ValidationError(f"unknown random graph kind {kind!r}")

    for _ in range(_MAX_CONNECT_RETRIES):
        g = draw()
        if g.is_connected():
            return g
    raise DegenerateError(f"no connected {kind} graph after {_MAX_CONNECT_RETRIES} draws")


def _as_coords(coords) -> np.ndarray:
    X = np.asarray(coords, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValidationError("coordinates must be an (M, d) array with M >= 2")
    return X


def _reject_extra(params):
    if params:
        raise ValidationError(f"unexpected graph parameters: {sorted(params)}")
