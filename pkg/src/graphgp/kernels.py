"""Input-space kernels, polynomial graph filters and baseline kernels on graphs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateError, ValidationError
from .graph import Graph, SpectralDecomposition

FEASIBILITY_TOL = 1e-8
SCALE_GRID_STEP = 1e-4
PINV_RTOL = 1e-10
RANDOM_WALK_MARGIN = 1e-8


@dataclass(frozen=True, eq=False)
class PolynomialGraphFilter:
    """Spectral filter ``g(lam) = b0 + b1*lam + ... + bP*lam**P`` on the scaled Laplacian."""

    coefficients: np.ndarray

    def __post_init__(self):
        beta = np.atleast_1d(np.array(self.coefficients, dtype=float))
        if beta.ndim != 1 or beta.size == 0:
            raise ValidationError("a polynomial filter needs at least one coefficient")
        if not np.all(np.isfinite(beta)):
            raise ValidationError("polynomial coefficients must be finite")
        beta.setflags(write=False)
        object.__setattr__(self, "coefficients", beta)

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, lambdas):
        return evaluate_spectrum(self, lambdas)

    def is_feasible(self, sd: SpectralDecomposition, tol: float = FEASIBILITY_TOL) -> bool:
        return bool(np.all(evaluate_spectrum(self, sd.eigenvalues) >= -tol))

    def __repr__(self):
        return f"PolynomialGraphFilter({list(self.coefficients)})"


def evaluate_spectrum(f: PolynomialGraphFilter, lambdas) -> np.ndarray:
    """Horner evaluation of the filter polynomial at each eigenvalue."""
    lam = np.asarray(lambdas, dtype=float)
    out = np.zeros_like(lam)
    for b in f.coefficients[::-1]:
        out = out * lam + b
    return out


def filter_matrix(f: PolynomialGraphFilter, sd: SpectralDecomposition) -> np.ndarray:
    """``B = U g(Lambda) U^T`` for the scaled Laplacian decomposition ``sd``."""
    if sd.variant != "scaled":
        raise ValidationError(f"polynomial filters act on the scaled Laplacian, got {sd.variant!r}")
    U = sd.eigenvectors
    B = (U * evaluate_spectrum(f, sd.eigenvalues)) @ U.T
    return 0.5 * (B + B.T)


def scale_polynomial(f: PolynomialGraphFilter) -> tuple[PolynomialGraphFilter, float]:
    """Divide ``g`` by its maximum over [0, 1] so the scaled filter peaks at 1.

    The maximum is taken over a grid of step 1e-4 (endpoints included).
    """
    grid = np.linspace(0.0, 1.0, int(round(1.0 / SCALE_GRID_STEP)) + 1)
    c = float(evaluate_spectrum(f, grid).max())
    if not c > 0:
        raise DegenerateError(f"filter is non-positive on [0, 1] (max {c:.3g}); cannot scale")
    return PolynomialGraphFilter(f.coefficients / c), c


def vandermonde(lambdas, degree: int) -> np.ndarray:
    """Rows ``(1, lam_i, ..., lam_i**degree)``."""
    if degree < 0:
        raise ValidationError("degree must be non-negative")
    return np.vander(np.asarray(lambdas, dtype=float), degree + 1, increasing=True)


INPUT_KINDS = ("se", "identity", "precomputed")


@dataclass(frozen=True, eq=False)
class InputKernel:
    """Kernel over signal inputs, scaled by ``variance``.

    ``se``: ``variance * exp(-|x - x'|^2 / (2 * lengthscale))``.
    ``identity``: ``variance`` when the (index) inputs coincide, else 0.
    ``precomputed``: inputs are integer row indices into ``matrix``.
    """

    kind: str = "se"
    lengthscale: float = 1.0
    variance: float = 1.0
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in INPUT_KINDS:
            raise ValidationError(f"unknown input kernel {self.kind!r}")
        if not (self.lengthscale > 0 and np.isfinite(self.lengthscale)):
            raise ValidationError(f"lengthscale must be positive, got {self.lengthscale}")
        if not (self.variance > 0 and np.isfinite(self.variance)):
            raise ValidationError(f"input variance must be positive, got {self.variance}")
        if self.kind == "precomputed":
            if self.matrix is None:
                raise ValidationError("precomputed input kernel needs a matrix")
            C = np.array(self.matrix, dtype=float)
            if C.ndim != 2 or C.shape[0] != C.shape[1] or not np.allclose(C, C.T):
                raise ValidationError("precomputed input covariance must be square symmetric")
            C.setflags(write=False)
            object.__setattr__(self, "matrix", C)

    def replace(self, **changes) -> InputKernel:
        fields = dict(kind=self.kind, lengthscale=self.lengthscale,
                      variance=self.variance, matrix=self.matrix)
        fields.update(changes)
        return InputKernel(**fields)

    @property
    def has_lengthscale(self) -> bool:
        return self.kind == "se"


def input_kernel_matrix(cfg: InputKernel, X, X2=None) -> np.ndarray:
    X = _as_inputs(X)
    X2 = X if X2 is None else _as_inputs(X2)
    if X.shape[1] != X2.shape[1]:
        raise ValidationError(f"input dimensions differ: {X.shape[1]} vs {X2.shape[1]}")
    if cfg.kind == "se":
        return cfg.variance * np.exp(-cdist(X, X2, "sqeuclidean") / (2.0 * cfg.lengthscale))
    if cfg.kind == "identity":
        return cfg.variance * (cdist(X, X2, "sqeuclidean") == 0).astype(float)
    i, j = _indices(X, cfg.matrix), _indices(X2, cfg.matrix)
    return cfg.variance * cfg.matrix[np.ix_(i, j)]


def input_kernel_lengthscale_derivative(cfg: InputKernel, X) -> np.ndarray:
    """Derivative of the SE Gram matrix with respect to ``log(lengthscale)``."""
    X = _as_inputs(X)
    D2 = cdist(X, X, "sqeuclidean")
    return cfg.variance * np.exp(-D2 / (2.0 * cfg.lengthscale)) * D2 / (2.0 * cfg.lengthscale)


def _as_inputs(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValidationError("inputs must be an (N, d) array")
    return X


def _indices(X, C) -> np.ndarray:
    if X.shape[1] != 1:
        raise ValidationError("precomputed input kernel expects a single index column")
    idx = X[:, 0]
    if np.any(idx != np.round(idx)) or np.any(idx < 0) or np.any(idx >= C.shape[0]):
        raise ValidationError("precomputed kernel inputs must be integer indices into the matrix")
    return idx.astype(int)


# kind -> Laplacian variant the transfer function acts on (None: not spectral)
BASELINE_KINDS = {
    "standard": "combinatorial",
    "global_filtering": "combinatorial",
    "local_averaging": None,
    "laplacian_pseudoinverse": "combinatorial",
    "regularized_laplacian": "normalized",
    "diffusion": "normalized",
    "p_step_random_walk": "normalized",
    "cosine": "normalized",
}
_ALPHA_KINDS = {"global_filtering", "local_averaging", "regularized_laplacian",
                "diffusion", "p_step_random_walk"}


@dataclass(frozen=True)
class BaselineGraphKernel:
    """Fixed-shape kernel on graphs with at most one scalar hyperparameter ``alpha``."""

    kind: str
    alpha: float = 1.0
    p: int = 1

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        if kind not in BASELINE_KINDS:
            raise ValidationError(f"unknown baseline kernel {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ValidationError(f"alpha must be positive, got {self.alpha}")
        if int(self.p) != self.p or self.p < 1:
            raise ValidationError(f"random-walk step count must be a positive integer, got {self.p}")

    @property
    def has_alpha(self) -> bool:
        return self.kind in _ALPHA_KINDS

    @property
    def laplacian_variant(self) -> str | None:
        return BASELINE_KINDS[self.kind]

    def transfer(self, lam, alpha=None):
        """Eigenvalues of ``BB^T`` as a function of Laplacian eigenvalues."""
        a = self.alpha if alpha is None else alpha
        lam = np.asarray(lam, dtype=float)
        if self.kind == "standard":
            return np.ones_like(lam)
        if self.kind == "global_filtering":
            return (1.0 + a * lam) ** -2
        if self.kind == "laplacian_pseudoinverse":
            cut = PINV_RTOL * max(lam.max(initial=0.0), 1e-300)
            safe = np.where(lam > cut, lam, 1.0)
            return np.where(lam > cut, 1.0 / safe, 0.0)
        if self.kind == "regularized_laplacian":
            return 1.0 / (1.0 + a * lam)
        if self.kind == "diffusion":
            return np.exp(-0.5 * a * lam)
        if self.kind == "p_step_random_walk":
            return (a - lam) ** self.p
        if self.kind == "cosine":
            return np.cos(lam * np.pi / 4.0)
        raise ValidationError(f"{self.kind} has no spectral transfer function")

    def transfer_alpha_derivative(self, lam, alpha=None):
        a = self.alpha if alpha is None else alpha
        lam = np.asarray(lam, dtype=float)
        if self.kind == "global_filtering":
            return -2.0 * lam * (1.0 + a * lam) ** -3
        if self.kind == "regularized_laplacian":
            return -lam / (1.0 + a * lam) ** 2
        if self.kind == "diffusion":
            return -0.5 * lam * np.exp(-0.5 * a * lam)
        if self.kind == "p_step_random_walk":
            return self.p * (a - lam) ** (self.p - 1)
        return np.zeros_like(lam)

    def replace(self, alpha: float) -> BaselineGraphKernel:
        return BaselineGraphKernel(self.kind, alpha, self.p)


def _local_averaging_factor(graph: Graph, alpha: float):
    A = graph.adjacency
    M = A.shape[0]
    inv = 1.0 / (1.0 + alpha * graph.degrees)
    B = inv[:, None] * (np.eye(M) + alpha * A)
    dB = inv[:, None] * A - (graph.degrees * inv)[:, None] * B
    return B, dB


def check_random_walk(b: BaselineGraphKernel, graph: Graph):
    if b.kind == "p_step_random_walk":
        lam_max = graph.spectrum("normalized").eigenvalues[-1]
        if b.alpha < lam_max + RANDOM_WALK_MARGIN:
            raise ValidationError(
                f"p-step random walk needs alpha >= lambda_max(normalized L) = {lam_max:.6g}, "
                f"got {b.alpha}")


def baseline_output_gram(b: BaselineGraphKernel, graph: Graph) -> np.ndarray:
    """Output-space Gram ``BB^T`` of a baseline kernel on ``graph``."""
    check_random_walk(b, graph)
    if b.kind == "local_averaging":
        B, _ = _local_averaging_factor(graph, b.alpha)
        G = B @ B.T
        return 0.5 * (G + G.T)
    sd = graph.spectrum(b.laplacian_variant)
    U = sd.eigenvectors
    G = (U * b.transfer(sd.eigenvalues)) @ U.T
    return 0.5 * (G + G.T)


@dataclass(frozen=True, eq=False)
class GramEigensystem:
    """Output Gram in eigen-form ``U diag(values) U^T`` plus parameter derivatives.

    ``derivatives`` maps a parameter name to ``dG`` as a full matrix in the
    original basis, or ``diag_derivatives`` to eigenvalue derivatives when
    ``dG`` shares the eigenbasis.
    """

    vectors: np.ndarray
    values: np.ndarray
    diag_derivatives: dict
    derivatives: dict

    def matrix(self) -> np.ndarray:
        G = (self.vectors * self.values) @ self.vectors.T
        return 0.5 * (G + G.T)


def gram_eigensystem(kernel, graph: Graph, with_derivatives: bool = False) -> GramEigensystem:
    """Eigen-form of ``BB^T`` for a polynomial filter or a baseline kernel.

    For the polynomial filter the eigenbasis is that of the scaled Laplacian
    and the eigenvalues are ``g(lam)**2``; derivatives are taken with respect
    to each coefficient. For baselines, the derivative is with respect to
    ``alpha`` itself.
    """
    diag, full = {}, {}
    if isinstance(kernel, PolynomialGraphFilter):
        sd = graph.spectrum("scaled")
        g = evaluate_spectrum(kernel, sd.eigenvalues)
        if with_derivatives:
            V = vandermonde(sd.eigenvalues, kernel.degree)
            for k in range(kernel.degree + 1):
                diag[f"beta{k}"] = 2.0 * g * V[:, k]
        return GramEigensystem(sd.eigenvectors, g * g, diag, full)
    if not isinstance(kernel, BaselineGraphKernel):
        raise ValidationError(f"unsupported output kernel {kernel!r}")
    check_random_walk(kernel, graph)
    if kernel.kind == "local_averaging":
        B, dB = _local_averaging_factor(graph, kernel.alpha)
        G = B @ B.T
        vals, vecs = np.linalg.eigh(0.5 * (G + G.T))
        vals = np.clip(vals, 0.0, None)
        if with_derivatives:
            dG = dB @ B.T + B @ dB.T
            full["alpha"] = 0.5 * (dG + dG.T)
        return GramEigensystem(vecs, vals, diag, full)
    sd = graph.spectrum(kernel.laplacian_variant)
    vals = kernel.transfer(sd.eigenvalues)
    if with_derivatives and kernel.has_alpha:
        diag["alpha"] = kernel.transfer_alpha_derivative(sd.eigenvalues)
    return GramEigensystem(sd.eigenvectors, vals, diag, full)
