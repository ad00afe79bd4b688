"""Separable multi-output GP on graph signals.

Training signals are stacked node-fastest: ``ytilde = Y.ravel()`` for an
(N, M) signal matrix ``Y``, so signal ``n`` occupies block ``n`` and the
covariance is ``kron(K, BB^T) + noise * I``. In matrix form
``kron(K, G) @ Y.ravel() == (K @ Y @ G.T).ravel()``, which is what every fast
routine below relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import NumericalError, ValidationError
from .graph import Graph
from .kernels import (
    BaselineGraphKernel,
    GramEigensystem,
    InputKernel,
    PolynomialGraphFilter,
    gram_eigensystem,
    input_kernel_matrix,
)

LOG_2PI = np.log(2.0 * np.pi)
JITTER = 1e-8
DENSE_LIMIT = 400
CONVENTION = "node-fastest"


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Inputs ``X`` (N, d) paired with graph signals ``Y`` (N, M), one signal per row."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if Y.ndim != 2 or Y.shape[0] < 1:
            raise ValidationError("Y must be an (N, M) matrix with N >= 1")
        if X.shape[0] != Y.shape[0]:
            raise ValidationError(f"{X.shape[0]} inputs but {Y.shape[0]} signals")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValidationError("training data contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def num_signals(self) -> int:
        return self.Y.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.Y.shape[1]

    @property
    def ytilde(self) -> np.ndarray:
        return self.Y.ravel()

    @classmethod
    def independent(cls, Y) -> TrainingSet:
        """Signals indexed 0..N-1, for use with the identity input kernel."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return cls(np.arange(Y.shape[0], dtype=float)[:, None], Y)


@dataclass(frozen=True)
class Hyperparameters:
    """Output kernel (polynomial filter or baseline), input kernel and noise variance."""

    output: PolynomialGraphFilter | BaselineGraphKernel
    input: InputKernel = field(default_factory=InputKernel)
    noise: float = 0.1

    def __post_init__(self):
        if not (self.noise > 0 and np.isfinite(self.noise)):
            raise ValidationError(f"noise variance must be positive, got {self.noise}")
        if not isinstance(self.output, (PolynomialGraphFilter, BaselineGraphKernel)):
            raise ValidationError(f"unsupported output kernel {self.output!r}")

    @property
    def is_polynomial(self) -> bool:
        return isinstance(self.output, PolynomialGraphFilter)

    def replace(self, **changes) -> Hyperparameters:
        fields = dict(output=self.output, input=self.input, noise=self.noise)
        fields.update(changes)
        return Hyperparameters(**fields)

    def describe(self) -> dict:
        out = {"noise": self.noise, "input_kind": self.input.kind,
               "lengthscale": self.input.lengthscale, "input_variance": self.input.variance}
        if self.is_polynomial:
            out["beta"] = list(map(float, self.output.coefficients))
        else:
            out["baseline"] = self.output.kind
            out["alpha"] = self.output.alpha
            out["p"] = self.output.p
        return out


class KroneckerFactor:
    """Joint eigenbasis of ``kron(K, G) + noise * I``.

    With ``K = UK diag(lamK) UK^T`` and ``G = UB diag(lamB) UB^T`` the
    covariance is diagonal in ``kron(UK, UB)`` with entries
    ``d[i, j] = lamK[i] * lamB[j] + noise``.
    """

    def __init__(self, UK, lamK, UB, lamB, noise):
        self.UK = UK
        self.lamK = np.clip(lamK, 0.0, None)
        self.UB = UB
        self.lamB = np.clip(lamB, 0.0, None)
        self.noise = float(noise)
        self.d = np.outer(self.lamK, self.lamB) + self.noise
        if not np.all(self.d > 0) or not np.all(np.isfinite(self.d)):
            raise NumericalError("covariance has non-positive or non-finite eigenvalues",
                                 context={"noise": noise})

    @classmethod
    def from_matrices(cls, K, G, noise) -> KroneckerFactor:
        lamK, UK = _eigh(K)
        lamB, UB = _eigh(G)
        return cls(UK, lamK, UB, lamB, noise)

    def rotate(self, Y) -> np.ndarray:
        return self.UK.T @ Y @ self.UB

    def unrotate(self, A) -> np.ndarray:
        return self.UK @ A @ self.UB.T

    def solve(self, Y) -> np.ndarray:
        """``Sigma^-1`` applied to the (N, M) matrix form of a stacked vector."""
        return self.unrotate(self.rotate(Y) / self.d)

    @property
    def logdet(self) -> float:
        return float(np.sum(np.log(self.d)))

    def log_marginal_likelihood(self, Y) -> float:
        A = self.rotate(Y)
        quad = float(np.sum(A * A / self.d))
        return -0.5 * self.logdet - 0.5 * quad - 0.5 * self.d.size * LOG_2PI

    @property
    def K(self) -> np.ndarray:
        return (self.UK * self.lamK) @ self.UK.T

    @property
    def G(self) -> np.ndarray:
        return (self.UB * self.lamB) @ self.UB.T


def _eigh(S):
    S = np.asarray(S, dtype=float)
    try:
        lam, U = np.linalg.eigh(0.5 * (S + S.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    return lam, U


def full_covariance(K, gram, noise) -> np.ndarray:
    """Dense ``kron(K, gram) + noise * I``; only for small problems and checks."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    gram = np.atleast_2d(np.asarray(gram, dtype=float))
    if K.shape[0] != K.shape[1] or gram.shape[0] != gram.shape[1]:
        raise ValidationError("K and gram must be square")
    S = np.kron(K, gram)
    S[np.diag_indices_from(S)] += noise
    return S


def kron_solve_and_logdet(K, gram, noise, v):
    """``(Sigma^-1 v, log|Sigma|)`` without forming the NM x NM covariance."""
    if not noise > 0:
        raise ValidationError("noise variance must be positive")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    gram = np.atleast_2d(np.asarray(gram, dtype=float))
    v = np.asarray(v, dtype=float)
    N, M = K.shape[0], gram.shape[0]
    if v.size != N * M:
        raise ValidationError(f"vector of length {v.size} does not match N*M = {N * M}")
    fac = KroneckerFactor.from_matrices(K, gram, noise)
    return fac.solve(v.reshape(N, M)).ravel(), fac.logdet


def factorize(h: Hyperparameters, data: TrainingSet, graph: Graph,
              gram: GramEigensystem | None = None) -> KroneckerFactor:
    if data.num_nodes != graph.num_nodes:
        raise ValidationError(f"signals have {data.num_nodes} nodes, graph has {graph.num_nodes}")
    K = input_kernel_matrix(h.input, data.X)
    if gram is None:
        gram = gram_eigensystem(h.output, graph)
    lamK, UK = _eigh(K)
    return KroneckerFactor(UK, lamK, gram.vectors, gram.values, h.noise)


def log_marginal_likelihood(h: Hyperparameters, data: TrainingSet, graph: Graph,
                            method: str = "fast") -> float:
    """Log-density of the stacked training signals under the GP prior plus noise."""
    if method == "fast":
        value = factorize(h, data, graph).log_marginal_likelihood(data.Y)
    elif method == "dense":
        value = _dense_lml(h, data, graph)
    else:
        raise ValidationError(f"unknown method {method!r}")
    if not np.isfinite(value):
        raise NumericalError("log-marginal likelihood is not finite", context=h.describe())
    return value


def output_gram(h: Hyperparameters, graph: Graph) -> np.ndarray:
    return gram_eigensystem(h.output, graph).matrix()


def _dense_lml(h, data, graph):
    N, M = data.Y.shape
    if N * M > DENSE_LIMIT:
        raise ValidationError(f"dense path limited to N*M <= {DENSE_LIMIT}")
    S = full_covariance(input_kernel_matrix(h.input, data.X), output_gram(h, graph), h.noise)
    c, low = cho_factor(S, lower=True)
    y = data.ytilde
    return float(-np.sum(np.log(np.diag(c))) - 0.5 * y @ cho_solve((c, low), y)
                 - 0.5 * y.size * LOG_2PI)


@dataclass(frozen=True, eq=False)
class Posterior:
    """Predictive distribution of T test signals given the training set.

    ``mean`` is (T, M), one predicted signal per row. Covariances are held in
    the output eigenbasis ``UB``: for eigen-index ``j`` the T x T covariance
    across test signals is ``Kss * lamB[j] + noise * I - W diag(lamB[j]**2 / d[:, j]) W^T``
    with ``W = UK^T K_*``.
    """

    mean: np.ndarray
    UB: np.ndarray = field(repr=False)
    lamB: np.ndarray = field(repr=False)
    Kss: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    d: np.ndarray = field(repr=False)
    noise: float = 0.0

    @property
    def num_test(self) -> int:
        return self.mean.shape[0]

    def frequency_covariances(self) -> np.ndarray:
        """(M, T, T) stack of per-eigenvector covariances across test signals."""
        lam = self.lamB
        scaled = (lam**2)[None, :] / self.d  # (N, M)
        R = np.einsum("it,ij,is->jts", self.W, scaled, self.W)
        C = lam[:, None, None] * self.Kss[None] - R
        T = self.num_test
        C[:, np.arange(T), np.arange(T)] += self.noise
        return 0.5 * (C + C.transpose(0, 2, 1))

    def covariance(self, t: int = 0) -> np.ndarray:
        """M x M predictive covariance of test signal ``t``."""
        c = self.frequency_covariances()[:, t, t]
        S = (self.UB * c) @ self.UB.T
        return 0.5 * (S + S.T)

    def joint_covariance(self) -> np.ndarray:
        """(T*M) x (T*M) joint covariance, node-fastest."""
        C = self.frequency_covariances()
        UB = self.UB
        T, M = self.num_test, UB.shape[0]
        S = np.einsum("ak,kts,bk->tasb", UB, C, UB).reshape(T * M, T * M)
        return 0.5 * (S + S.T)


def posterior_predict(h: Hyperparameters, data: TrainingSet, graph: Graph, X_star) -> Posterior:
    """Condition the joint train/test Gaussian on the training signals."""
    if data.num_signals < 1:
        raise ValidationError("empty training set")
    gram = gram_eigensystem(h.output, graph)
    fac = factorize(h, data, graph, gram)
    X_star = np.asarray(X_star, dtype=float)
    if X_star.ndim == 1:
        X_star = X_star[:, None] if data.X.shape[1] == 1 else X_star[None, :]
    K_star = input_kernel_matrix(h.input, data.X, X_star)
    Kss = input_kernel_matrix(h.input, X_star)
    alpha = fac.solve(data.Y)
    mean = K_star.T @ alpha @ fac.G
    return Posterior(mean, fac.UB, fac.lamB, Kss, fac.UK.T @ K_star, fac.d, h.noise)


def gaussian_log_density(mean, cov, y) -> float:
    """Multivariate normal log-density with ``1e-8 * trace / dim`` diagonal jitter."""
    mean = np.asarray(mean, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    S = np.array(cov, dtype=float, ndmin=2)
    if S.shape != (y.size, y.size) or mean.size != y.size:
        raise ValidationError("mean, covariance and observation sizes disagree")
    S[np.diag_indices_from(S)] += JITTER * max(np.trace(S), 0.0) / y.size
    try:
        c = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("predictive covariance is not positive definite") from exc
    z = solve_triangular(c, y - mean, lower=True)
    return float(-np.sum(np.log(np.diag(c))) - 0.5 * z @ z - 0.5 * y.size * LOG_2PI)


def test_log_likelihood(p: Posterior, y_star) -> float:
    """Joint predictive log-density of the test signals (T, M) under ``p``.

    Evaluated eigenvector by eigenvector: rotating residuals by the orthogonal
    ``UB`` leaves the density unchanged and block-diagonalises the covariance.
    """
    Y = np.atleast_2d(np.asarray(y_star, dtype=float))
    if Y.shape != p.mean.shape:
        raise ValidationError(f"test signals have shape {Y.shape}, posterior {p.mean.shape}")
    Z = (Y - p.mean) @ p.UB
    C = p.frequency_covariances()
    T = p.num_test
    return float(sum(gaussian_log_density(np.zeros(T), C[j], Z[:, j]) for j in range(Z.shape[1])))


test_log_likelihood.__test__ = False


def icm_gram_oracle(B) -> np.ndarray:
    """Sum of outer products of the columns of ``B``, i.e. the ICM output covariance."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    out = np.zeros((B.shape[0], B.shape[0]))
    for b in B.T:
        out += np.outer(b, b)
    return out
