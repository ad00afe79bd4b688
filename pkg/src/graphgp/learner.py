"""Maximum-likelihood learning of graph-filter coefficients and GP hyperparameters.

The polynomial coefficients are learnt under the positivity constraint
``g(lam_i) >= 0`` at every scaled-Laplacian eigenvalue by alternating gradient
descent on the Lagrangian ``-l(beta) - mult^T V beta`` (``V`` the Vandermonde
matrix of eigenvalues) with gradient ascent on the log-multipliers.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, DivergenceError, NumericalError, ValidationError
from .gp import LOG_2PI, Hyperparameters, KroneckerFactor, TrainingSet, _eigh
from .graph import Graph
from .kernels import (
    FEASIBILITY_TOL,
    RANDOM_WALK_MARGIN,
    BaselineGraphKernel,
    InputKernel,
    PolynomialGraphFilter,
    evaluate_spectrum,
    gram_eigensystem,
    input_kernel_lengthscale_derivative,
    input_kernel_matrix,
    vandermonde,
)

log = logging.getLogger(__name__)

SPECTRUM_HINTS = {
    "lowpass": np.arange(-5.0, 6.0),
    "general": np.arange(-10.0, 11.0, 2.0),
}


@dataclass(frozen=True)
class OptimizerConfig:
    """Learning rates, iteration budgets and grid-search controls."""

    lr_beta: float = 1.0
    lr_lagrange: float = 10.0
    lr_lengthscale: float = 1.0
    lr_noise: float = 1.0
    lr_alpha: float = 1.0
    lr_variance: float = 1.0
    max_outer: int = 2000
    inner_steps: int = 50
    max_iter: int = 2000
    tol: float = 1e-6
    patience: int = 5
    max_halvings: int = 30
    grid_max_candidates: int = 20000
    seed: int = 0

    def __post_init__(self):
        for name in ("lr_beta", "lr_lagrange", "lr_lengthscale", "lr_noise", "lr_alpha",
                     "lr_variance", "tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("max_outer", "inner_steps", "max_iter", "patience", "grid_max_candidates"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be at least 1")

    def rate(self, param: str) -> float:
        if param.startswith("beta"):
            return self.lr_beta
        return {
            "log_lengthscale": self.lr_lengthscale,
            "log_noise": self.lr_noise,
            "alpha": self.lr_alpha,
            "log_input_variance": self.lr_variance,
        }[param]


# ---------------------------------------------------------------------------
# parameter vectors


def free_parameters(h: Hyperparameters, learn_lengthscale: bool = True,
                    learn_noise: bool = True) -> list[str]:
    """Names of the parameters optimized for ``h``.

    Polynomial models keep the input variance at 1 (its scale lives in the
    coefficients); baselines learn it on a log scale.
    """
    names = []
    if h.is_polynomial:
        names += [f"beta{k}" for k in range(h.output.degree + 1)]
    else:
        if h.output.has_alpha:
            names.append("alpha")
        names.append("log_input_variance")
    if learn_lengthscale and h.input.has_lengthscale:
        names.append("log_lengthscale")
    if learn_noise:
        names.append("log_noise")
    return names


def _softplus(x):
    return np.logaddexp(0.0, x)


def _softplus_inv(y):
    return y + np.log(-np.expm1(-y))


def _alpha_offset(b: BaselineGraphKernel, graph: Graph) -> float:
    if b.kind == "p_step_random_walk":
        return graph.spectrum("normalized").eigenvalues[-1] + RANDOM_WALK_MARGIN
    return 0.0


def pack(h: Hyperparameters, names, graph: Graph) -> np.ndarray:
    theta = []
    for name in names:
        if name.startswith("beta"):
            theta.append(h.output.coefficients[int(name[4:])])
        elif name == "alpha":
            if h.output.kind == "p_step_random_walk":
                excess = max(h.output.alpha - _alpha_offset(h.output, graph), 1e-12)
                theta.append(_softplus_inv(excess))
            else:
                theta.append(np.log(h.output.alpha))
        elif name == "log_lengthscale":
            theta.append(np.log(h.input.lengthscale))
        elif name == "log_input_variance":
            theta.append(np.log(h.input.variance))
        elif name == "log_noise":
            theta.append(np.log(h.noise))
        else:
            raise ValidationError(f"unknown parameter {name!r}")
    return np.array(theta, dtype=float)


def unpack(theta, names, template: Hyperparameters, graph: Graph) -> Hyperparameters:
    values = dict(zip(names, np.asarray(theta, dtype=float)))
    output, inp, noise = template.output, template.input, template.noise
    if template.is_polynomial:
        beta = output.coefficients.copy()
        for k in range(beta.size):
            beta[k] = values.get(f"beta{k}", beta[k])
        output = PolynomialGraphFilter(beta)
    elif "alpha" in values:
        raw = values["alpha"]
        if output.kind == "p_step_random_walk":
            alpha = _alpha_offset(output, graph) + _softplus(raw)
        else:
            alpha = np.exp(raw)
        output = output.replace(float(alpha))
    changes = {}
    if "log_lengthscale" in values:
        changes["lengthscale"] = float(np.exp(values["log_lengthscale"]))
    if "log_input_variance" in values:
        changes["variance"] = float(np.exp(values["log_input_variance"]))
    if changes:
        inp = inp.replace(**changes)
    if "log_noise" in values:
        noise = float(np.exp(values["log_noise"]))
    return Hyperparameters(output, inp, noise)


# ---------------------------------------------------------------------------
# likelihood and gradient


def nll_gradient(h: Hyperparameters, data: TrainingSet, graph: Graph, names=None):
    """Negative log-marginal likelihood and its gradient.

    Returns ``(nll, grad)`` with ``grad`` a dict keyed by parameter name
    (see :func:`free_parameters`). Coefficients are differentiated directly;
    lengthscale, noise and input variance on a log scale; ``alpha`` in its
    unconstrained coordinate (log, or softplus offset for the random walk).
    """
    if names is None:
        names = free_parameters(h)
    names = list(names)
    gram = gram_eigensystem(h.output, graph, with_derivatives=True)
    K = input_kernel_matrix(h.input, data.X)
    lamK, UK = _eigh(K)
    fac = KroneckerFactor(UK, lamK, gram.vectors, gram.values, h.noise)
    A = fac.rotate(data.Y)
    d = fac.d
    nll = 0.5 * fac.logdet + 0.5 * float(np.sum(A * A / d)) + 0.5 * d.size * LOG_2PI
    if not np.isfinite(nll):
        raise NumericalError("negative log-likelihood is not finite", context=h.describe())
    # d(nll)/d(d_ij) for perturbations that stay diagonal in the joint eigenbasis
    w = 0.5 / d - 0.5 * A * A / (d * d)
    lamK = fac.lamK
    grad = {}
    alpha_mat = None
    for name in names:
        if name.startswith("beta"):
            grad[name] = float(np.sum(w * np.outer(lamK, gram.diag_derivatives[name])))
        elif name == "log_noise":
            grad[name] = float(np.sum(w)) * h.noise
        elif name == "log_input_variance":
            grad[name] = float(np.sum(w * np.outer(lamK, fac.lamB)))
        elif name == "alpha":
            b = h.output
            chain = (1.0 - np.exp(-(b.alpha - _alpha_offset(b, graph)))
                     if b.kind == "p_step_random_walk" else b.alpha)
            if "alpha" in gram.diag_derivatives:
                g = float(np.sum(w * np.outer(lamK, gram.diag_derivatives["alpha"])))
            else:
                dG = gram.derivatives["alpha"]
                if alpha_mat is None:
                    alpha_mat = fac.unrotate(A / d)
                dG_rot = np.einsum("aj,ab,bj->j", fac.UB, dG, fac.UB)
                g = (0.5 * float(np.sum(np.outer(lamK, dG_rot) / d))
                     - 0.5 * float(np.sum(alpha_mat * (fac.K @ alpha_mat @ dG))))
            grad[name] = g * chain
        elif name == "log_lengthscale":
            dK = input_kernel_lengthscale_derivative(h.input, data.X)
            if alpha_mat is None:
                alpha_mat = fac.unrotate(A / d)
            dK_rot = np.einsum("ai,ab,bi->i", fac.UK, dK, fac.UK)
            grad[name] = (0.5 * float(np.sum(np.outer(dK_rot, fac.lamB) / d))
                          - 0.5 * float(np.sum(alpha_mat * (dK @ alpha_mat @ fac.G))))
        else:
            raise ValidationError(f"unknown parameter {name!r}")
    for name, value in grad.items():
        if not np.isfinite(value):
            raise NumericalError(f"gradient w.r.t. {name} is not finite", context=h.describe())
    return nll, grad


class _Objective:
    """Negative log-likelihood over a parameter vector, with cached rotations.

    When neither the input kernel nor the output eigenbasis depends on the
    free parameters, the rotated data ``UK^T Y UB`` is computed once and each
    evaluation costs O(NM).
    """

    def __init__(self, data, graph, template, names):
        self.data, self.graph, self.template = data, graph, template
        self.names = list(names)
        self.fast = template.is_polynomial and not any(
            n in ("log_lengthscale", "log_input_variance") for n in self.names)
        if self.fast:
            sd = graph.spectrum("scaled")
            K = input_kernel_matrix(template.input, data.X)
            lamK, UK = _eigh(K)
            self.lamK = np.clip(lamK, 0.0, None)
            A = UK.T @ data.Y @ sd.eigenvectors
            self.A2 = A * A
            self.V = vandermonde(sd.eigenvalues, template.output.degree)
            self.nb = template.output.degree + 1

    def hyper(self, theta) -> Hyperparameters:
        return unpack(theta, self.names, self.template, self.graph)

    def __call__(self, theta):
        if not self.fast:
            nll, grad = nll_gradient(self.hyper(theta), self.data, self.graph, self.names)
            return nll, np.array([grad[n] for n in self.names])
        values = dict(zip(self.names, theta))
        beta = np.array([values.get(f"beta{k}", self.template.output.coefficients[k])
                         for k in range(self.nb)])
        noise = np.exp(values["log_noise"]) if "log_noise" in values else self.template.noise
        g = self.V @ beta
        d = np.outer(self.lamK, g * g) + noise
        nll = 0.5 * (np.sum(np.log(d)) + np.sum(self.A2 / d) + d.size * LOG_2PI)
        w = 0.5 / d - 0.5 * self.A2 / (d * d)
        dg = 2.0 * g * (self.lamK @ w)
        out = []
        for name in self.names:
            if name.startswith("beta"):
                out.append(dg @ self.V[:, int(name[4:])])
            else:
                out.append(np.sum(w) * noise)
        return float(nll), np.array(out)


def _descend(fun, x0, rates, max_iter, tol, patience, max_halvings, trace=None):
    """Gradient descent with step halving on increase and doubling on success.

    The step multiplier starts at 1, is halved (up to ``max_halvings`` times)
    until the objective does not increase, and doubles back toward 1 after
    each accepted step. Stops after ``patience`` consecutive changes below
    ``tol`` or when no halving yields a decrease.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    if not np.isfinite(f):
        raise DivergenceError("objective is not finite at the starting point", context=trace)
    scale, calm = 1.0, 0
    for it in range(max_iter):
        for _ in range(max_halvings + 1):
            x_new = x - scale * rates * g
            try:
                with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                    f_new, g_new = fun(x_new)
            except (NumericalError, ValidationError):
                f_new = np.inf
            if not np.isfinite(f_new):
                f_new = np.inf
            if f_new <= f:
                break
            scale *= 0.5
        else:
            return x, f, it
        calm = calm + 1 if abs(f - f_new) < tol else 0
        x, f, g = x_new, f_new, g_new
        if trace is not None:
            trace.append(f)
        scale = min(1.0, 2.0 * scale)
        if calm >= patience:
            return x, f, it + 1
    return x, f, max_iter


def _orient(h: Hyperparameters, graph: Graph) -> Hyperparameters:
    """Flip the filter sign if it is mostly negative; the likelihood only sees g**2."""
    if not h.is_polynomial:
        return h
    g = evaluate_spectrum(h.output, graph.spectrum("scaled").eigenvalues)
    if g.sum() < 0:
        return h.replace(output=PolynomialGraphFilter(-h.output.coefficients))
    return h


def unconstrained_fit(data: TrainingSet, graph: Graph, cfg: OptimizerConfig,
                      init: Hyperparameters, learn_lengthscale: bool = True,
                      learn_noise: bool = True, trace: list | None = None) -> Hyperparameters:
    """Gradient ascent on the log-marginal likelihood over all free hyperparameters.

    Returns the best iterate. For polynomial models this optimizes the
    coefficients, lengthscale and noise; for baselines ``alpha``, input
    variance, lengthscale and noise.
    """
    names = free_parameters(init, learn_lengthscale, learn_noise)
    obj = _Objective(data, graph, init, names)
    x0 = pack(init, names, graph)
    if not np.all(np.isfinite(x0)):
        raise ValidationError("initial hyperparameters are not finite")
    rates = np.array([cfg.rate(n) for n in names])
    x, _, _ = _descend(obj, x0, rates, cfg.max_iter, cfg.tol, cfg.patience,
                       cfg.max_halvings, trace)
    return _orient(obj.hyper(x), graph)


# ---------------------------------------------------------------------------
# initialization


@dataclass(frozen=True, eq=False)
class Initialization:
    """Result of the grid search and unconstrained refinement."""

    hyperparameters: Hyperparameters
    grid_start: Hyperparameters
    candidates: np.ndarray = field(repr=False)
    noises: np.ndarray = field(repr=False)
    log_likelihoods: np.ndarray = field(repr=False)
    best_index: int = 0
    lengthscale: float = 1.0
    signal_variance: float = 1.0
    exhaustive: bool = True

    def top(self, k: int = 10):
        order = np.argsort(-self.log_likelihoods, kind="stable")[:k]
        return [(self.candidates[i], float(self.noises[i]), float(self.log_likelihoods[i]))
                for i in order]


def _grid_candidates(values, degree, max_candidates, seed):
    n = values.size ** (degree + 1)
    if n <= max_candidates:
        grid = np.array(list(itertools.product(values, repeat=degree + 1)), dtype=float)
        return grid, True
    rng = np.random.default_rng(seed)
    flat = rng.choice(n, size=max_candidates, replace=False)
    digits = np.stack([(flat // values.size**k) % values.size
                       for k in range(degree, -1, -1)], axis=1)
    return values[digits], False


def _grid_log_likelihoods(betas, noise, lamK, A2, V, chunk=2048):
    """Log-marginal likelihood of many coefficient vectors at a fixed noise level.

    Rows of ``K``'s eigenbasis with equal eigenvalue are pooled, so the
    identity input kernel costs O(C M) per chunk of C candidates.
    """
    keys, inverse = np.unique(np.round(lamK, 12), return_inverse=True)
    counts = np.bincount(inverse).astype(float)
    pooled = np.zeros((keys.size, A2.shape[1]))
    np.add.at(pooled, inverse, A2)
    N, M = A2.shape
    out = np.empty(betas.shape[0])
    for start in range(0, betas.shape[0], chunk):
        g2 = (betas[start:start + chunk] @ V.T) ** 2
        d = keys[None, :, None] * g2[:, None, :] + noise
        val = np.sum(counts[None, :, None] * np.log(d) + pooled[None] / d, axis=(1, 2))
        out[start:start + chunk] = -0.5 * (val + N * M * LOG_2PI)
    return out


def initialize_hyperparameters(data: TrainingSet, graph: Graph, degree: int,
                               spectrum_hint: str = "lowpass",
                               cfg: OptimizerConfig | None = None,
                               input_kernel: InputKernel | None = None,
                               refine: bool = True) -> Initialization:
    """Grid search over coefficients and noise, then unconstrained refinement.

    The lengthscale starts at the mean squared norm of the signals and the
    signal variance is the variance of all signal values. The grid uses unit
    input variance and noise in ``{var/10, var/5}``; coefficients take values
    in ``-5..5`` (``lowpass``) or ``-10, -8, ..., 10`` (``general``). Grids
    larger than ``cfg.grid_max_candidates`` are subsampled with ``cfg.seed``.
    """
    cfg = cfg or OptimizerConfig()
    if spectrum_hint not in SPECTRUM_HINTS:
        raise ValidationError(f"spectrum_hint must be one of {sorted(SPECTRUM_HINTS)}")
    if degree < 0:
        raise ValidationError("degree must be non-negative")
    if data.num_signals < 2:
        raise ValidationError("need at least 2 signals to estimate the signal variance")
    var = float(np.var(data.Y))
    if not var > 0:
        raise DegenerateError("signals have zero variance")
    lengthscale = float(np.mean(np.sum(data.Y * data.Y, axis=1)))
    inp = input_kernel or InputKernel("se")
    inp = inp.replace(variance=1.0,
                      lengthscale=lengthscale if lengthscale > 0 and inp.kind == "se"
                      else inp.lengthscale)

    sd = graph.spectrum("scaled")
    K = input_kernel_matrix(inp, data.X)
    lamK, UK = _eigh(K)
    lamK = np.clip(lamK, 0.0, None)
    A = UK.T @ data.Y @ sd.eigenvectors
    V = vandermonde(sd.eigenvalues, degree)
    betas, exhaustive = _grid_candidates(SPECTRUM_HINTS[spectrum_hint], degree,
                                         cfg.grid_max_candidates, cfg.seed)
    noise_levels = np.array([var / 10.0, var / 5.0])
    lml = np.concatenate([_grid_log_likelihoods(betas, s, lamK, A * A, V) for s in noise_levels])
    all_betas = np.concatenate([betas, betas])
    all_noise = np.repeat(noise_levels, betas.shape[0])
    finite = np.isfinite(lml)
    if not finite.any():
        raise NumericalError("every grid candidate produced a non-finite likelihood")
    # ties (e.g. beta and -beta) go to the smallest norm, then the most positive spectrum
    norms = np.linalg.norm(all_betas, axis=1)
    mass = all_betas @ V.sum(axis=0)
    order = np.lexsort((-mass, norms, -np.where(finite, lml, -np.inf)))
    best = int(order[0])
    start = Hyperparameters(PolynomialGraphFilter(all_betas[best]), inp, float(all_noise[best]))
    h = unconstrained_fit(data, graph, cfg, start) if refine else start
    return Initialization(h, start, all_betas, all_noise, lml, best,
                          lengthscale, var, exhaustive)


# ---------------------------------------------------------------------------
# constrained learning


@dataclass(frozen=True)
class LagrangeState:
    """Log-multipliers; the multipliers ``exp(log_multipliers)`` stay positive."""

    log_multipliers: np.ndarray

    @property
    def multipliers(self) -> np.ndarray:
        return np.exp(self.log_multipliers)


def lagrangian(beta, lagrange: LagrangeState, h: Hyperparameters, data: TrainingSet,
               graph: Graph) -> float:
    """``-l(beta) - mult^T V beta`` with all other hyperparameters taken from ``h``."""
    f = PolynomialGraphFilter(beta)
    nll, _ = nll_gradient(h.replace(output=f), data, graph, names=[])
    V = vandermonde(graph.spectrum("scaled").eigenvalues, f.degree)
    value = nll - float(lagrange.multipliers @ (V @ f.coefficients))
    if not np.isfinite(value):
        raise NumericalError("Lagrangian is not finite", context=h.describe())
    return value


@dataclass(frozen=True, eq=False)
class FitReport:
    """Outcome of a constrained fit.

    ``trace`` rows are ``(outer iteration, lagrangian, -l, max violation)``
    where the violation is ``max(0, -min_i g(lam_i))`` before the final
    feasibility repair.
    """

    hyperparameters: Hyperparameters
    trace: np.ndarray = field(repr=False)
    feasible: bool
    converged: bool
    log_marginal_likelihood: float
    lagrange: LagrangeState = field(repr=False)
    repair_shift: float = 0.0
    initialization: Initialization | None = field(default=None, repr=False)
    constrained: bool = True

    eigenvalues: np.ndarray | None = field(default=None, repr=False)

    @property
    def min_spectrum(self) -> float:
        """Smallest ``g(lam_i)`` over the scaled-Laplacian eigenvalues."""
        return float(self.hyperparameters.output(self.eigenvalues).min())


def constrained_fit(data: TrainingSet, graph: Graph, degree: int,
                    cfg: OptimizerConfig | None = None,
                    init: Hyperparameters | Initialization | None = None,
                    spectrum_hint: str = "lowpass") -> FitReport:
    """Learn coefficients with ``g(lam_i) >= 0`` by alternating primal descent and dual ascent.

    Each outer iteration runs up to ``cfg.inner_steps`` descent steps on the
    Lagrangian in the coefficients (stopping early once a step changes it by
    less than ``cfg.tol``), then one ascent step on the log-multipliers.
    Iteration stops after ``cfg.patience`` consecutive outer changes below
    ``cfg.tol`` or ``cfg.max_outer`` iterations. Noise and input kernel stay
    fixed at their initial values. Any residual violation is removed by
    raising the constant coefficient.
    """
    cfg = cfg or OptimizerConfig()
    initialization = None
    if init is None:
        init = initialize_hyperparameters(data, graph, degree, spectrum_hint, cfg)
    if isinstance(init, Initialization):
        initialization, init = init, init.hyperparameters
    if not init.is_polynomial:
        raise ValidationError("constrained_fit needs a polynomial initialization")
    beta0 = np.zeros(degree + 1)
    b = init.output.coefficients[: degree + 1]
    beta0[: b.size] = b
    h0 = init.replace(output=PolynomialGraphFilter(beta0))

    names = [f"beta{k}" for k in range(degree + 1)]
    obj = _Objective(data, graph, h0, names)
    lam = graph.spectrum("scaled").eigenvalues
    V = vandermonde(lam, degree)
    log_mult = np.zeros(lam.size)
    rates = np.full(degree + 1, cfg.lr_beta)
    beta = beta0.copy()
    rows = []

    def lagr(x):
        nll, g = obj(x)
        mult = np.exp(log_mult)
        return nll - mult @ (V @ x), g - V.T @ mult

    prev, calm, converged = None, 0, False
    for it in range(1, cfg.max_outer + 1):
        beta, _, _ = _descend(lagr, beta, rates, cfg.inner_steps, cfg.tol, 1, cfg.max_halvings)
        spec = V @ beta
        log_mult = log_mult + cfg.lr_lagrange * (-np.exp(log_mult) * spec)
        value, _ = lagr(beta)
        nll, _ = obj(beta)
        if not (np.isfinite(value) and np.all(np.isfinite(log_mult))):
            raise DivergenceError("Lagrangian diverged", context=np.array(rows))
        rows.append((it, value, nll, max(0.0, -float(spec.min()))))
        if prev is not None and abs(value - prev) < cfg.tol:
            calm += 1
            if calm >= cfg.patience:
                converged = True
                break
        else:
            calm = 0
        prev = value

    spec = V @ beta
    shift = max(0.0, -float(spec.min()))
    if shift > 0:
        beta = beta.copy()
        beta[0] += shift
        spec = V @ beta
        if spec.min() < 0:
            beta[0] -= spec.min()
    h = h0.replace(output=PolynomialGraphFilter(beta))
    nll, _ = obj(beta)
    feasible = bool((V @ beta).min() >= -FEASIBILITY_TOL)
    return FitReport(h, np.array(rows, dtype=float).reshape(-1, 4), feasible, converged,
                     -nll, LagrangeState(log_mult), shift, initialization, True, lam)


def fit_polynomial(data: TrainingSet, graph: Graph, degree: int,
                   cfg: OptimizerConfig | None = None, spectrum_hint: str = "lowpass",
                   input_kernel: InputKernel | None = None, constrained: bool = True,
                   learn_noise: bool | None = None) -> FitReport:
    """Full pipeline: grid search, unconstrained refinement, then the constrained fit.

    With ``constrained=False`` the unconstrained solution is reported as is;
    its spectrum may be negative at some eigenvalues.

    ``learn_noise=None`` keeps the noise at its grid-search value when the
    input kernel is the identity (independent signals). There the noise level
    and the filter's low-gain region are only weakly identifiable from the
    marginal likelihood, and freeing the noise distorts the recovered shape.
    """
    cfg = cfg or OptimizerConfig()
    if learn_noise is None:
        learn_noise = input_kernel is None or input_kernel.kind != "identity"
    init = initialize_hyperparameters(data, graph, degree, spectrum_hint, cfg, input_kernel,
                                      refine=False)
    refined = unconstrained_fit(data, graph, cfg, init.grid_start, learn_noise=learn_noise)
    init = Initialization(refined, init.grid_start, init.candidates, init.noises,
                          init.log_likelihoods, init.best_index, init.lengthscale,
                          init.signal_variance, init.exhaustive)
    if constrained:
        return constrained_fit(data, graph, degree, cfg, init)
    lam = graph.spectrum("scaled").eigenvalues
    nll, _ = nll_gradient(refined, data, graph, names=[])
    feasible = bool(evaluate_spectrum(refined.output, lam).min() >= -FEASIBILITY_TOL)
    return FitReport(refined, np.empty((0, 4)), feasible, True, -nll,
                     LagrangeState(np.zeros(lam.size)), 0.0, init, False, lam)


def fit_baseline(data: TrainingSet, graph: Graph, kernel: BaselineGraphKernel,
                 cfg: OptimizerConfig | None = None,
                 input_kernel: InputKernel | None = None) -> Hyperparameters:
    """Maximize the likelihood of a baseline kernel over alpha, input variance, lengthscale and noise."""
    cfg = cfg or OptimizerConfig()
    var = float(np.var(data.Y))
    if not var > 0:
        raise DegenerateError("signals have zero variance")
    inp = input_kernel or InputKernel("se")
    if inp.kind == "se":
        ls = float(np.mean(np.sum(data.Y * data.Y, axis=1)))
        inp = inp.replace(lengthscale=ls if ls > 0 else 1.0)
    inp = inp.replace(variance=var)
    if kernel.kind == "p_step_random_walk":
        floor = _alpha_offset(kernel, graph)
        if kernel.alpha < floor:
            kernel = kernel.replace(floor + 1.0)
    best = None
    for noise in (var / 10.0, var / 5.0):
        h = unconstrained_fit(data, graph, cfg, Hyperparameters(kernel, inp, noise))
        value = -nll_gradient(h, data, graph, names=[])[0]
        if best is None or value > best[0]:
            best = (value, h)
    return best[1]
