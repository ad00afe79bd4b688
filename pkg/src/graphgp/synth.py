"""Synthetic filtered graph signals with known spectra."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import invwishart

from .errors import DegenerateError, ValidationError
from .gp import TrainingSet
from .graph import Graph
from .kernels import PolynomialGraphFilter, filter_matrix

LOWPASS_TAYLOR = (1.0, -1.5, 1.5**2 / 2.0, -(1.5**3) / 6.0, 1.5**4 / 24.0)
BANDPASS = (0.0, 1.0, 4.0, 1.0, -6.0)
PRESETS = {"lowpass-taylor": LOWPASS_TAYLOR, "bandpass": BANDPASS, "identity": (1.0,)}

_MAX_WISHART_DRAWS = 20


@dataclass(frozen=True, eq=False)
class GroundTruthFilter:
    coefficients: tuple
    name: str = "custom"

    def __post_init__(self):
        coef = tuple(float(c) for c in np.atleast_1d(self.coefficients))
        if not coef or not any(coef):
            raise DegenerateError("ground-truth filter needs a nonzero coefficient")
        object.__setattr__(self, "coefficients", coef)

    @property
    def polynomial(self) -> PolynomialGraphFilter:
        return PolynomialGraphFilter(self.coefficients)

    @classmethod
    def parse(cls, spec: str) -> GroundTruthFilter:
        """``lowpass-taylor``, ``bandpass``, ``identity`` or ``custom:c0,c1,...``."""
        if spec in PRESETS:
            return cls(PRESETS[spec], spec)
        if spec.startswith("custom:"):
            try:
                coef = [float(c) for c in spec[len("custom:"):].split(",") if c.strip()]
            except ValueError as exc:
                raise ValidationError(f"bad filter coefficients in {spec!r}") from exc
            return cls(tuple(coef), spec)
        raise ValidationError(f"unknown filter {spec!r}")


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    """Generated signals plus everything needed to regenerate them."""

    graph: Graph
    X: np.ndarray
    Y: np.ndarray
    theta: GroundTruthFilter
    snr_db: float | None
    seed: int
    noise_variance: float
    input_covariance: np.ndarray | None = field(default=None, repr=False)
    clean: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_signals(self) -> int:
        return self.Y.shape[0]

    def training_set(self, rows=None) -> TrainingSet:
        rows = slice(None) if rows is None else rows
        return TrainingSet(self.X[rows], self.Y[rows])

    def provenance(self) -> dict:
        return {
            "seed": self.seed,
            "theta": ",".join(f"{c:.17g}" for c in self.theta.coefficients),
            "filter": self.theta.name,
            "snr_db": "none" if self.snr_db is None else f"{self.snr_db:.17g}",
            "noise_variance": f"{self.noise_variance:.17g}",
            "num_signals": self.Y.shape[0],
            "num_nodes": self.Y.shape[1],
            "mode": "independent" if self.input_covariance is None else "wishart",
            "graph_fingerprint": self.graph.fingerprint(),
        }


def _streams(seed):
    """Independent generators for the clean signals and the noise."""
    return np.random.default_rng([seed, 0]), np.random.default_rng([seed, 1])


def snr_noise_variance(signals, snr_db: float) -> float:
    """Noise variance giving ``snr_db`` relative to the batch-mean squared signal value."""
    power = float(np.mean(np.square(signals)))
    if not power > 0:
        raise DegenerateError("signals have zero power; SNR is undefined")
    return power / 10.0 ** (snr_db / 10.0)


def add_noise_snr(signals, snr_db: float, seed) -> np.ndarray:
    """Add i.i.d. Gaussian noise at the given SNR (in dB), measured over the whole batch."""
    signals = np.asarray(signals, dtype=float)
    var = snr_noise_variance(signals, snr_db)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return signals + np.sqrt(var) * rng.standard_normal(signals.shape)


def generate_filtered_signals(graph: Graph, theta: GroundTruthFilter, N: int,
                              snr_db: float | None = 10.0, seed: int = 0) -> SyntheticDataset:
    """White Gaussian signals passed through ``theta(L_S)`` and corrupted at ``snr_db``.

    Signals are independent, so the inputs are the indices ``0..N-1`` and the
    matching input kernel is the identity. The white draws and the noise use
    separate streams: changing ``snr_db`` only rescales the same noise draw.
    """
    if N < 1:
        raise ValidationError("need at least one signal")
    if not isinstance(theta, GroundTruthFilter):
        theta = GroundTruthFilter(theta)
    B = filter_matrix(theta.polynomial, graph.spectrum("scaled"))
    sig_rng, noise_rng = _streams(seed)
    clean = sig_rng.standard_normal((N, graph.num_nodes)) @ B
    Y, var = _corrupt(clean, snr_db, noise_rng)
    X = np.arange(N, dtype=float)[:, None]
    return SyntheticDataset(graph, X, Y, theta, snr_db, seed, var, None, clean)


def generate_wishart_dataset(graph: Graph, theta: GroundTruthFilter, N: int, seed: int = 0,
                             snr_db: float | None = 10.0) -> SyntheticDataset:
    """Signals coupled through an inverse-Wishart input covariance ``C``.

    ``C ~ InvWishart(df=N+2, scale=I)`` is N x N; the M columns of the N x M
    matrix ``Delta`` are draws from ``N(0, C)``; row ``i`` is filtered as
    ``theta(L_S) r_i``. The signal covariance is ``kron(C, BB^T)`` before noise.
    """
    if N < 2:
        raise ValidationError("need at least two signals")
    if not isinstance(theta, GroundTruthFilter):
        theta = GroundTruthFilter(theta)
    B = filter_matrix(theta.polynomial, graph.spectrum("scaled"))
    sig_rng, noise_rng = _streams(seed)
    for _ in range(_MAX_WISHART_DRAWS):
        C = np.atleast_2d(invwishart.rvs(df=N + 2, scale=np.eye(N), random_state=sig_rng))
        C = 0.5 * (C + C.T)
        try:
            chol = np.linalg.cholesky(C)
            break
        except np.linalg.LinAlgError:
            continue
    else:
        raise DegenerateError("could not draw a positive definite input covariance")
    delta = chol @ sig_rng.standard_normal((N, graph.num_nodes))
    clean = delta @ B
    Y, var = _corrupt(clean, snr_db, noise_rng)
    X = np.arange(N, dtype=float)[:, None]
    return SyntheticDataset(graph, X, Y, theta, snr_db, seed, var, C, clean)


def _corrupt(clean, snr_db, rng):
    if snr_db is None:
        return clean.copy(), 0.0
    var = snr_noise_variance(clean, snr_db)
    return clean + np.sqrt(var) * rng.standard_normal(clean.shape), var
