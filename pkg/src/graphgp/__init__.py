"""Multi-output Gaussian processes on graph signals with learned polynomial spectra."""

__version__ = "0.1.0"

from .errors import (
    DegenerateError,
    DivergenceError,
    EigensolverError,
    FileFormatError,
    GraphGPError,
    NumericalError,
    ValidationError,
)
from .graph import (
    Graph,
    SpectralDecomposition,
    eigendecompose,
    graph_fourier_transform,
    knn_graph,
    laplacian,
    random_graph,
    threshold_graph,
)
from .kernels import (
    BaselineGraphKernel,
    InputKernel,
    PolynomialGraphFilter,
    baseline_output_gram,
    evaluate_spectrum,
    filter_matrix,
    input_kernel_matrix,
    scale_polynomial,
)
from .gp import (
    Hyperparameters,
    Posterior,
    TrainingSet,
    full_covariance,
    icm_gram_oracle,
    kron_solve_and_logdet,
    log_marginal_likelihood,
    posterior_predict,
    test_log_likelihood,
)
from .learner import (
    FitReport,
    OptimizerConfig,
    constrained_fit,
    fit_baseline,
    fit_polynomial,
    initialize_hyperparameters,
    nll_gradient,
    unconstrained_fit,
)
from .synth import (
    GroundTruthFilter,
    SyntheticDataset,
    add_noise_snr,
    generate_filtered_signals,
    generate_wishart_dataset,
)
from .io import ModelArtifact, load_model, save_model

__all__ = [
    "__version__",
    "BaselineGraphKernel",
    "DegenerateError",
    "DivergenceError",
    "EigensolverError",
    "FileFormatError",
    "FitReport",
    "Graph",
    "GraphGPError",
    "GroundTruthFilter",
    "Hyperparameters",
    "InputKernel",
    "ModelArtifact",
    "NumericalError",
    "OptimizerConfig",
    "PolynomialGraphFilter",
    "Posterior",
    "SpectralDecomposition",
    "SyntheticDataset",
    "TrainingSet",
    "ValidationError",
    "add_noise_snr",
    "baseline_output_gram",
    "constrained_fit",
    "eigendecompose",
    "evaluate_spectrum",
    "filter_matrix",
    "fit_baseline",
    "fit_polynomial",
    "full_covariance",
    "generate_filtered_signals",
    "generate_wishart_dataset",
    "graph_fourier_transform",
    "icm_gram_oracle",
    "initialize_hyperparameters",
    "input_kernel_matrix",
    "knn_graph",
    "kron_solve_and_logdet",
    "laplacian",
    "load_model",
    "log_marginal_likelihood",
    "nll_gradient",
    "posterior_predict",
    "random_graph",
    "save_model",
    "scale_polynomial",
    "test_log_likelihood",
    "threshold_graph",
    "unconstrained_fit",
]
