"""Leverage-optimized random Fourier features for kernel classification.

The package splits into feature maps and kernel estimators (``features``),
a mergeable count store over a dyadic grid (``store``), ridge leverage
scores and the optimized feature sampler (``leverage``), the streaming
SGD learner (``sgd``), synthetic task generators and experiment sweeps
(``tasks``), plus a command line front end (``cli``).
"""

from .errors import (
    CertificationError,
    ConfigError,
    OutOfBoxError,
    SamplerAbort,
    StreamExhausted,
)
from .features import (
    FeatureSet,
    GaussianKernel,
    RealFeatureParams,
    eval_kernel,
    feature_pair,
    feature_real,
    gram,
    kernel_importance_estimate,
    kernel_mc_estimate,
    load_feature_set,
    sample_tau,
    save_feature_set,
)
from .leverage import (
    SamplerDiagnostics,
    SpectralModel,
    build_spectral_model,
    degree_of_freedom,
    expected_acceptance,
    leverage_score,
    q_max_bound,
    sample_conventional,
    sample_optimized_grid,
    sample_optimized_rejection,
    spectrum_of,
    tabulate_optimized_density,
    unnormalized_leverage,
)
from .sgd import (
    Classifier,
    TrainConfig,
    TrainTrace,
    feature_matrix,
    grad_estimate,
    load_classifier,
    predict,
    project_ball,
    regularized_empirical_loss,
    ridge_oracle,
    save_classifier,
    theorem_hyperparams,
    theorem_lambda,
    train,
)
from .store import CountTree, GridSpec, build_tree
from .tasks import (
    CellConfig,
    MetricsRecord,
    SphereDist,
    SubgaussianDist,
    SyntheticTask,
    bayes_classifier,
    certify_task,
    excess_error,
    f_star,
    fit_rescale,
    gen_inputs,
    labeled_stream,
    load_task,
    make_sphere_task,
    make_subgaussian_task,
    run_cell,
    sample_label,
    save_task,
    spectrum_report,
    sweep_error_vs_M,
    sweep_error_vs_N,
)

__version__ = "0.1.0"

__all__ = [
    "CertificationError",
    "ConfigError",
    "OutOfBoxError",
    "SamplerAbort",
    "StreamExhausted",
    "FeatureSet",
    "GaussianKernel",
    "RealFeatureParams",
    "eval_kernel",
    "feature_pair",
    "feature_real",
    "gram",
    "kernel_importance_estimate",
    "kernel_mc_estimate",
    "load_feature_set",
    "sample_tau",
    "save_feature_set",
    "SamplerDiagnostics",
    "SpectralModel",
    "build_spectral_model",
    "degree_of_freedom",
    "expected_acceptance",
    "leverage_score",
    "q_max_bound",
    "sample_conventional",
    "sample_optimized_grid",
    "sample_optimized_rejection",
    "spectrum_of",
    "tabulate_optimized_density",
    "unnormalized_leverage",
    "Classifier",
    "TrainConfig",
    "TrainTrace",
    "feature_matrix",
    "grad_estimate",
    "load_classifier",
    "predict",
    "project_ball",
    "regularized_empirical_loss",
    "ridge_oracle",
    "save_classifier",
    "theorem_hyperparams",
    "theorem_lambda",
    "train",
    "CountTree",
    "GridSpec",
    "build_tree",
    "CellConfig",
    "MetricsRecord",
    "SphereDist",
    "SubgaussianDist",
    "SyntheticTask",
    "bayes_classifier",
    "certify_task",
    "excess_error",
    "f_star",
    "fit_rescale",
    "gen_inputs",
    "labeled_stream",
    "load_task",
    "make_sphere_task",
    "make_subgaussian_task",
    "run_cell",
    "sample_label",
    "save_task",
    "spectrum_report",
    "sweep_error_vs_M",
    "sweep_error_vs_N",
    "__version__",
]
