"""Manifold-attracted diffusion: extended-score inference at toy scale."""

from .models import (
    DegenerateGaussian,
    DiracMixture,
    GaussianMixture,
    ProductModel,
    RadialGaussianMixture,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
)
from .nnscore import (
    LearnedScoreOracle,
    MlpDenoiser,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    score_from_denoiser,
    train_denoiser,
)
from .sampler import (
    AffineReference,
    CircleReference,
    DivergenceError,
    MeansReference,
    TimeSchedule,
    Trajectory,
    batch_summary,
    edm_schedule,
    run_batch,
    sample_mad,
    sample_standard,
    trajectory_metrics,
)
from .xscore import (
    AnalyticScoreOracle,
    CorrectionSingularError,
    DiracScoreOracle,
    MadParams,
    ScoreOracle,
    correction_factor,
    fd_sigma_derivative,
    h_gamma,
    solve_gamma,
)

__version__ = "0.1.0"

__all__ = [
    "AffineReference",
    "AnalyticScoreOracle",
    "CircleReference",
    "CorrectionSingularError",
    "DegenerateGaussian",
    "DiracMixture",
    "DiracScoreOracle",
    "DivergenceError",
    "GaussianMixture",
    "LearnedScoreOracle",
    "MadParams",
    "MeansReference",
    "MlpDenoiser",
    "ProductModel",
    "RadialGaussianMixture",
    "ScoreOracle",
    "TimeSchedule",
    "TrainConfig",
    "Trajectory",
    "batch_summary",
    "correction_factor",
    "edm_schedule",
    "fd_sigma_derivative",
    "h_gamma",
    "load_checkpoint",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "run_batch",
    "sample_mad",
    "sample_standard",
    "save_checkpoint",
    "save_model",
    "score_from_denoiser",
    "solve_gamma",
    "trajectory_metrics",
    "train_denoiser",
]
