"""Regime-switching autoregressive time series with partially observed states.

A K-state Markov chain picks, at every time-step, which of K linear
autoregressions generates the next observation.  The chain's state may
be observed at some steps and hidden at others; every algorithm here
(smoothing, EM training, decoding, forecasting) conditions on whatever
labels exist.
"""

from .decode import DecodedPath, brute_force_decode, viterbi
from .em import (
    EmConfig,
    FitReport,
    em_fit,
    em_init,
    fit_g0,
    m_step_s,
    m_step_x,
    m_step_x_numeric,
    q_x,
    train,
)
from .errors import (
    AllSequencesZeroLikelihood,
    DimensionMismatch,
    EmptyInput,
    InitFailed,
    InvalidConfig,
    InvalidModel,
    NoAdmissiblePath,
    NumericFailure,
    PhmclarError,
    ShapeMismatch,
    SingularDesignWarning,
    StarvedStateWarning,
    TooLarge,
    ZeroLabelMass,
    ZeroLikelihood,
)
from .experiments import (
    ForecastExperimentConfig,
    InferenceExperimentConfig,
    NoiseSpec,
    benchmark_generator,
    corrupt_labels,
    mask_labels,
    mpe,
    rmse_at_h,
    run_forecast_experiment,
    run_inference_experiment,
)
from .forecast import ForecastResult, forecast, predictive_state_weights
from .model import (
    Hyper,
    InitialLaw,
    LabeledSequence,
    LabelSet,
    LarParams,
    ModelParams,
    PhmcParams,
    emission_logdensity,
    emission_mean,
    log_emission_matrix,
    simulate,
    validate_model,
)
from .smoothing import (
    Posteriors,
    ScaledPass,
    backward_beta,
    backward_tau,
    brute_force_posterior,
    forward_alpha,
    scaled_pass,
    smooth,
)

__version__ = "0.1.0"

__all__ = [
    "AllSequencesZeroLikelihood",
    "DecodedPath",
    "DimensionMismatch",
    "EmConfig",
    "EmptyInput",
    "FitReport",
    "ForecastExperimentConfig",
    "ForecastResult",
    "Hyper",
    "InferenceExperimentConfig",
    "InitFailed",
    "InitialLaw",
    "InvalidConfig",
    "InvalidModel",
    "LabelSet",
    "LabeledSequence",
    "LarParams",
    "ModelParams",
    "NoAdmissiblePath",
    "NoiseSpec",
    "NumericFailure",
    "PhmcParams",
    "PhmclarError",
    "Posteriors",
    "ScaledPass",
    "ShapeMismatch",
    "SingularDesignWarning",
    "StarvedStateWarning",
    "TooLarge",
    "ZeroLabelMass",
    "ZeroLikelihood",
    "backward_beta",
    "backward_tau",
    "benchmark_generator",
    "brute_force_decode",
    "brute_force_posterior",
    "corrupt_labels",
    "em_fit",
    "em_init",
    "emission_logdensity",
    "emission_mean",
    "fit_g0",
    "forecast",
    "forward_alpha",
    "log_emission_matrix",
    "m_step_s",
    "m_step_x",
    "m_step_x_numeric",
    "mask_labels",
    "mpe",
    "predictive_state_weights",
    "q_x",
    "rmse_at_h",
    "run_forecast_experiment",
    "run_inference_experiment",
    "scaled_pass",
    "simulate",
    "smooth",
    "train",
    "validate_model",
    "viterbi",
]
