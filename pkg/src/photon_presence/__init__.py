"""Desk-scale simulation of the six-port interferometer presence experiment.

Closed-form detection probabilities, seeded Monte Carlo photon counting,
maximum-likelihood modulation-frequency estimation, the two-window
information/presence measure, and an exact unitary network oracle.
"""

from .params import ExperimentParams, ModelKind, RunConfig, ConfigError
from .models import (
    ClampWarning,
    p_detect_ba,
    p_detect_given_L1,
    p_detect_given_L4,
    p_window,
    simplified_probs,
)
from .montecarlo import DetectionSeries, sample_counts, expected_counts
from .estimator import (
    EstimationTrace,
    EnsembleStats,
    FrequencyEstimator,
    log_likelihood,
    estimate_omega,
    estimation_trace,
    convergence_step,
    n_post,
    ensemble_stats,
)
from .information import (
    TwoWindowSetup,
    InfoTable,
    prob_error,
    n_min,
    information,
    presence_measure,
    build_table1,
)
from .network import (
    NetworkSpec,
    build_network,
    build_simplified_network,
    propagate,
    exact_p_detect,
    conditional_p_detect,
    weak_value,
    verify_expansion,
)

__version__ = "0.1.0"
