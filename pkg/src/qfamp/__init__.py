"""Coherent feedback amplification of phase-preserving linear quantum amplifiers."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DegeneracyError,
    DomainError,
    ExperimentError,
    NumericError,
    ParameterError,
    PoleEvaluationError,
    QFAError,
    RangeError,
)
from .tfcore import ComplexPoly, RationalFunction, RationalMatrix, poly_roots, rf_arith, rf_eval  # noqa: E402
from .models import (  # noqa: E402
    ControllerModel,
    PlantModel,
    build_beam_splitter,
    build_detuned_ndpa,
    build_ndpa,
    check_scattering_constraints,
    passive_controller,
)
from .interconnect import (  # noqa: E402
    ClosedLoopSystem,
    FeedbackLoopConfig,
    classical_feedback_gain,
    close_feedback,
    close_ideal_feedback,
    close_lossy_feedback,
    closed_form_detuned_fb,
    phase_conjugating_gain,
    port_elimination_response,
)
from .analysis import (  # noqa: E402
    GainCurve,
    NoiseReport,
    StabilityVerdict,
    added_noise,
    detuned_stability_threshold,
    effective_bandwidth,
    first_order_gain_fluctuation,
    gain_profile,
    loop_gain_bode,
    sensitivity_bound,
    stability,
)
