"""Mean-square stabilization of linear time-varying systems over multiplicative channels."""

from .builtins import BUILTIN_NAMES, builtin_system
from .channel import ChannelModel, draw, moments, sample_stream
from .exceptions import (
    ConfigError,
    DivergenceError,
    FitError,
    HorizonError,
    LTVMSSError,
    NumericalError,
    SynthesisError,
    ThresholdError,
)
from .limits import (
    LimitVerdict,
    critical_erasure_probability,
    critical_variance,
    growth_term,
    necessary_condition,
)
from .mcsim import (
    EnsembleStats,
    RateEstimate,
    analytic_ms_recursion,
    estimate_ms_rate,
    moment_map_radius,
    simulate_ensemble,
)
from .model import (
    SystemModel,
    antistability_margin,
    check_uniform_controllability,
    controllability_gramian,
    transition_matrix,
    validate_decomposition,
)
from .spectrum import SpectrumResult, lyapunov_spectrum, monodromy_spectrum
from .synthesis import (
    CertificateReport,
    GainSchedule,
    RiccatiSchedule,
    build_certificate,
    check_mss_certificate,
    optimal_gain,
    riccati_backward,
    synthesize,
)

__version__ = "0.1.0"
