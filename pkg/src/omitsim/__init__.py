"""Pump-probe response of a cavity optomechanical system: the optomechanical
analog of electromagnetically induced transparency."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BistabilityError,
    ConfigError,
    ConvergenceError,
    DegeneratePoleError,
    IntegrationError,
    NumericalError,
    OmitError,
    PoleProximityError,
    ResolutionError,
    ThresholdBreach,
    UnstableOperatingPointError,
    ValidationError,
    WindowError,
)
from .model import (  # noqa: E402
    DriveParams,
    FixedDelta,
    OperatingPoint,
    Regime,
    SelfConsistent,
    SystemParams,
    bisect_regime_flip,
    coupling_constant,
    critical_power,
    field_amplitude_from_power,
    experimental_drive,
    experimental_system,
    scaled_drive,
    scaled_system,
    solve_operating_point,
    stability_check,
)
from .response import (  # noqa: E402
    Classification,
    ComplexResponse,
    DipMetrics,
    Evaluator,
    PoleDecomposition,
    Spectrum,
    classify_regime,
    compute_spectrum,
    dip_metrics,
    poles,
    quadratures,
    residues,
    response_exact,
    response_no_coupling,
    response_sideband,
)
