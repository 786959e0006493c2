"""Shuffled linear regression: instances, recovery, thresholds and simulation."""

from .lap import AssignmentResult, solve_exact, solve_mp
from .model import (
    BlockDiagonal,
    DesignDistribution,
    Dimensions,
    DomainError,
    ExplicitSpectrum,
    GaussianIID,
    Identity,
    Instance,
    NoiseSpec,
    ScaledIdentity,
    generate_instance,
)
from .recovery import MP, NONORACLE, ORACLE, Exact, find_threshold, full_recovery_error_rate, recover
from .theory import Spectrum, oracle_snr_threshold, oracle_snr_threshold_gaussian

__version__ = "0.1.0"
