"""Large-deviations error exponents of quadratic detectors for Gaussian signals."""

from .cgf import (
    CgfPair,
    DetectorModel,
    cgf_banded,
    cgf_optimal,
    cgf_simple_quadratic,
    detector_cgf,
    finite_cgf,
    g_m,
)
from .errors import (
    ContractError,
    DomainError,
    NumericalError,
    ResourceLimitError,
    UndefinedAREError,
)
from .exponent import ExponentReport, are, are_sweep, exponents, rate
from .spectra import NoiseModel, Spectrum

__version__ = "0.1.0"
