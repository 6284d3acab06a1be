"""Measures on the circle under multiplier random walks: spectra, additive
combinatorics of large Fourier coefficients, granulation and decomposition."""

from .decompose import (BootstrapTrace, DecompositionResult, ParamSet, bootstrap_diagnostic,
                        decompose, extract_granules_for_coefficient,
                        final_bootstrap_diagnostic, initial_dimension_report)
from .errors import (ExtractionFailed, HypothesisError, InternalAssertionError,
                     RejectedInputError, TorusError)
from .granulation import GranuleFamily, granulate
from .measure import GridMeasure, Spectrum, make_measure, spectrum, walk_power, walk_step
from .multipliers import MultiplierSet, generate, regularity_constant

__all__ = [
    "BootstrapTrace", "DecompositionResult", "ExtractionFailed", "GranuleFamily", "GridMeasure",
    "HypothesisError", "InternalAssertionError", "MultiplierSet", "ParamSet",
    "RejectedInputError", "Spectrum", "TorusError", "bootstrap_diagnostic", "decompose",
    "extract_granules_for_coefficient", "final_bootstrap_diagnostic", "generate", "granulate",
    "initial_dimension_report", "make_measure", "regularity_constant", "spectrum",
    "walk_power", "walk_step",
]

__version__ = "0.1.0"
