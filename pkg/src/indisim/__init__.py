"""Indistinguishability-limited qubit transfer between photons: simulation and analysis."""

__version__ = "0.1.0"

from .core import NumericalError, density_matrix, partial_trace, tensor, uhlmann_fidelity
from .environment import (
    EnvState,
    build_flip,
    flip_decompose,
    flip_expectation,
    product_with_overlap,
    singlet,
    symmetric_bell,
    twirl,
    werner,
    witness_entanglement,
)
from .protocol import (
    erase,
    make_source,
    make_target,
    measure_and_feedforward,
    partial_exchange,
    transfer_analytic,
)
from .spectral import FilterShape, SpectralGrid, build_spdc, hom_scan, spdc_flip_expectation, spdc_to_env
from .tomography import CountRecord, analyze, mle_reconstruct, simulate_counts

__all__ = [
    "__version__",
    "NumericalError",
    "density_matrix",
    "partial_trace",
    "tensor",
    "uhlmann_fidelity",
    "EnvState",
    "build_flip",
    "flip_decompose",
    "flip_expectation",
    "product_with_overlap",
    "singlet",
    "symmetric_bell",
    "twirl",
    "werner",
    "witness_entanglement",
    "erase",
    "make_source",
    "make_target",
    "measure_and_feedforward",
    "partial_exchange",
    "transfer_analytic",
    "FilterShape",
    "SpectralGrid",
    "build_spdc",
    "hom_scan",
    "spdc_flip_expectation",
    "spdc_to_env",
    "CountRecord",
    "analyze",
    "mle_reconstruct",
    "simulate_counts",
]
