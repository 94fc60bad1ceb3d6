"""Pressure and flow reconstruction on water networks modelled as cell complexes."""

__version__ = "0.1.0"

from .errors import (FormatError, NumericalError, ParseError, RecoveryError,  # noqa: E402
                     StructuralError, WdnError)
from .hydraulics import HeadLossModel, HydraulicState, solve_steady_state  # noqa: E402
from .network import Network, generate_synthetic, parse_inp, read_inp  # noqa: E402
from .recon import (ScaConfig, g_value_grad, nmse, reconstruct_flow,  # noqa: E402
                    sca_reconstruct_pressure)
from .sampling import SamplingSet, interpolate, maxdet_place  # noqa: E402
from .sparsify import sparse_support  # noqa: E402
from .spectral import SpectralBasis, eig_sym, hodge_decompose  # noqa: E402
from .topology import CellComplex, build_b1, build_b2, build_complex  # noqa: E402

__all__ = [
    "CellComplex", "FormatError", "HeadLossModel", "HydraulicState", "Network",
    "NumericalError", "ParseError", "RecoveryError", "SamplingSet", "ScaConfig",
    "SpectralBasis", "StructuralError", "WdnError", "build_b1", "build_b2", "build_complex",
    "eig_sym", "g_value_grad", "generate_synthetic", "hodge_decompose", "interpolate",
    "maxdet_place", "nmse", "parse_inp", "read_inp", "reconstruct_flow",
    "sca_reconstruct_pressure", "solve_steady_state", "sparse_support",
]
