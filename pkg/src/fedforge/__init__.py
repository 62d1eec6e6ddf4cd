"""Exact Fedosov quantization and dequantization on a single chart."""

from .dequantize import DequantizationResult, dequantize, source_target, xi_of_zeta, zeta_of_xi
from .fedosov import FedosovData, InvariantViolation, Verdict, compute_r, compute_r_classical, fedosov_data
from .geometry import PRESETS, ChartError, ChartGeometry, load_chart, parse_chart_json, preset
from .polyparse import PolyParseError, parse_poly
from .quantizer import StarSeries, UncertifiedOrder, kappa, star, tau, tau_classical, verify_natural
from .scalars import GaussianRational, I
from .series import EXACT, GradedSeries, SeriesError, VariableProfile, make_series, monomial
from .symbols import NaturalDiffOp, op_L, op_R, op_Z, reconstruct, sigma_symbol, zeta
from .weyl import WeylBundle

__version__ = "0.1.0"

__all__ = [
    "ChartError",
    "ChartGeometry",
    "DequantizationResult",
    "EXACT",
    "FedosovData",
    "GaussianRational",
    "GradedSeries",
    "I",
    "InvariantViolation",
    "NaturalDiffOp",
    "PRESETS",
    "PolyParseError",
    "SeriesError",
    "StarSeries",
    "UncertifiedOrder",
    "VariableProfile",
    "Verdict",
    "WeylBundle",
    "compute_r",
    "compute_r_classical",
    "dequantize",
    "fedosov_data",
    "kappa",
    "load_chart",
    "make_series",
    "monomial",
    "op_L",
    "op_R",
    "op_Z",
    "parse_chart_json",
    "parse_poly",
    "preset",
    "reconstruct",
    "sigma_symbol",
    "source_target",
    "star",
    "tau",
    "tau_classical",
    "verify_natural",
    "xi_of_zeta",
    "zeta",
    "zeta_of_xi",
]
