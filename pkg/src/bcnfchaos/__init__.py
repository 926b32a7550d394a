"""Robust-chaos certificates for the two-dimensional border-collision
normal form, with a power-converter case study."""

from .bcnf import BcnfParams, PwlCoeffs, check_conditions, eval_g, eval_g_inverse, reduce_to_bcnf
from .certify import ChaosCertificate, CertifyOptions, certify
from .cone import Cone, find_cone, matrix_family, verify_cone
from .converter import ConverterParams, converter_bcnf_params, omega_bcb, strobo_map
from .partition import partition_profile, preimage_lines
from .region import ConvexPolygon, RegionUnion, compute_pq_bounds, invariant_closure, verify_trapping

__all__ = [
    "BcnfParams", "PwlCoeffs", "check_conditions", "eval_g", "eval_g_inverse", "reduce_to_bcnf",
    "ChaosCertificate", "CertifyOptions", "certify",
    "Cone", "find_cone", "matrix_family", "verify_cone",
    "ConverterParams", "converter_bcnf_params", "omega_bcb", "strobo_map",
    "partition_profile", "preimage_lines",
    "ConvexPolygon", "RegionUnion", "compute_pq_bounds", "invariant_closure", "verify_trapping",
]
