"""Automorphism-ensemble SC decoding of polar and Reed-Muller codes.

Subpackages follow the processing chain: codes (construction/encoding),
sc (the SC kernel with path metric and abort), autos (affine code
automorphisms), ensemble (AE/DAE/PDAE decoders and oracle statistics),
thresholds (stopping-threshold optimization), sim (AWGN Monte Carlo),
and cli (batch experiment commands).
"""

from .codes import CodeSpec, ConstructionError, encode, load_info_set
from .sc import ScDecoder, ScOutcome, available_backends, default_backend, fg_fraction

__all__ = [
    "CodeSpec",
    "ConstructionError",
    "encode",
    "load_info_set",
    "ScDecoder",
    "ScOutcome",
    "available_backends",
    "default_backend",
    "fg_fraction",
]

__version__ = "0.1.0"
