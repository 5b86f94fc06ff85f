"""Finite-size BB84 post-processing toolkit.

Submodules:
    gf2        bit strings and the two Toeplitz hashing families
    bounds     closed-form statistical bounds and their exact oracles
    accounting failure-probability aggregation and composable security
    optimizer  operating-point optimization and curve generation
    protocol   the two-party distillation pipeline and its transports
    cli        command-line front end
"""

from qkdd.gf2 import (
    BitString,
    LfsrToeplitzSpec,
    ToeplitzSpec,
    derive_lfsr_spec,
    lfsr_toeplitz_tag,
    one_time_pad,
    toeplitz_apply,
)

__all__ = [
    "BitString",
    "ToeplitzSpec",
    "LfsrToeplitzSpec",
    "toeplitz_apply",
    "lfsr_toeplitz_tag",
    "derive_lfsr_spec",
    "one_time_pad",
]

__version__ = "0.1.0"
