"""Polynomial threshold function laboratory.

Polynomials over Gaussian and hypercube inputs, Hermite expansions, tensor
tools, k-wise independent families, pseudorandom generators for PTFs and
numerical checks of their analytic properties.
"""
from .poly import MultilinearPoly, Poly, compose, from_json, multilinearize, random_poly, restrict, to_json
from .hermite import HermiteExpansion, expand, reconstruct
from .kwise import KWiseFamily, Seed
from .prg import BernoulliPrgSpec, GaussianPrgSpec

__version__ = "0.1.0"

__all__ = [
    "Poly", "MultilinearPoly", "compose", "from_json", "to_json", "multilinearize", "random_poly",
    "restrict", "HermiteExpansion", "expand", "reconstruct", "KWiseFamily", "Seed",
    "BernoulliPrgSpec", "GaussianPrgSpec", "__version__",
]
