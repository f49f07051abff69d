from .utils import *
from .basis import (
    RealBasis,
    ComplexPairBasis,
    enumerate_real,
    enumerate_complex,
    vandermonde,
    complex_vandermonde,
    complex_real_parts,
    complex_real_rows,
    complex_real_scale,
    numerical_rank,
    dim_real,
    dim_complex,
)

__all__ = [
    "fsum_rows",
    "cluster_points",
    "relative_residuals",
    "to_jsonable",
    "RealBasis",
    "ComplexPairBasis",
    "enumerate_real",
    "enumerate_complex",
    "vandermonde",
    "complex_vandermonde",
    "complex_real_parts",
    "complex_real_rows",
    "complex_real_scale",
    "numerical_rank",
    "dim_real",
    "dim_complex",
]
