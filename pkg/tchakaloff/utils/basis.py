"""
Graded monomial bases and the evaluation matrices built on them.

Two orderings are used throughout the package:

    real     t^i, |i| <= m, graded by total degree, lexicographically
             descending inside a degree block: 1, x, y, x^2, xy, y^2, ...
    complex  zbar^i z^j, i + j <= n, graded by i + j, then i ascending:
             1, Z, Zbar, Z^2, Zbar Z, Zbar^2, ...

Both are prefix-consistent, so the degree-(m-1) basis is always the leading
block of the degree-m basis. Moment matrices and flatness checks rely on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

MultiIndex = Tuple[int, ...]
Pair = Tuple[int, int]

CANCELLATION_TOL = 1e-13


def _compositions(total: int, parts: int) -> Iterator[MultiIndex]:
    """Yield exponent tuples of length `parts` summing to `total`, first exponent descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def dim_real(d: int, m: int) -> int:
    """N_{m,d}: number of monomials of total degree <= m in d variables."""
    return comb(m + d, d)


def dim_complex(n: int) -> int:
    """Number of pairs (i, j) with i + j <= n."""
    return (n + 1) * (n + 2) // 2


@dataclass(frozen=True)
class RealBasis:
    d: int
    m: int
    indices: Tuple[MultiIndex, ...]
    _position: Dict[MultiIndex, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_position", {idx: k for k, idx in enumerate(self.indices)})

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __getitem__(self, k: int) -> MultiIndex:
        return self.indices[k]

    def position(self, index: MultiIndex) -> int:
        """Row of `index` in basis order. Raises KeyError if absent."""
        return self._position[tuple(index)]

    def prefix(self, degree: int) -> int:
        """Length of the leading block holding every monomial of degree <= `degree`."""
        return dim_real(self.d, min(degree, self.m))


@dataclass(frozen=True)
class ComplexPairBasis:
    n: int
    pairs: Tuple[Pair, ...]
    _position: Dict[Pair, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_position", {p: k for k, p in enumerate(self.pairs)})

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, k: int) -> Pair:
        return self.pairs[k]

    def position(self, pair: Pair) -> int:
        return self._position[tuple(pair)]

    def prefix(self, degree: int) -> int:
        return dim_complex(min(degree, self.n))

    def label(self, pair: Pair) -> str:
        """Column label as printed in moment-matrix reports, e.g. 'Zbar^2 Z'."""
        i, j = pair
        parts = []
        if i:
            parts.append("Zbar" if i == 1 else f"Zbar^{i}")
        if j:
            parts.append("Z" if j == 1 else f"Z^{j}")
        return " ".join(parts) or "1"


def enumerate_real(d: int, m: int) -> RealBasis:
    """
    Graded-lexicographic basis of R_{m,d}[t].

    :param d: dimension, >= 1
    :param m: maximal total degree, >= 0
    :return: RealBasis of length C(m + d, d)
    """
    if d < 1:
        raise ValueError(f"invalid dimension d={d}; must be >= 1")
    if m < 0:
        raise ValueError(f"invalid degree m={m}; must be >= 0")
    indices = tuple(idx for t in range(m + 1) for idx in _compositions(t, d))
    return RealBasis(d=d, m=m, indices=indices)


def enumerate_complex(n: int) -> ComplexPairBasis:
    """Pairs (i, j) labelling zbar^i z^j, i + j <= n, in moment-matrix column order."""
    if n < 0:
        raise ValueError(f"invalid degree n={n}; must be >= 0")
    pairs = tuple((i, t - i) for t in range(n + 1) for i in range(t + 1))
    return ComplexPairBasis(n=n, pairs=pairs)


def _power_table(values: np.ndarray, top: int) -> np.ndarray:
    """Rows 0..top hold values**e, built by repeated multiplication."""
    table = np.empty((top + 1,) + values.shape, dtype=values.dtype)
    table[0] = 1
    for e in range(1, top + 1):
        table[e] = table[e - 1] * values
    return table


def as_nodes(nodes, d: int) -> np.ndarray:
    """Coerce a list of points (or a 1-D array when d == 1) to an (N, d) float array."""
    arr = np.asarray(nodes, dtype=float)
    if arr.ndim == 1 and d == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim == 1 and arr.size == d:
        arr = arr.reshape(1, d)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ValueError(f"node dimension mismatch: expected points in R^{d}, got shape {arr.shape}")
    return arr


def vandermonde(basis: RealBasis, nodes) -> np.ndarray:
    """
    Evaluation matrix: entry (k, l) is the k-th basis monomial at the l-th node.

    :param basis: RealBasis
    :param nodes: points in R^d, shape (N, d)
    :return: float array of shape (len(basis), N)
    """
    pts = as_nodes(nodes, basis.d)
    tables = [_power_table(pts[:, c], basis.m) for c in range(basis.d)]
    out = np.empty((len(basis), pts.shape[0]))
    for row, idx in enumerate(basis.indices):
        col = np.ones(pts.shape[0])
        for c, e in enumerate(idx):
            if e:
                col = col * tables[c][e]
        out[row] = col
    return out


def complex_vandermonde(basis: ComplexPairBasis, points) -> np.ndarray:
    """Entry (k, l) is conj(z_l)^i z_l^j for the k-th pair (i, j)."""
    z = np.asarray(points, dtype=complex).reshape(-1)
    zp = _power_table(z, basis.n)
    zbp = _power_table(np.conj(z), basis.n)
    out = np.empty((len(basis), z.size), dtype=complex)
    for row, (i, j) in enumerate(basis.pairs):
        out[row] = zbp[i] * zp[j]
    return out


def complex_real_parts(basis: ComplexPairBasis, values) -> np.ndarray:
    """
    Independent real parts of data indexed by `basis` along the first axis.

    Entry (j, i) is the conjugate of entry (i, j) and entry (i, i) is real, so
    only Re of i <= j and Im of i < j are kept: exactly len(basis) entries.
    """
    values = np.asarray(values, dtype=complex)
    upper, strict = _real_layout(basis)
    return np.concatenate([values[upper].real, values[strict].imag], axis=0)


def _real_layout(basis: ComplexPairBasis):
    upper = [k for k, (i, j) in enumerate(basis.pairs) if i <= j]
    strict = [k for k, (i, j) in enumerate(basis.pairs) if i < j]
    return upper, strict


def complex_real_rows(basis: ComplexPairBasis, points) -> np.ndarray:
    """
    Real constraint rows equivalent to the complex Vandermonde, one per basis pair.

    Entries below CANCELLATION_TOL * |zbar^i z^j| are rounding left over from
    cancellation (Im z^3 at a cube root of unity) and are set to 0.
    """
    W = complex_vandermonde(basis, points)
    rows = complex_real_parts(basis, W)
    rows[np.abs(rows) <= CANCELLATION_TOL * complex_real_scale(basis, W, rowwise=False)] = 0.0
    return rows


def complex_real_scale(basis: ComplexPairBasis, W: np.ndarray, rowwise: bool = True):
    """
    Moduli |zbar^i z^j| in the complex_real_rows layout.

    With rowwise, the Euclidean norm of each row of moduli: a scale for the
    real rows that does not blow up a row whose entries nearly cancel.
    """
    upper, strict = _real_layout(basis)
    mags = np.abs(np.asarray(W))
    mags = np.concatenate([mags[upper], mags[strict]], axis=0)
    return np.linalg.norm(mags, axis=1) if rowwise else mags


def rank_threshold(shape, sigma_max: float, rtol: Optional[float] = None) -> float:
    """
    Singular values above this count towards the rank.

    Default is (largest dimension) * eps * sigma_max; `rtol` replaces the
    (largest dimension) * eps factor when given.
    """
    factor = max(shape) * np.finfo(float).eps if rtol is None else rtol
    return factor * sigma_max


def numerical_rank(
    matrix: np.ndarray, rtol: Optional[float] = None, threshold: Optional[float] = None
) -> int:
    """
    Count of singular values above the rank threshold.

    :param rtol: relative tolerance replacing the default size*eps factor
    :param threshold: absolute cut-off; overrides rtol when given
    """
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        return 0
    s = np.linalg.svd(matrix, compute_uv=False)
    if threshold is None:
        threshold = rank_threshold(matrix.shape, s[0] if s.size else 0.0, rtol)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > threshold))


def equilibrate_rows(matrix: np.ndarray) -> np.ndarray:
    """Scale every nonzero row to unit Euclidean norm and drop all-zero rows."""
    norms = np.linalg.norm(matrix, axis=1)
    keep = norms > 0
    return matrix[keep] / norms[keep, None]


def norm_power_coefficients(d: int, m: int) -> Dict[MultiIndex, int]:
    """
    Expansion of ||x||^{2m} = (x_1^2 + ... + x_d^2)^m in monomials of degree 2m.

    Multinomial theorem: the coefficient of x^{2a} is m! / (a_1! ... a_d!).
    """
    if d < 1 or m < 0:
        raise ValueError(f"invalid arguments d={d}, m={m}")
    out: Dict[MultiIndex, int] = {}
    for a in _compositions(m, d):
        coef = factorial(m)
        for e in a:
            coef //= factorial(e)
        out[tuple(2 * e for e in a)] = coef
    return out
