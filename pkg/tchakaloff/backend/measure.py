"""
Discrete measures and their truncated moment data.

A DiscreteMeasure is a finite list of atoms (node in R^d, weight > 0). It
doubles as a quadrature rule. For d == 2 a node (x, y) is read as the
complex point x + iy wherever complex moments are needed.

File formats:

    measure CSV   header x1,...,xd,w then one atom per row
    moment JSON   {"kind": "real", "d": .., "m": .., "beta": [...],
                   "norm_degree": n, "gamma_norm": G}            (norm optional)
                  {"kind": "complex", "n": .., "gamma": [{"i": .., "j": ..,
                   "re": .., "im": ..}, ...]}                     (pairs i <= j)

For the complex kind "n" is the total degree of the data, i.e. the largest
i + j present; moment-matrix analysis needs it even.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, TextIO, Tuple, Union

import numpy as np

from tchakaloff.utils.basis import (
    RealBasis,
    complex_vandermonde,
    dim_real,
    enumerate_complex,
    enumerate_real,
    equilibrate_rows,
    numerical_rank,
    vandermonde,
)
from tchakaloff.utils.utils import cluster_points, fsum_rows

logger = logging.getLogger(__name__)

MERGE_RADIUS = 1e-12
SYMMETRY_TOL = 1e-12

PathOrStream = Union[str, os.PathLike, TextIO]


class MeasureValidationError(ValueError):
    """Malformed atoms or moment data. The message names the row or index."""


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """
    Atoms sum_k w_k delta_{x_k}.

    Arrays are copied on construction and made read-only. Use from_atoms()
    to merge coincident nodes; the plain constructor only validates.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if nodes.ndim == 1:
            nodes = nodes.reshape(-1, 1) if nodes.size == weights.size else nodes.reshape(1, -1)
        if nodes.ndim != 2 or nodes.shape[1] < 1:
            raise MeasureValidationError(f"nodes must be an (N, d) array, got shape {nodes.shape}")
        if nodes.shape[0] != weights.size:
            raise MeasureValidationError(
                f"{nodes.shape[0]} nodes but {weights.size} weights; counts must match"
            )
        if weights.size == 0:
            raise MeasureValidationError("a measure needs at least one atom")
        _check_atoms(nodes, weights)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_atoms(cls, nodes, weights, merge: bool = True) -> "DiscreteMeasure":
        """
        Build a measure, merging nodes closer than 1e-12 * (1 + max |coordinate|).

        Merged atoms keep the node of the smallest row and the summed weight.
        """
        weights = np.asarray(weights, dtype=float).reshape(-1)
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes.reshape(-1, 1) if nodes.size == weights.size else nodes.reshape(1, -1)
        mu = cls(nodes, weights)
        return mu.merged() if merge else mu

    @classmethod
    def from_complex(cls, points, weights, merge: bool = True) -> "DiscreteMeasure":
        """Measure on C stored as d = 2 nodes (Re z, Im z)."""
        z = np.asarray(points, dtype=complex).reshape(-1)
        return cls.from_atoms(np.column_stack([z.real, z.imag]), weights, merge=merge)

    def merged(self) -> "DiscreteMeasure":
        scale = 1.0 + float(np.max(np.abs(self.nodes)))
        labels = cluster_points(self.nodes, MERGE_RADIUS * scale)
        reps = np.unique(labels)
        if reps.size == self.size:
            return self
        weights = np.array([math.fsum(self.weights[labels == r]) for r in reps])
        logger.debug(f"Merged {self.size - reps.size} coincident atom(s)")
        return DiscreteMeasure(self.nodes[reps], weights)

    def restrict(self, indices: Iterable[int], weights=None) -> "DiscreteMeasure":
        """Sub-measure on the given rows; nodes are copied bit for bit."""
        idx = np.asarray(list(indices), dtype=int)
        w = self.weights[idx] if weights is None else weights
        return DiscreteMeasure(self.nodes[idx], w)

    @property
    def d(self) -> int:
        return int(self.nodes.shape[1])

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def __len__(self) -> int:
        return self.size

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def points(self) -> np.ndarray:
        """Nodes as complex numbers; only defined for d == 2."""
        if self.d != 2:
            raise MeasureValidationError(
                f"complex view needs d=2 nodes (Re, Im), measure has d={self.d}"
            )
        return self.nodes[:, 0] + 1j * self.nodes[:, 1]


def _check_atoms(nodes: np.ndarray, weights: np.ndarray, first_row: int = 1) -> None:
    bad = ~np.all(np.isfinite(nodes), axis=1) | ~np.isfinite(weights)
    if bad.any():
        raise MeasureValidationError(f"non-finite value at row {int(np.argmax(bad)) + first_row}")
    nonpos = weights <= 0
    if nonpos.any():
        raise MeasureValidationError(
            f"nonpositive weight at row {int(np.argmax(nonpos)) + first_row}"
        )


@dataclass(frozen=True, eq=False)
class MomentVector:
    """
    Real moments beta_i = integral of t^i, in the order of `basis`.

    `norm_moment` is (n, Gamma) with Gamma the integral of ||x||^n. A negative
    mass is accepted: the vector is treated as a linear functional and
    positivity is decided by whoever consumes it.
    """

    basis: RealBasis
    values: np.ndarray
    norm_moment: Optional[Tuple[int, float]] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != len(self.basis):
            raise MeasureValidationError(
                f"beta has {values.size} values, expected {len(self.basis)} "
                f"for d={self.basis.d}, m={self.basis.m}"
            )
        if not np.all(np.isfinite(values)):
            bad = int(np.argmax(~np.isfinite(values)))
            raise MeasureValidationError(
                f"non-finite moment at index {self.basis.indices[bad]}"
            )
        if self.norm_moment is not None:
            n, gamma = self.norm_moment
            if int(n) < 0 or not math.isfinite(gamma) or gamma < 0:
                raise MeasureValidationError(f"invalid norm moment (n={n}, Gamma={gamma})")
            object.__setattr__(self, "norm_moment", (int(n), float(gamma)))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def m(self) -> int:
        return self.basis.m

    @property
    def mass(self) -> float:
        return float(self.values[0])


@dataclass(frozen=True, eq=False)
class ComplexMomentSequence:
    """
    gamma_ij = integral of zbar^i z^j for i + j <= n_total.

    gamma_ji must equal conj(gamma_ij) and gamma_00 must be real and positive.
    Missing indices are allowed here and reported when a matrix needs them.
    """

    n_total: int
    gamma: Dict[Tuple[int, int], complex] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_total < 0:
            raise MeasureValidationError(f"invalid degree n={self.n_total}")
        gamma = {(int(i), int(j)): complex(v) for (i, j), v in self.gamma.items()}
        for (i, j), v in gamma.items():
            if i < 0 or j < 0 or i + j > self.n_total:
                raise MeasureValidationError(
                    f"index ({i}, {j}) outside degree {self.n_total}"
                )
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise MeasureValidationError(f"non-finite gamma at ({i}, {j})")
        g00 = gamma.get((0, 0))
        if g00 is None:
            raise MeasureValidationError("missing gamma index (0, 0)")
        scale = max(abs(v) for v in gamma.values())
        if abs(g00.imag) > SYMMETRY_TOL * scale or g00.real <= 0:
            raise MeasureValidationError(f"gamma (0, 0) must be real and > 0, got {g00}")
        for (i, j), v in gamma.items():
            w = gamma.get((j, i))
            if w is not None and abs(w - v.conjugate()) > SYMMETRY_TOL * max(scale, 1.0):
                raise MeasureValidationError(
                    f"gamma ({j}, {i}) is not the conjugate of gamma ({i}, {j})"
                )
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def from_upper(cls, n_total: int, upper: Dict[Tuple[int, int], complex]):
        """Fill gamma_ji = conj(gamma_ij) from pairs with i <= j."""
        gamma = {pair: complex(v) for pair, v in upper.items()}
        for (i, j), v in upper.items():
            if (j, i) not in upper:
                gamma[(j, i)] = complex(v).conjugate()
        return cls(n_total, gamma)

    @property
    def n(self) -> int:
        """Degree of the moment matrix this data fills, n_total // 2."""
        return self.n_total // 2

    @property
    def mass(self) -> float:
        return self.gamma[(0, 0)].real

    def __getitem__(self, pair: Tuple[int, int]) -> complex:
        try:
            return self.gamma[tuple(pair)]
        except KeyError:
            raise MeasureValidationError(f"missing gamma index ({pair[0]}, {pair[1]})")


def moments(mu: DiscreteMeasure, m: int) -> MomentVector:
    """beta_i = sum_k w_k x_k^i for |i| <= m, compensated sums."""
    basis = enumerate_real(mu.d, m)
    values = fsum_rows(vandermonde(basis, mu.nodes), mu.weights)
    return MomentVector(basis, values)


def norm_moment(mu: DiscreteMeasure, n: int) -> float:
    """Gamma = sum_k w_k ||x_k||^n (Euclidean norm); n = 0 gives the mass."""
    if n < 0:
        raise ValueError(f"invalid degree n={n}; must be >= 0")
    norms = np.linalg.norm(mu.nodes, axis=1)
    return math.fsum(mu.weights * norms**n)


def moments_with_norm(mu: DiscreteMeasure, m: int, n: int) -> MomentVector:
    beta = moments(mu, m)
    return MomentVector(beta.basis, beta.values, (n, norm_moment(mu, n)))


def support_dimension(mu: DiscreteMeasure, m: int, tol: Optional[float] = None) -> int:
    """
    N_{m,d;mu}: dimension of degree-<=m polynomials restricted to supp mu.

    Numerical rank of the row-equilibrated Vandermonde matrix; `tol` is the
    relative rank tolerance (default size * eps).
    """
    if m < 0:
        raise ValueError(f"invalid degree m={m}; must be >= 0")
    basis = enumerate_real(mu.d, m)
    return numerical_rank(equilibrate_rows(vandermonde(basis, mu.nodes)), rtol=tol)


def complex_moments(mu: DiscreteMeasure, n_total: int) -> ComplexMomentSequence:
    """gamma_ij = sum_k w_k conj(z_k)^i z_k^j with exact Hermitian symmetry."""
    if mu.d != 2:
        raise MeasureValidationError(
            f"complex moments need d=2 nodes (Re, Im), measure has d={mu.d}"
        )
    cbasis = enumerate_complex(n_total)
    values = fsum_rows(complex_vandermonde(cbasis, mu.points), mu.weights)
    gamma: Dict[Tuple[int, int], complex] = {}
    for (i, j), v in zip(cbasis.pairs, values):
        if i < j:
            gamma[(i, j)] = complex(v)
            gamma[(j, i)] = complex(v).conjugate()
        elif i == j:
            gamma[(i, i)] = complex(v.real, 0.0)
    return ComplexMomentSequence(n_total, gamma)


# --- I/O -------------------------------------------------------------------


class _Opened:
    """Context manager yielding a text stream for either a path or an open stream."""

    def __init__(self, target: PathOrStream, mode: str):
        self.target = target
        self.mode = mode
        self._owned: Optional[TextIO] = None

    def __enter__(self) -> TextIO:
        if isinstance(self.target, (str, os.PathLike)):
            self._owned = open(self.target, self.mode, encoding="utf-8", newline="")
            return self._owned
        return self.target

    def __exit__(self, *exc):
        if self._owned is not None:
            self._owned.close()


def _format_float(value: float) -> str:
    return "%.17g" % value


def read_measure(source: PathOrStream, format: str = "csv", merge: bool = True):
    """
    Read a measure from CSV (header x1..xd,w) or JSON ({"nodes": .., "weights": ..}).

    :raises MeasureValidationError: naming the offending data row (1-based)
    """
    with _Opened(source, "r") as fh:
        text = fh.read()
    if format == "csv":
        nodes, weights = _parse_csv(text)
    elif format == "json":
        nodes, weights = _parse_measure_json(text)
    else:
        raise ValueError(f"unknown measure format {format!r}")
    mu = DiscreteMeasure.from_atoms(nodes, weights, merge=merge)
    logger.debug(f"Read measure: {mu.size} atom(s) in R^{mu.d}")
    return mu


def _parse_csv(text: str):
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise MeasureValidationError("empty measure file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[-1] != "w":
        raise MeasureValidationError(f"header must be x1,...,xd,w; got {','.join(header)}")
    width = len(header)
    data = []
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != width:
            raise MeasureValidationError(
                f"row {r} has {len(row)} columns, expected {width} (dimension {width - 1} + w)"
            )
        try:
            data.append([float(c) for c in row])
        except ValueError:
            raise MeasureValidationError(f"unparseable number at row {r}")
    if not data:
        raise MeasureValidationError("measure file has no atoms")
    arr = np.array(data, dtype=float)
    _check_atoms(arr[:, :-1], arr[:, -1])
    return arr[:, :-1], arr[:, -1]


def read_nodes(source: PathOrStream) -> np.ndarray:
    """
    Read candidate nodes from CSV with header x1..xd and an optional w column.

    Weights, if present, are ignored. Rows are not merged.
    """
    with _Opened(source, "r") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise MeasureValidationError("empty grid file")
    header = [c.strip() for c in rows[0]]
    coords = header[:-1] if header[-1] == "w" else header
    if not coords or any(c != f"x{k + 1}" for k, c in enumerate(coords)):
        raise MeasureValidationError(f"grid header must be x1,...,xd[,w]; got {','.join(header)}")
    data = []
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise MeasureValidationError(
                f"row {r} has {len(row)} columns, expected {len(header)}"
            )
        try:
            values = [float(c) for c in row[: len(coords)]]
        except ValueError:
            raise MeasureValidationError(f"unparseable number at row {r}")
        if not all(np.isfinite(values)):
            raise MeasureValidationError(f"non-finite value at row {r}")
        data.append(values)
    if not data:
        raise MeasureValidationError("grid file has no nodes")
    logger.debug(f"Read grid: {len(data)} node(s) in R^{len(coords)}")
    return np.array(data, dtype=float)


def _parse_measure_json(text: str):
    try:
        doc = json.loads(text)
        nodes = np.array(doc["nodes"], dtype=float)
        weights = np.array(doc["weights"], dtype=float)
    except (ValueError, KeyError, TypeError) as e:
        raise MeasureValidationError(f"malformed measure JSON: {e}")
    if nodes.ndim == 1:
        nodes = nodes.reshape(-1, 1)
    if nodes.ndim != 2 or nodes.shape[0] != weights.size:
        raise MeasureValidationError("node dimension inconsistency in measure JSON")
    _check_atoms(nodes, weights)
    return nodes, weights


def write_measure(mu: DiscreteMeasure, dest: PathOrStream, format: str = "csv") -> None:
    """Write with 17 significant digits so read_measure(write_measure(mu)) is exact."""
    with _Opened(dest, "w") as fh:
        if format == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"x{c + 1}" for c in range(mu.d)] + ["w"])
            for node, w in zip(mu.nodes, mu.weights):
                writer.writerow([_format_float(v) for v in node] + [_format_float(w)])
        elif format == "json":
            doc = {"nodes": mu.nodes.tolist(), "weights": mu.weights.tolist()}
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
        else:
            raise ValueError(f"unknown measure format {format!r}")


def moments_to_dict(data: Union[MomentVector, ComplexMomentSequence]) -> dict:
    if isinstance(data, MomentVector):
        doc = {"kind": "real", "d": data.d, "m": data.m, "beta": data.values.tolist()}
        if data.norm_moment is not None:
            doc["norm_degree"], doc["gamma_norm"] = data.norm_moment
        return doc
    gamma = [
        {"i": i, "j": j, "re": v.real, "im": v.imag}
        for (i, j), v in sorted(data.gamma.items(), key=lambda kv: (sum(kv[0]), kv[0]))
        if i <= j
    ]
    return {"kind": "complex", "n": data.n_total, "gamma": gamma}


def moments_from_dict(doc: dict) -> Union[MomentVector, ComplexMomentSequence]:
    kind = doc.get("kind")
    if kind == "real":
        try:
            d, m = int(doc["d"]), int(doc["m"])
            beta = doc["beta"]
        except (KeyError, TypeError, ValueError) as e:
            raise MeasureValidationError(f"real moment JSON needs d, m, beta: {e}")
        if d < 1 or m < 0:
            raise MeasureValidationError(f"invalid d={d}, m={m} in moment JSON")
        if len(beta) != dim_real(d, m):
            raise MeasureValidationError(
                f"beta has {len(beta)} values, expected {dim_real(d, m)} for d={d}, m={m}"
            )
        norm = None
        if "norm_degree" in doc or "gamma_norm" in doc:
            try:
                norm = (int(doc["norm_degree"]), float(doc["gamma_norm"]))
            except (KeyError, TypeError, ValueError):
                raise MeasureValidationError("norm_degree and gamma_norm must appear together")
        return MomentVector(enumerate_real(d, m), beta, norm)
    if kind == "complex":
        try:
            n_total = int(doc["n"])
            entries = doc["gamma"]
        except (KeyError, TypeError, ValueError) as e:
            raise MeasureValidationError(f"complex moment JSON needs n and gamma: {e}")
        upper: Dict[Tuple[int, int], complex] = {}
        for entry in entries:
            try:
                i, j = int(entry["i"]), int(entry["j"])
                value = complex(float(entry["re"]), float(entry.get("im", 0.0)))
            except (KeyError, TypeError, ValueError):
                raise MeasureValidationError(f"malformed gamma entry {entry!r}")
            if (i, j) in upper:
                raise MeasureValidationError(f"duplicate gamma index ({i}, {j})")
            upper[(i, j)] = value
        return ComplexMomentSequence.from_upper(n_total, upper)
    raise MeasureValidationError(f"unknown moment kind {kind!r}; expected 'real' or 'complex'")


def read_moments(source: PathOrStream) -> Union[MomentVector, ComplexMomentSequence]:
    with _Opened(source, "r") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise MeasureValidationError(f"malformed moment JSON: {e}")
    if not isinstance(doc, dict):
        raise MeasureValidationError("moment JSON must be an object")
    return moments_from_dict(doc)


def write_moments(data: Union[MomentVector, ComplexMomentSequence], dest: PathOrStream) -> None:
    """Floats are written with repr(), which round-trips every double."""
    with _Opened(dest, "w") as fh:
        fh.write(json.dumps(moments_to_dict(data), indent=2, sort_keys=True) + "\n")
