"""
Complex moment matrices M(n)(gamma) for measures on C.

Rows and columns are labelled by the monomials zbar^i z^j, i + j <= n, in
ComplexPairBasis order (1, Z, Zbar, Z^2, Zbar Z, Zbar^2, ...). The entry at
row (k, l), column (i, j) is gamma_{i+l, j+k}, so for a representing measure
<M p, q> is the integral of p times conj(q).

Column dependences of M(n) are polynomial identities on the support of any
representing measure. Everything here is read off those dependences: flat
data (rank M(n) = rank M(n-1)) gives the measure outright, and an analytic
relation Z^k = q(Z, Zbar) pins the support inside the zero set of z^k - q.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import nnls

from tchakaloff.backend.measure import (
    ComplexMomentSequence,
    DiscreteMeasure,
    MeasureValidationError,
    SYMMETRY_TOL,
)
from tchakaloff.backend.variety import AnalyticPoly, find_roots, root_count_bound
from tchakaloff.utils.basis import (
    ComplexPairBasis,
    complex_real_parts,
    complex_real_rows,
    complex_real_scale,
    complex_vandermonde,
    enumerate_complex,
    rank_threshold,
)
from tchakaloff.utils.settings import DEFAULT_TOL
from tchakaloff.utils.utils import cluster_points, fsum_rows, relative_residuals

logger = logging.getLogger(__name__)

DEDUP_RADIUS = 1e-8
WEIGHT_FLOOR = 1e-10
COEFF_DROP = 1e-12


class MomentMatrixError(RuntimeError):
    pass


class NotFlatError(MomentMatrixError):
    pass


class NonPositiveWeightError(MomentMatrixError):
    def __init__(self, message: str, weights=None):
        super().__init__(message)
        self.weights = weights


class ExtractionError(MomentMatrixError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    n: int
    basis: ComplexPairBasis
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        size = len(self.basis)
        if entries.shape != (size, size):
            raise MeasureValidationError(
                f"moment matrix of degree {self.n} must be {size}x{size}, got {entries.shape}"
            )
        scale = float(np.max(np.abs(entries))) if entries.size else 0.0
        if np.max(np.abs(entries - entries.conj().T)) > SYMMETRY_TOL * max(scale, 1e-300):
            raise MeasureValidationError("moment matrix is not Hermitian")
        entries = (entries + entries.conj().T) / 2
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_entries(cls, entries) -> "MomentMatrix":
        """Wrap a hand-built Hermitian matrix; its size fixes n."""
        entries = np.asarray(entries, dtype=complex)
        size = entries.shape[0]
        n = 0
        while (n + 1) * (n + 2) // 2 < size:
            n += 1
        return cls(n, enumerate_complex(n), entries)

    @property
    def size(self) -> int:
        return len(self.basis)

    def block(self, degree: int) -> np.ndarray:
        """Principal block on the columns of degree <= `degree`, i.e. M(degree)."""
        p = self.basis.prefix(degree)
        return self.entries[:p, :p]

    def column(self, pair: Tuple[int, int]) -> np.ndarray:
        return self.entries[:, self.basis.position(pair)]

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.entries, compute_uv=False)

    def tau(self, rank_tol: Optional[float] = None) -> float:
        """Absolute rank threshold shared by M(n) and every principal block."""
        s = self.singular_values()
        return rank_threshold(self.entries.shape, float(s[0]) if s.size else 0.0, rank_tol)


def build_moment_matrix(gamma: ComplexMomentSequence, n: Optional[int] = None) -> MomentMatrix:
    """
    Assemble M(n) from gamma; n defaults to gamma.n_total // 2.

    :raises MeasureValidationError: naming the first missing (i, j)
    """
    n = gamma.n if n is None else n
    if 2 * n > gamma.n_total:
        raise MeasureValidationError(f"M({n}) needs data through degree {2 * n}")
    basis = enumerate_complex(n)
    size = len(basis)
    entries = np.empty((size, size), dtype=complex)
    for r, (k, l) in enumerate(basis.pairs):
        for c, (i, j) in enumerate(basis.pairs):
            entries[r, c] = gamma[(i + l, j + k)]
    return MomentMatrix(n, basis, entries)


@dataclass(frozen=True)
class PsdRank:
    is_psd: bool
    rank: int
    min_eigenvalue: float


def _rank_with(values: np.ndarray, tau: float) -> int:
    return int(np.count_nonzero(values > tau))


def psd_and_rank(
    M: MomentMatrix, tol: float = DEFAULT_TOL, rank_tol: Optional[float] = None
) -> PsdRank:
    """PSD iff lambda_min >= -tol * max |lambda|; rank counts singular values above tau."""
    eig = np.linalg.eigvalsh(M.entries)
    top = float(np.max(np.abs(eig))) if eig.size else 0.0
    lam_min = float(eig[0]) if eig.size else 0.0
    rank = _rank_with(M.singular_values(), M.tau(rank_tol))
    return PsdRank(lam_min >= -tol * top, rank, lam_min)


@dataclass(frozen=True)
class FlatCheck:
    is_psd: bool
    rank_n: int
    rank_n_minus_1: int
    min_eigenvalue: float

    @property
    def flat(self) -> bool:
        return self.is_psd and self.rank_n == self.rank_n_minus_1


def flatness(
    M: MomentMatrix, tol: float = DEFAULT_TOL, rank_tol: Optional[float] = None
) -> FlatCheck:
    if M.n < 1:
        raise ValueError("flatness needs a moment matrix of degree n >= 1")
    pr = psd_and_rank(M, tol, rank_tol)
    tau = M.tau(rank_tol)
    lower = np.linalg.svd(M.block(M.n - 1), compute_uv=False)
    return FlatCheck(pr.is_psd, pr.rank, _rank_with(lower, tau), pr.min_eigenvalue)


def is_flat(
    gamma: ComplexMomentSequence, tol: float = DEFAULT_TOL, rank_tol: Optional[float] = None
) -> bool:
    """PSD and rank M(n) == rank M(n-1) under one absolute threshold."""
    return flatness(build_moment_matrix(gamma), tol, rank_tol).flat


def _null_space(A: np.ndarray, tau: float) -> np.ndarray:
    """Rows span {v : A v ~ 0}, singular values <= tau."""
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    rank = _rank_with(s, tau)
    return vh[rank:].conj()


def _canonical_relations(null: np.ndarray) -> List[Tuple[int, np.ndarray]]:
    """
    Reduced echelon form of the null space, pivoting from the highest monomial down.

    Each relation gets coefficient 1 at its pivot monomial and 0 at the others'.
    Returned as (pivot, vector) sorted by pivot.
    """
    if null.size == 0:
        return []
    R = null[:, ::-1].copy()
    rows, cols = R.shape
    floor = 1e-10 * float(np.max(np.abs(R)))
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[piv, c]) <= floor:
            continue
        R[[r, piv]] = R[[piv, r]]
        R[r] /= R[r, c]
        for i in range(rows):
            if i != r:
                R[i] -= R[i, c] * R[r]
        pivots.append(cols - 1 - c)
        r += 1
    relations = [(p, R[i, ::-1].copy()) for i, p in enumerate(pivots)]
    return sorted(relations, key=lambda rel: rel[0])


def _as_polynomial(basis: ComplexPairBasis, v: np.ndarray) -> Dict[str, complex]:
    scale = float(np.max(np.abs(v))) if v.size else 0.0
    return {
        basis.label(basis[k]): complex(c)
        for k, c in enumerate(v)
        if abs(c) > COEFF_DROP * max(scale, 1.0)
    }


@dataclass(frozen=True)
class RecursiveCheck:
    ok: bool
    witness: Optional[dict] = None
    relations: int = 0

    def __bool__(self) -> bool:
        return self.ok


def is_recursively_generated(
    M: MomentMatrix, tol: float = DEFAULT_TOL, rank_tol: Optional[float] = None
) -> RecursiveCheck:
    """
    Check that every column relation p = 0 with deg p <= n-1 survives
    multiplication by z and by zbar.

    On failure the witness names the relation (as {column label: coefficient})
    and the multiplier that breaks it.
    """
    if M.n < 1:
        raise ValueError("recursive generation needs a moment matrix of degree n >= 1")
    tau = M.tau(rank_tol)
    s_max = float(M.singular_values()[0])
    p = M.basis.prefix(M.n - 1)
    low = enumerate_complex(M.n - 1)
    relations = _canonical_relations(_null_space(M.entries[:, :p], tau))
    limit = max(tol * s_max, 10 * tau)

    for pivot, v in relations:
        for name, shift in (("z", (0, 1)), ("zbar", (1, 0))):
            u = np.zeros(M.size, dtype=complex)
            for idx, (i, j) in enumerate(low.pairs):
                u[M.basis.position((i + shift[0], j + shift[1]))] = v[idx]
            if np.linalg.norm(M.entries @ u) > limit * np.linalg.norm(u):
                witness = {"relation": _as_polynomial(low, v), "multiplier": name}
                logger.debug(f"Recursive generation fails: {witness}")
                return RecursiveCheck(False, witness, len(relations))
    return RecursiveCheck(True, None, len(relations))


@dataclass(frozen=True)
class AnalyticRelation:
    """Z^k = sum a_ij Zbar^i Z^j over i + j < k, coefficients keyed by (i, j)."""

    k: int
    coefficients: Dict[Tuple[int, int], complex]
    residual: float

    def as_poly(self) -> AnalyticPoly:
        return AnalyticPoly(self.k, dict(self.coefficients))


def find_analytic_relation(
    M: MomentMatrix, tol: float = DEFAULT_TOL
) -> Optional[AnalyticRelation]:
    """Smallest k <= n whose Z^k column is a combination of the columns of degree < k."""
    if M.n < 1:
        raise ValueError("analytic relations need a moment matrix of degree n >= 1")
    for k in range(1, M.n + 1):
        col = M.column((0, k))
        p = M.basis.prefix(k - 1)
        x, *_ = scipy.linalg.lstsq(M.entries[:, :p], col)
        col_norm = float(np.linalg.norm(col))
        residual = float(np.linalg.norm(M.entries[:, :p] @ x - col))
        rel = residual / col_norm if col_norm > 0 else 0.0
        logger.debug(f"Z^{k} column: relative residual {rel:.3e}")
        if rel <= tol:
            coefficients = {pair: complex(x[idx]) for idx, pair in enumerate(M.basis.pairs[:p])}
            return AnalyticRelation(k, coefficients, rel)
    return None


def _sort_atoms(points: np.ndarray, weights: np.ndarray):
    order = np.lexsort((points.imag, points.real))
    return points[order], weights[order]


def gamma_residual(mu: DiscreteMeasure, gamma: ComplexMomentSequence, pairs=None) -> float:
    """Max relative residual of mu's gamma_ij against the data, scaled by sum w |z|^(i+j)."""
    if pairs is None:
        pairs = list(enumerate_complex(gamma.n_total).pairs)
    basis = enumerate_complex(max(i + j for i, j in pairs))
    W = complex_vandermonde(basis, mu.points)
    rows = [basis.position(p) for p in pairs]
    actual = fsum_rows(W[rows], mu.weights)
    expected = np.array([gamma[p] for p in pairs])
    scale = np.maximum(fsum_rows(np.abs(W[rows]), mu.weights), np.abs(expected))
    return float(np.max(relative_residuals(actual, expected, scale)))


def extract_atoms_flat(
    gamma: ComplexMomentSequence, tol: float = DEFAULT_TOL, rank_tol: Optional[float] = None
) -> DiscreteMeasure:
    """
    The rank-M(n)-atomic measure of flat data.

    A pivoted QR of M(n-1) picks r basis columns B. Solving
    M[:, B] X = M[:, zB] gives multiplication by z on the column space; its
    eigenvalues are the atoms. Weights come from the degree-<=n
    Vandermonde system.

    :raises NotFlatError: if the data is not flat
    :raises NonPositiveWeightError: if a weight falls below 1e-10 * gamma_00
    :raises ExtractionError: if the measure does not reproduce gamma within tol
    """
    M = build_moment_matrix(gamma)
    check = flatness(M, tol, rank_tol)
    if not check.flat:
        raise NotFlatError(
            f"data is not flat: psd={check.is_psd}, rank M({M.n})={check.rank_n}, "
            f"rank M({M.n - 1})={check.rank_n_minus_1}"
        )
    r = check.rank_n
    _, _, perm = scipy.linalg.qr(M.block(M.n - 1), pivoting=True)
    chosen = [M.basis[int(c)] for c in perm[:r]]
    cols = [M.basis.position(p) for p in chosen]
    zcols = [M.basis.position((i, j + 1)) for i, j in chosen]
    try:
        X, *_ = scipy.linalg.lstsq(M.entries[:, cols], M.entries[:, zcols])
        atoms = np.linalg.eigvals(X)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise ExtractionError(f"multiplication matrix failed: {e}")

    radius = DEDUP_RADIUS * (1.0 + float(np.max(np.abs(atoms))))
    labels = cluster_points(np.column_stack([atoms.real, atoms.imag]), radius)
    atoms = atoms[np.unique(labels)]
    if atoms.size < r:
        logger.warning(f"{r - atoms.size} repeated eigenvalue(s) merged during extraction")

    pairs = enumerate_complex(M.n)
    A = complex_real_rows(pairs, atoms)
    b = complex_real_parts(pairs, [gamma[p] for p in pairs.pairs])
    weights, *_ = scipy.linalg.lstsq(A, b)
    if np.any(weights <= WEIGHT_FLOOR * gamma.mass):
        raise NonPositiveWeightError(
            f"extracted weight {float(np.min(weights)):.3e} is not positive; "
            f"the rank tolerance is probably too loose",
            weights,
        )
    atoms, weights = _sort_atoms(atoms, weights)
    mu = DiscreteMeasure.from_complex(atoms, weights, merge=False)
    residual = gamma_residual(mu, gamma)
    if residual > tol:
        raise ExtractionError(
            f"extracted measure misses gamma by {residual:.3e} (tol {tol:.1e})", residual
        )
    logger.debug(f"Extracted {mu.size} atoms from flat M({M.n}), residual {residual:.3e}")
    return mu


class CertificateKind(Enum):
    FLAT = "Flat"
    ANALYTIC = "Analytic"
    NONE = "None"


@dataclass(frozen=True)
class Certificate:
    kind: CertificateKind
    rank: int
    k: Optional[int] = None
    coefficients: Dict[Tuple[int, int], complex] = field(default_factory=dict)
    atom_bound: Optional[int] = None
    measure: Optional[DiscreteMeasure] = None
    residual: Optional[float] = None
    extraction_error: Optional[str] = None
    paper_bound: Optional[str] = None
    note: str = ""

    def to_dict(self) -> dict:
        doc = {
            "kind": self.kind.value,
            "rank": self.rank,
            "k": self.k,
            "coefficients": [
                {"i": i, "j": j, "re": c.real, "im": c.imag}
                for (i, j), c in self.coefficients.items()
            ],
            "atom_bound": self.atom_bound,
            "paper_bound": self.paper_bound,
            "residual": self.residual,
            "extraction_error": self.extraction_error,
            "note": self.note,
            "atoms": None,
            "weights": None,
        }
        if self.measure is not None:
            doc["atoms"] = [{"re": z.real, "im": z.imag} for z in self.measure.points]
            doc["weights"] = self.measure.weights.tolist()
        return doc


def _weights_on_roots(roots: np.ndarray, gamma: ComplexMomentSequence):
    """Nonnegative weights on candidate atoms fitting every gamma_ij; returns (mu or None, residual)."""
    basis = enumerate_complex(gamma.n_total)
    pairs = list(basis.pairs)
    A = complex_real_rows(basis, roots)
    b = complex_real_parts(basis, [gamma[p] for p in pairs])
    # scaled by |zbar^i z^j|, not by the row's own norm: rows that nearly cancel stay small
    norms = complex_real_scale(basis, complex_vandermonde(basis, roots))
    scale = np.where(norms > 0, norms, 1.0)
    weights, _ = nnls(A / scale[:, None], b / scale, maxiter=50 * max(roots.size, 1))
    keep = weights > WEIGHT_FLOOR * gamma.mass
    if not keep.any():
        return None, float("inf")
    atoms, w = _sort_atoms(roots[keep], weights[keep])
    mu = DiscreteMeasure.from_complex(atoms, w, merge=False)
    return mu, gamma_residual(mu, gamma, pairs)


def uniqueness_certificate(
    gamma: ComplexMomentSequence, tol: float = DEFAULT_TOL, rank_tol: Optional[float] = None
) -> Certificate:
    """
    Flat data gives a Flat certificate with the extracted rank-atomic measure.
    Otherwise an analytic relation Z^k = q gives an Analytic certificate with
    atom bound k^2 and, when the roots of z^k - q carry a fitting nonnegative
    measure, that measure. Uniqueness is conditional on some representing
    measure existing.

    :raises MomentMatrixError: flat data whose extraction fails, with context
    """
    M = build_moment_matrix(gamma)
    if M.n < 1:
        raise ValueError("certificates need data of degree 2n with n >= 1")
    check = flatness(M, tol, rank_tol)
    if check.flat:
        try:
            mu = extract_atoms_flat(gamma, tol, rank_tol)
        except NonPositiveWeightError as e:
            raise NonPositiveWeightError(f"flat data, rank {check.rank_n}: {e}", e.weights) from e
        except MomentMatrixError as e:
            raise ExtractionError(f"flat data, rank {check.rank_n}: {e}") from e
        return Certificate(
            kind=CertificateKind.FLAT,
            rank=check.rank_n,
            atom_bound=check.rank_n,
            measure=mu,
            residual=gamma_residual(mu, gamma),
            paper_bound="Prop4.1",
            note="flat data: the representing measure is unique and rank M(n)-atomic",
        )

    relation = find_analytic_relation(M, tol)
    if relation is not None:
        poly = relation.as_poly()
        roots = find_roots(poly, tol=max(tol, DEFAULT_TOL))
        mu, residual = _weights_on_roots(np.asarray(roots.roots, dtype=complex), gamma)
        error = None
        if mu is None or residual > tol:
            error = (
                f"no nonnegative measure on the {len(roots.roots)} root(s) of the relation "
                f"reproduces gamma (residual {residual:.3e})"
            )
            logger.warning(f"Analytic relation of degree {relation.k}: {error}")
            mu = None
        return Certificate(
            kind=CertificateKind.ANALYTIC,
            rank=check.rank_n,
            k=relation.k,
            coefficients=relation.coefficients,
            atom_bound=root_count_bound(relation.k),
            measure=mu,
            residual=residual if np.isfinite(residual) else None,
            extraction_error=error,
            paper_bound="Prop4.2",
            note="unique conditional on existence of a representing measure",
        )

    return Certificate(
        kind=CertificateKind.NONE,
        rank=check.rank_n,
        note="neither flat nor analytic; no uniqueness claim",
    )


def analyze(
    gamma: ComplexMomentSequence, tol: float = DEFAULT_TOL, rank_tol: Optional[float] = None
) -> dict:
    """PSD, ranks, recursive generation, flatness and the smallest analytic relation of M(n)."""
    M = build_moment_matrix(gamma)
    if M.n < 1:
        raise ValueError("analysis needs data of degree 2n with n >= 1")
    check = flatness(M, tol, rank_tol)
    recursive = is_recursively_generated(M, tol, rank_tol)
    relation = find_analytic_relation(M, tol)
    report = {
        "n": M.n,
        "size": M.size,
        "is_psd": check.is_psd,
        "min_eigenvalue": check.min_eigenvalue,
        "rank": check.rank_n,
        "rank_lower": check.rank_n_minus_1,
        "tau": M.tau(rank_tol),
        "recursively_generated": recursive.ok,
        "witness": recursive.witness,
        "flat": check.flat,
        "analytic_relation": None,
        "min_support_size": check.rank_n,
    }
    if relation is not None:
        report["analytic_relation"] = {
            "k": relation.k,
            "atom_bound": root_count_bound(relation.k),
            "residual": relation.residual,
            "coefficients": [
                {"i": i, "j": j, "re": c.real, "im": c.imag}
                for (i, j), c in relation.coefficients.items()
                if abs(c) > COEFF_DROP
            ],
        }
    return report
