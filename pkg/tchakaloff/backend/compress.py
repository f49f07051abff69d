"""
Quadrature compression by null-space (Caratheodory) reduction.

Every rule is found by walking from the input weights to a vertex of the
polytope {w >= 0 : A w = A w0}, where the rows of A are the moments to be
preserved. At a vertex the surviving columns of A are linearly independent,
so the rule has at most rank(A) atoms, and all of them sit on input nodes.

    compress              moments to degree m,       <= N_{m,d;mu} atoms
    compress_constrained  moments to degree n-1 and  <= 1 + N_{n-1,d;mu} atoms
                          the norm moment of degree n
    compress_complex      zbar^i z^j, i + j <= m,    <= dim C_m[z,zbar]|supp mu
    represent_on_grid     a moment vector on a grid  <= rank of the grid Vandermonde
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import nnls

from tchakaloff.backend.measure import (
    DiscreteMeasure,
    MomentVector,
    norm_moment,
    support_dimension,
)
from tchakaloff.utils.basis import (
    complex_real_rows,
    complex_vandermonde,
    enumerate_complex,
    enumerate_real,
    equilibrate_rows,
    numerical_rank,
    vandermonde,
)
from tchakaloff.utils.settings import DEFAULT_TOL
from tchakaloff.utils.utils import fsum_rows, relative_residuals

logger = logging.getLogger(__name__)

ZERO_THRESHOLD = 1e-13


class CompressionError(RuntimeError):
    """The rule found does not reproduce the moments to the requested tolerance."""

    def __init__(self, message: str, best_residual: float = math.nan):
        super().__init__(message)
        self.best_residual = best_residual


class ConditioningError(CompressionError):
    """A null-space or factorisation step failed."""


class Infeasible(Exception):
    """No nonnegative combination of grid atoms reproduces the moments."""

    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Reduction:
    weights: np.ndarray
    eliminations: int
    rank: int

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)


def _null_direction(block: np.ndarray) -> np.ndarray:
    """Right singular vector of the smallest singular value, largest entry made positive."""
    _, _, vt = np.linalg.svd(block, full_matrices=True)
    c = vt[-1]
    if c[np.argmax(np.abs(c))] < 0:
        c = -c
    return c


def _step(w: np.ndarray, cols: np.ndarray, c: np.ndarray, threshold: float) -> int:
    """
    Move w[cols] along -c until the first weight hits zero.

    Ties on the ratio go to the smallest index. Returns how many weights were zeroed.
    """
    pos = c > 0
    ratios = w[cols[pos]] / c[pos]
    hit = cols[pos][int(np.argmin(ratios))]
    t = float(np.min(ratios))
    w[cols] -= t * c
    w[hit] = 0.0
    dead = cols[w[cols] <= threshold]
    w[dead] = 0.0
    return int(dead.size)


def _independent(block: np.ndarray, rtol: Optional[float]) -> bool:
    return numerical_rank(block, rtol=rtol) == block.shape[1]


def _polish(a_eq: np.ndarray, target: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Least-squares re-solve of the weights on their support; kept only if positive and better."""
    support = np.flatnonzero(w > 0)
    if support.size == 0:
        return w
    x, *_ = scipy.linalg.lstsq(a_eq[:, support], target)
    if not np.all(x > 0):
        return w
    before = np.linalg.norm(a_eq @ w - target)
    polished = np.zeros_like(w)
    polished[support] = x
    after = np.linalg.norm(a_eq @ polished - target)
    return polished if after <= before else w


def reduce_extreme(weights, A, tol: Optional[float] = None) -> Reduction:
    """
    Reduce `weights` to a vertex of {w >= 0 : A w = A weights}.

    Rows of A are equilibrated and orthonormalised by a pivoted QR before
    the walk. Each step takes a null vector c of rank + 1 active columns and
    sets w <- w - t c with t the smallest ratio w_k / c_k over c_k > 0.

    :param weights: nonnegative vector, one entry per column of A
    :param A: constraint matrix
    :param tol: relative rank tolerance (default size * eps)
    :return: Reduction with the reduced weights; columns with w > 0 are independent
    :raises ConditioningError: if a factorisation fails
    """
    w = np.array(weights, dtype=float).reshape(-1)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] != w.size:
        raise ValueError(f"constraint matrix shape {A.shape} does not match {w.size} weights")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")

    a_eq = equilibrate_rows(A)
    mass = float(np.sum(w))
    threshold = ZERO_THRESHOLD * mass
    if a_eq.shape[0] == 0 or mass == 0:
        return Reduction(np.zeros_like(w), int(np.count_nonzero(w)), 0)
    target = a_eq @ w

    try:
        rank = numerical_rank(a_eq, rtol=tol)
        q, _, _ = scipy.linalg.qr(a_eq.T, mode="economic", pivoting=True)
        B = q[:, :rank].T

        eliminations = steps = 0
        active = np.flatnonzero(w > 0)
        # Phase 1: any rank + 1 columns of B are dependent.
        while active.size > rank:
            window = active[: rank + 1]
            c = _null_direction(B[:, window])
            eliminations += _step(w, window, c, threshold)
            active = np.flatnonzero(w > 0)
            steps += 1
            if steps % 1000 == 0:
                logger.debug(f"reduce_extreme: {active.size} active columns, rank {rank}")

        # Phase 2: at most `rank` columns remain but they may still be dependent.
        while active.size and not _independent(B[:, active], tol):
            c = _null_direction(B[:, active])
            eliminations += _step(w, active, c, threshold)
            active = np.flatnonzero(w > 0)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise ConditioningError(f"null-space solve failed: {e}")

    if eliminations:
        w = _polish(a_eq, target, w)
    return Reduction(w, eliminations, rank)


@dataclass(frozen=True)
class RuleCheck:
    """Per-moment residuals of a rule against a reference measure."""

    absolute: np.ndarray
    relative: np.ndarray
    norm_slack: Optional[float] = None

    @property
    def max_absolute(self) -> float:
        return float(np.max(self.absolute)) if self.absolute.size else 0.0

    @property
    def max_relative(self) -> float:
        return float(np.max(self.relative)) if self.relative.size else 0.0


def verify_rule(
    rule: DiscreteMeasure, mu: DiscreteMeasure, m: int, n_opt: Optional[int] = None
) -> RuleCheck:
    """
    Residuals of rule's moments against mu's in the raw monomial basis.

    The relative residual of t^i divides by sum_k w_k |x_k^i| over mu (the
    absolute residual is used where that is 0). With n_opt, the report also
    carries Gamma(mu) - integral of ||x||^n_opt over the rule.
    """
    if rule.d != mu.d:
        raise ValueError(f"dimension mismatch: rule d={rule.d}, measure d={mu.d}")
    basis = enumerate_real(mu.d, m)
    v_mu = vandermonde(basis, mu.nodes)
    expected = fsum_rows(v_mu, mu.weights)
    actual = fsum_rows(vandermonde(basis, rule.nodes), rule.weights)
    scale = fsum_rows(np.abs(v_mu), mu.weights)
    absolute = np.abs(actual - expected)
    slack = None
    if n_opt is not None:
        slack = norm_moment(mu, n_opt) - norm_moment(rule, n_opt)
    return RuleCheck(absolute, relative_residuals(actual, expected, scale), slack)


@dataclass(frozen=True)
class CompressionReport:
    rule: DiscreteMeasure
    size_bound: int
    achieved_size: int
    max_moment_residual: float
    eliminations: int
    vertex_bound: int
    paper_bound: str
    node_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    norm_slack: Optional[float] = None
    max_absolute_residual: float = 0.0

    def to_dict(self) -> dict:
        return {
            "paper_bound": self.paper_bound,
            "size_bound": self.size_bound,
            "vertex_bound": self.vertex_bound,
            "achieved_size": self.achieved_size,
            "max_moment_residual": self.max_moment_residual,
            "max_absolute_residual": self.max_absolute_residual,
            "norm_slack": self.norm_slack,
            "eliminations": self.eliminations,
            "node_indices": [int(i) for i in self.node_indices],
            "nodes": self.rule.nodes.tolist(),
            "weights": self.rule.weights.tolist(),
        }


def _nnls_resolve(a_eq: np.ndarray, target: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Nonnegative re-solve restricted to `support`; returns full-length weights."""
    x, _ = nnls(a_eq[:, support], target, maxiter=50 * max(support.size, 1))
    out = np.zeros(a_eq.shape[1])
    out[support] = x
    return out


def _reduce_and_check(mu, A, tol, rank_tol, check, label):
    """
    Shared driver: reduce, build the rule, verify, fall back to NNLS once.

    `check(weights_full) -> (residual, RuleCheck-like)` measures the rule in
    the raw basis.
    """
    red = reduce_extreme(_pad(mu.weights, A), A, rank_tol)
    w = red.weights[: mu.size]
    best, detail = check(w)
    if not best <= tol:
        logger.warning(
            f"{label}: residual {best:.3e} above tol {tol:.1e}; re-solving on the support"
        )
        a_eq = equilibrate_rows(A)
        target = a_eq @ _pad(mu.weights, A)
        support = np.flatnonzero(red.weights > 0)
        try:
            retry = _nnls_resolve(a_eq, target, support)
        except RuntimeError as e:
            raise CompressionError(f"{label}: conditioning fallback failed ({e})", best)
        r_best, r_detail = check(retry[: mu.size])
        if r_best < best:
            best, detail, w = r_best, r_detail, retry[: mu.size]
        if not best <= tol:
            raise CompressionError(
                f"{label}: residual {best:.3e} exceeds tol {tol:.1e} after fallback", best
            )
    return red, w, detail


def _pad(weights: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Zero-extend weights with slack entries up to A's column count."""
    out = np.zeros(A.shape[1])
    out[: weights.size] = weights
    return out


def _rule_from(mu: DiscreteMeasure, w: np.ndarray):
    idx = np.flatnonzero(w > 0)
    if idx.size == 0:
        raise CompressionError("reduction removed every atom", math.inf)
    return mu.restrict(idx, w[idx]), idx


def compress(
    mu: DiscreteMeasure, m: int, tol: float = DEFAULT_TOL, rank_tol: Optional[float] = None
) -> CompressionReport:
    """
    Quadrature rule of degree m with at most N_{m,d;mu} atoms taken from supp mu.

    :raises CompressionError: if the relative residual stays above tol
    """
    if m < 0:
        raise ValueError(f"invalid degree m={m}; must be >= 0")
    basis = enumerate_real(mu.d, m)
    V = vandermonde(basis, mu.nodes)

    def check(w):
        rule, _ = _rule_from(mu, w)
        result = verify_rule(rule, mu, m)
        return result.max_relative, result

    red, w, detail = _reduce_and_check(mu, V, tol, rank_tol, check, "compress")
    rule, idx = _rule_from(mu, w)
    report = CompressionReport(
        rule=rule,
        size_bound=support_dimension(mu, m, rank_tol),
        achieved_size=rule.size,
        max_moment_residual=detail.max_relative,
        max_absolute_residual=detail.max_absolute,
        eliminations=red.eliminations,
        vertex_bound=red.rank,
        paper_bound="Thm1.1",
        node_indices=idx,
    )
    logger.info(
        f"compress: {mu.size} -> {report.achieved_size} atoms "
        f"(bound {report.size_bound}), residual {report.max_moment_residual:.3e}"
    )
    return report


def compress_constrained(
    mu: DiscreteMeasure, n: int, tol: float = DEFAULT_TOL, rank_tol: Optional[float] = None
) -> CompressionReport:
    """
    Rule matching moments to degree n-1 whose degree-n norm moment stays <= Gamma.

    The norm row ||x_k||^n is appended to the moment rows together with a
    slack column, so the walk ends at a vertex of
    {w, s >= 0 : V w = beta, ||x||^n . w + s = Gamma}, which has at most
    1 + N_{n-1,d;mu} positive entries.
    """
    if n < 1:
        raise ValueError(f"invalid norm degree n={n}; must be >= 1")
    gamma = norm_moment(mu, n)
    V = vandermonde(enumerate_real(mu.d, n - 1), mu.nodes)
    norm_row = np.linalg.norm(mu.nodes, axis=1) ** n
    A = np.zeros((V.shape[0] + 1, mu.size + 1))
    A[:-1, :-1] = V
    A[-1, :-1] = norm_row
    A[-1, -1] = 1.0

    def check(w):
        rule, _ = _rule_from(mu, w)
        result = verify_rule(rule, mu, n - 1, n_opt=n)
        residual = result.max_relative
        # norm inequality, measured relative to Gamma
        excess = max(0.0, -result.norm_slack) / gamma if gamma > 0 else -result.norm_slack
        return max(residual, excess), result

    red, w, detail = _reduce_and_check(mu, A, tol, rank_tol, check, "compress_constrained")
    rule, idx = _rule_from(mu, w)
    report = CompressionReport(
        rule=rule,
        size_bound=1 + support_dimension(mu, n - 1, rank_tol),
        achieved_size=rule.size,
        max_moment_residual=detail.max_relative,
        max_absolute_residual=detail.max_absolute,
        eliminations=red.eliminations,
        vertex_bound=numerical_rank(equilibrate_rows(np.vstack([V, norm_row])), rtol=rank_tol),
        paper_bound="Thm1.3",
        node_indices=idx,
        norm_slack=detail.norm_slack,
    )
    logger.info(
        f"compress_constrained: {mu.size} -> {report.achieved_size} atoms "
        f"(bound {report.size_bound}, vertex bound {report.vertex_bound}), "
        f"norm slack {report.norm_slack:.3e}"
    )
    return report


def complex_residuals(rule: DiscreteMeasure, mu: DiscreteMeasure, m: int) -> np.ndarray:
    """Relative residuals of gamma_ij, i + j <= m, scaled by sum_k w_k |z_k|^(i+j)."""
    cbasis = enumerate_complex(m)
    w_mu = complex_vandermonde(cbasis, mu.points)
    expected = fsum_rows(w_mu, mu.weights)
    actual = fsum_rows(complex_vandermonde(cbasis, rule.points), rule.weights)
    scale = fsum_rows(np.abs(w_mu), mu.weights)
    return relative_residuals(actual, expected, scale)


def compress_complex(
    mu: DiscreteMeasure, m: int, tol: float = DEFAULT_TOL, rank_tol: Optional[float] = None
) -> CompressionReport:
    """
    Rule on C reproducing every gamma_ij with i + j <= m.

    mu must have d = 2 nodes read as Re z, Im z. The constraints are the
    independent real rows of the complex Vandermonde (see complex_real_rows).
    """
    if m < 0:
        raise ValueError(f"invalid degree m={m}; must be >= 0")
    A = complex_real_rows(enumerate_complex(m), mu.points)

    def check(w):
        rule, _ = _rule_from(mu, w)
        rel = complex_residuals(rule, mu, m)
        return float(np.max(rel)), rel

    red, w, rel = _reduce_and_check(mu, A, tol, rank_tol, check, "compress_complex")
    rule, idx = _rule_from(mu, w)
    bound = numerical_rank(equilibrate_rows(A), rtol=rank_tol)
    report = CompressionReport(
        rule=rule,
        size_bound=bound,
        achieved_size=rule.size,
        max_moment_residual=float(np.max(rel)),
        eliminations=red.eliminations,
        vertex_bound=red.rank,
        paper_bound="Thm3.5",
        node_indices=idx,
    )
    logger.info(f"compress_complex: {mu.size} -> {report.achieved_size} atoms (bound {bound})")
    return report


def represent_on_grid(
    beta: MomentVector, grid, tol: float = DEFAULT_TOL, rank_tol: Optional[float] = None
) -> CompressionReport:
    """
    Represent the functional given by `beta` as a positive rule on the grid nodes.

    A nonnegative least-squares fit on the row-scaled grid Vandermonde decides
    feasibility; the fit is then reduced to a vertex. Grid weights, if any,
    are ignored, as is beta's norm moment.

    :param grid: DiscreteMeasure or (N, d) array of candidate nodes
    :raises Infeasible: if beta's mass is not positive or the fit residual
        exceeds tol * (1 + ||beta||)
    """
    nodes = grid.nodes if isinstance(grid, DiscreteMeasure) else np.asarray(grid, dtype=float)
    if nodes.ndim == 1 and beta.d == 1:
        nodes = nodes.reshape(-1, 1)
    if nodes.ndim != 2 or nodes.shape[0] == 0:
        raise ValueError("grid must be a nonempty (N, d) node set")
    if nodes.shape[1] != beta.d:
        raise ValueError(f"dimension mismatch: grid d={nodes.shape[1]}, moments d={beta.d}")
    if beta.norm_moment is not None:
        logger.debug("represent_on_grid: norm moment present but not used")

    b = np.asarray(beta.values, dtype=float)
    b_norm = float(np.linalg.norm(b))
    if not beta.mass > 0:
        raise Infeasible("functional not positive on grid", abs(beta.mass))

    V = vandermonde(beta.basis, nodes)
    row_norms = np.linalg.norm(V, axis=1)
    scale = np.where(row_norms > 0, row_norms, 1.0)
    try:
        x, _ = nnls(V / scale[:, None], b / scale, maxiter=50 * max(nodes.shape[0], 1))
    except RuntimeError as e:
        raise ConditioningError(f"nonnegative least squares did not converge: {e}")
    residual = float(np.linalg.norm(V @ x - b))
    if residual > tol * (1.0 + b_norm) or not np.any(x > 0):
        raise Infeasible("functional not positive on grid", residual)

    # The fitted weights stand in for a measure on the grid.
    carrier = DiscreteMeasure(nodes[x > 0], x[x > 0])
    kept = np.flatnonzero(x > 0)
    V_c = V[:, kept]
    red = reduce_extreme(carrier.weights, V_c, rank_tol)
    w = red.weights
    idx_local = np.flatnonzero(w > 0)
    rule = carrier.restrict(idx_local, w[idx_local])

    actual = fsum_rows(vandermonde(beta.basis, rule.nodes), rule.weights)
    rel_scale = fsum_rows(np.abs(vandermonde(beta.basis, rule.nodes)), rule.weights)
    rel = relative_residuals(actual, b, rel_scale)
    absolute = np.abs(actual - b)
    if float(np.max(absolute)) > tol * (1.0 + b_norm):
        raise CompressionError(
            "represent_on_grid: reduced rule drifted from the moments", float(np.max(absolute))
        )
    report = CompressionReport(
        rule=rule,
        size_bound=numerical_rank(equilibrate_rows(V), rtol=rank_tol),
        achieved_size=rule.size,
        max_moment_residual=float(np.max(rel)),
        max_absolute_residual=float(np.max(absolute)),
        eliminations=red.eliminations,
        vertex_bound=red.rank,
        paper_bound="Prop3.6",
        node_indices=kept[idx_local],
    )
    logger.info(
        f"represent_on_grid: {report.achieved_size} atoms on a {nodes.shape[0]}-node grid "
        f"(bound {report.size_bound})"
    )
    return report


@dataclass(frozen=True)
class CompressionProblem:
    """
    One compression job. With `constrained`, `degree` must equal norm_degree - 1.
    """

    mu: DiscreteMeasure
    degree: int
    constrained: bool = False
    norm_degree: Optional[int] = None
    tol: float = DEFAULT_TOL
    over_complex: bool = False
    rank_tol: Optional[float] = None

    def __post_init__(self):
        if self.constrained:
            if self.norm_degree is None:
                object.__setattr__(self, "norm_degree", self.degree + 1)
            elif self.degree != self.norm_degree - 1:
                raise ValueError(
                    f"constrained problem needs degree = norm_degree - 1, "
                    f"got degree={self.degree}, norm_degree={self.norm_degree}"
                )
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.constrained and self.over_complex:
            raise ValueError("constrained and complex compression cannot be combined")

    @property
    def gamma(self) -> Optional[float]:
        return norm_moment(self.mu, self.norm_degree) if self.constrained else None

    def solve(self) -> CompressionReport:
        if self.constrained:
            return compress_constrained(self.mu, self.norm_degree, self.tol, self.rank_tol)
        if self.over_complex:
            return compress_complex(self.mu, self.degree, self.tol, self.rank_tol)
        return compress(self.mu, self.degree, self.tol, self.rank_tol)
