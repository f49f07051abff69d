"""
selftest: randomized property suites over the library.

    compress      size <= N_{m,d;mu} and moments reproduced (unconstrained)
    constrained   size <= 1 + N_{n-1,d;mu} and the norm moment not increased
    flat          flat data built from r separated atoms extracts those atoms
    roots         root count <= k^2 and the rank audit agrees with the count

Each suite records its maxima; any violated property makes the exit code 4.
"""

import logging
from typing import Dict, List

import numpy as np

from tchakaloff.backend.compress import CompressionError, compress, compress_constrained
from tchakaloff.backend.implementations.baseop import BaseOp, OpResult
from tchakaloff.backend.measure import DiscreteMeasure, complex_moments
from tchakaloff.backend.tcmp import MomentMatrixError, extract_atoms_flat
from tchakaloff.backend.variety import AnalyticPoly, find_roots, rank_audit, root_count_bound
from tchakaloff.utils.basis import dim_complex, dim_real

logger = logging.getLogger(__name__)

MEASURE_TRIALS = 200
POLY_TRIALS = 500
POLY_DEGREES = (1, 2, 3, 4, 5)
SELFTEST_RANK_TOL = 1e-10
ATOM_SEPARATION = 0.2
ATOM_MATCH_TOL = 1e-6


def random_measure(rng: np.random.Generator, d: int, size: int) -> DiscreteMeasure:
    nodes = rng.uniform(-1.0, 1.0, size=(size, d))
    weights = rng.uniform(0.1, 1.0, size=size)
    return DiscreteMeasure.from_atoms(nodes, weights)


def separated_points(rng: np.random.Generator, count: int, separation: float) -> np.ndarray:
    """`count` points of the unit disk, pairwise at least `separation` apart."""
    points: List[complex] = []
    while len(points) < count:
        z = complex(*rng.uniform(-1.0, 1.0, size=2))
        if abs(z) <= 1.0 and all(abs(z - w) >= separation for w in points):
            points.append(z)
    return np.array(points)


def random_poly(rng: np.random.Generator, k: int) -> AnalyticPoly:
    """Every coefficient of q uniform in the unit disk."""
    coeffs = {}
    for total in range(k):
        for i in range(total + 1):
            coeffs[(i, total - i)] = np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
    return AnalyticPoly(k, coeffs)


class SelfTestOp(BaseOp):
    @property
    def name(self) -> str:
        return "selftest"

    def sources(self) -> List[str]:
        return ["selftest"]

    @property
    def rank_tol(self) -> float:
        return self.config.rank_tol if self.config.rank_tol is not None else SELFTEST_RANK_TOL

    def suite_compress(self, rng: np.random.Generator, trials: int) -> Dict:
        violations, max_size, max_residual = [], 0, 0.0
        for t in range(trials):
            d, m = int(rng.integers(1, 4)), int(rng.integers(1, 7))
            mu = random_measure(rng, d, dim_real(d, m) + int(rng.integers(1, 21)))
            try:
                rep = compress(mu, m, self.config.tol, self.rank_tol)
            except CompressionError as e:
                violations.append(f"trial {t}: d={d} m={m}: {e}")
                continue
            max_size = max(max_size, rep.achieved_size)
            max_residual = max(max_residual, rep.max_moment_residual)
            if rep.achieved_size > rep.size_bound:
                violations.append(
                    f"trial {t}: d={d} m={m}: size {rep.achieved_size} > bound {rep.size_bound}"
                )
        return {
            "trials": trials,
            "max_size": max_size,
            "max_residual": max_residual,
            "violations": violations,
        }

    def suite_constrained(self, rng: np.random.Generator, trials: int) -> Dict:
        violations, max_size, min_slack = [], 0, np.inf
        for t in range(trials):
            d, n = int(rng.integers(1, 4)), int(rng.integers(1, 8))
            mu = random_measure(rng, d, dim_real(d, n - 1) + int(rng.integers(2, 22)))
            try:
                rep = compress_constrained(mu, n, self.config.tol, self.rank_tol)
            except CompressionError as e:
                violations.append(f"trial {t}: d={d} n={n}: {e}")
                continue
            max_size = max(max_size, rep.achieved_size)
            min_slack = min(min_slack, rep.norm_slack)
            if rep.achieved_size > rep.size_bound:
                violations.append(
                    f"trial {t}: d={d} n={n}: size {rep.achieved_size} > bound {rep.size_bound}"
                )
        return {
            "trials": trials,
            "max_size": max_size,
            "min_norm_slack": min_slack if np.isfinite(min_slack) else None,
            "violations": violations,
        }

    def suite_flat(self, rng: np.random.Generator, trials: int) -> Dict:
        violations, max_error = [], 0.0
        for t in range(trials):
            n = int(rng.integers(2, 4))
            r = int(rng.integers(1, dim_complex(n - 1) + 1))
            atoms = separated_points(rng, r, ATOM_SEPARATION)
            mu = DiscreteMeasure.from_complex(atoms, rng.uniform(0.5, 1.5, size=r))
            try:
                got = extract_atoms_flat(complex_moments(mu, 2 * n), self.config.tol, self.rank_tol)
            except MomentMatrixError as e:
                violations.append(f"trial {t}: n={n} r={r}: {e}")
                continue
            if got.size != r:
                violations.append(f"trial {t}: n={n}: extracted {got.size} atoms, expected {r}")
                continue
            error = float(np.max(np.min(np.abs(got.points[:, None] - atoms[None, :]), axis=1)))
            max_error = max(max_error, error)
            if error > ATOM_MATCH_TOL:
                violations.append(f"trial {t}: n={n} r={r}: atom error {error:.3e}")
        return {"trials": trials, "max_atom_error": max_error, "violations": violations}

    def suite_roots(self, rng: np.random.Generator, trials: int) -> Dict:
        violations: List[str] = []
        per_degree = {}
        for k in POLY_DEGREES:
            bound = root_count_bound(k)
            max_count, undecided = 0, 0
            for t in range(trials):
                p = random_poly(rng, k)
                roots = find_roots(p)
                undecided += int(roots.undecided_cells > 0)
                max_count = max(max_count, roots.count)
                if roots.count > bound:
                    violations.append(f"k={k} trial {t}: {roots.count} roots > {bound}")
                audit = rank_audit(p, roots.roots, self.rank_tol)
                if audit != roots.count:
                    violations.append(
                        f"k={k} trial {t}: rank audit {audit} != {roots.count} roots"
                    )
            per_degree[str(k)] = {
                "bound": bound,
                "max_count": max_count,
                "attained": max_count == bound,
                "undecided_runs": undecided,
            }
        return {"trials": trials, "degrees": per_degree, "violations": violations}

    def run(self, source: str) -> OpResult:
        cfg = self.config
        measure_trials = cfg.trials if cfg.trials is not None else MEASURE_TRIALS
        poly_trials = cfg.trials if cfg.trials is not None else POLY_TRIALS
        if measure_trials < 1:
            raise ValueError(f"--trials must be >= 1, got {measure_trials}")
        rng = np.random.default_rng(cfg.seed)

        suites = {}
        for name, fn, trials in (
            ("compress", self.suite_compress, measure_trials),
            ("constrained", self.suite_constrained, measure_trials),
            ("flat", self.suite_flat, measure_trials),
            ("roots", self.suite_roots, poly_trials),
        ):
            logger.info(f"selftest: {name} suite, {trials} trial(s)")
            suites[name] = fn(rng, trials)
            for v in suites[name]["violations"]:
                logger.warning(f"selftest {name}: {v}")

        failed = sum(len(s["violations"]) for s in suites.values())
        report = {"seed": cfg.seed, "suites": suites, "violations": failed}
        summary = f"selftest (seed {cfg.seed}): " + ", ".join(
            f"{name} {'ok' if not s['violations'] else str(len(s['violations'])) + ' violation(s)'}"
            for name, s in suites.items()
        )
        return OpResult(report=report, summary=summary, exit_code=4 if failed else 0)
