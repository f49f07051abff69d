"""
Zero sets of p(z, zbar) = z^k - q(z, zbar) with deg q < k.

Such a p has at most k^2 distinct zeros. find_roots seeds a grid over the
disk |z| <= search_radius(p), which holds every zero, and refines the seeds
with a damped Newton iteration in Wirtinger form. Each root found gets an
isolation disk: where the linear part of p at the root dominates the Taylor
remainder, no second zero can sit. A subdivision audit then closes cells
that lie outside the disk, that a Taylor bound shows to be zero-free, or
that fall inside an isolation disk. Open cells seed more Newton runs and
are reported if they survive.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from math import comb
from typing import Dict, List, Optional, TextIO, Tuple, Union

import numpy as np

from tchakaloff.utils.basis import complex_vandermonde, enumerate_complex, numerical_rank
from tchakaloff.utils.utils import cluster_points

logger = logging.getLogger(__name__)

ROOT_TOL = 1e-9
DEDUP_FACTOR = 1e-8
NEWTON_ITERATIONS = 60
HALVINGS = 10
SEED_DEDUP_EVERY = 6
AUDIT_MAX_DEPTH = 24
AUDIT_MAX_CELLS = 400_000
AUDIT_ROUNDS = 3
BISECTIONS = 60
CELL_OFFSETS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])


@dataclass(frozen=True)
class AnalyticPoly:
    """p = z^k - sum q[(i, j)] zbar^i z^j, every i + j < k."""

    k: int
    q_coeffs: Dict[Tuple[int, int], complex] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValueError(f"invalid degree k={self.k}; must be >= 1")
        coeffs = {}
        for (i, j), a in self.q_coeffs.items():
            i, j = int(i), int(j)
            if i < 0 or j < 0 or i + j >= self.k:
                raise ValueError(f"coefficient index ({i}, {j}) needs i + j < k = {self.k}")
            if complex(a) != 0:
                coeffs[(i, j)] = complex(a)
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "q_coeffs", coeffs)

    @property
    def coefficient_sum(self) -> float:
        return float(sum(abs(a) for a in self.q_coeffs.values()))

    def _powers(self, z):
        """z^0..z^k and zbar^0..zbar^(k-1), stacked along a new first axis."""
        zp = np.empty((self.k + 1,) + z.shape, dtype=complex)
        zp[0] = 1
        for e in range(1, self.k + 1):
            zp[e] = zp[e - 1] * z
        return zp, np.conj(zp[: self.k])

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        zp, zbp = self._powers(z)
        out = zp[self.k].copy()
        for (i, j), a in self.q_coeffs.items():
            out -= a * zbp[i] * zp[j]
        return out

    def derivatives(self, z):
        """(p, dp/dz, dp/dzbar) at z."""
        z = np.asarray(z, dtype=complex)
        zp, zbp = self._powers(z)
        p = zp[self.k].copy()
        pz = self.k * zp[self.k - 1]
        pzb = np.zeros_like(z)
        for (i, j), a in self.q_coeffs.items():
            p -= a * zbp[i] * zp[j]
            if j:
                pz = pz - a * j * zbp[i] * zp[j - 1]
            if i:
                pzb = pzb - a * i * zbp[i - 1] * zp[j]
        return p, pz, pzb

    @property
    def majorant(self) -> np.ndarray:
        """c[n]: sum of |a_ij| over i + j = n, with c[k] = 1 for z^k."""
        c = np.zeros(self.k + 1)
        c[self.k] = 1.0
        for (i, j), a in self.q_coeffs.items():
            c[i + j] += abs(a)
        return c

    def taylor_bound(self, t, r, order: int = 1):
        """
        Bound on the Taylor terms of order >= `order` of p about any centre
        of modulus t, over steps |h| <= r:

            sum_n c[n] sum_{m >= order} C(n, m) t^(n-m) r^m

        order=1 bounds |p(z+h) - p(z)|; order=2 bounds what is left after
        the linear part p_z h + p_zbar conj(h). All terms are nonnegative.
        """
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        c = self.majorant
        out = np.zeros(np.broadcast(t, r).shape)
        for n in range(order, self.k + 1):
            if c[n] == 0:
                continue
            for m in range(order, n + 1):
                out = out + c[n] * comb(n, m) * t ** (n - m) * r**m
        return out

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "q": [
                {"i": i, "j": j, "re": a.real, "im": a.imag}
                for (i, j), a in sorted(self.q_coeffs.items())
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AnalyticPoly":
        try:
            k = int(doc["k"])
            coeffs: Dict[Tuple[int, int], complex] = {}
            for entry in doc.get("q", []):
                key = (int(entry["i"]), int(entry["j"]))
                if key in coeffs:
                    raise ValueError(f"duplicate coefficient index {key}")
                coeffs[key] = complex(float(entry["re"]), float(entry.get("im", 0.0)))
        except (KeyError, TypeError) as e:
            raise ValueError(f"malformed polynomial JSON: {e}")
        return cls(k, coeffs)


# z^2 - zbar and three Wilmshurst polynomials. z2_conj, q3 and q5 have k^2 zeros; q4 has 8.
SHARP_EXAMPLES: Dict[str, AnalyticPoly] = {
    "z2_conj": AnalyticPoly(2, {(1, 0): 1}),
    "q3": AnalyticPoly(3, {(0, 2): -1, (0, 1): -1, (2, 0): 2, (1, 0): 2}),
    "q4": AnalyticPoly(4, {(0, 2): -3, (0, 1): 1, (3, 0): 3, (2, 0): 3}),
    "q5": AnalyticPoly(5, {(0, 3): -5, (0, 2): 10, (0, 1): -5, (4, 0): -5, (3, 0): 5}),
}


def read_poly(source: Union[str, os.PathLike, TextIO]) -> AnalyticPoly:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"malformed polynomial JSON: {e}")
    if not isinstance(doc, dict):
        raise ValueError("polynomial JSON must be an object")
    return AnalyticPoly.from_dict(doc)


def write_poly(p: AnalyticPoly, dest: Union[str, os.PathLike, TextIO]) -> None:
    text = json.dumps(p.to_dict(), indent=2, sort_keys=True) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        dest.write(text)


def root_count_bound(k: int) -> int:
    if k < 1:
        raise ValueError(f"invalid degree k={k}; must be >= 1")
    return k * k


def apriori_radius(p: AnalyticPoly) -> float:
    """R = max(1, sum |a_ij|) + 1. Any zero with |z| > 1 has |z| <= sum |a_ij|."""
    return max(1.0, p.coefficient_sum) + 1.0


def search_radius(p: AnalyticPoly) -> float:
    """
    Cauchy bound: the positive root of t^k = sum_n c[n] t^n over n < k.

    Beyond it |z|^k exceeds the majorant of |q|, so every zero lies inside.
    Found by bisection on [0, apriori_radius(p)], where the bound already holds.
    """
    lower = p.majorant[: p.k]
    if not lower.any():
        return 0.0
    lo, hi = 0.0, apriori_radius(p)
    for _ in range(BISECTIONS):
        mid = (lo + hi) / 2
        if mid**p.k > np.polyval(lower[::-1], mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class RootSet:
    roots: Tuple[complex, ...]
    residuals: Tuple[float, ...]
    box_radius: float
    undecided_cells: int = 0
    warnings: Tuple[str, ...] = ()
    search_radius: Optional[float] = None

    @property
    def count(self) -> int:
        return len(self.roots)

    def __len__(self) -> int:
        return len(self.roots)

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "roots": [{"re": z.real, "im": z.imag} for z in self.roots],
            "residuals": list(self.residuals),
            "box_radius": self.box_radius,
            "search_radius": self.search_radius,
            "undecided_cells": self.undecided_cells,
            "warnings": list(self.warnings),
        }


def _newton_step(p: AnalyticPoly, z: np.ndarray) -> np.ndarray:
    """
    One damped step for every point: solve p_z d + p_zbar conj(d) = -p and
    halve the step until the residual drops (at most HALVINGS times).
    """
    f, a, b = p.derivatives(z)
    det = np.abs(a) ** 2 - np.abs(b) ** 2
    ok = np.abs(det) > 1e-300
    r = -f
    delta = np.zeros_like(z)
    delta[ok] = (np.conj(a[ok]) * r[ok] - b[ok] * np.conj(r[ok])) / det[ok]

    res = np.abs(f)
    lam = np.ones(z.size)
    trial = z + delta
    pending = np.abs(p.evaluate(trial)) >= res
    for _ in range(HALVINGS):
        if not pending.any():
            break
        lam[pending] /= 2
        trial[pending] = z[pending] + lam[pending] * delta[pending]
        pending[pending] = np.abs(p.evaluate(trial[pending])) >= res[pending]
    return trial


def _newton(p: AnalyticPoly, seeds: np.ndarray, R: float) -> np.ndarray:
    """
    Damped Newton on p(z, zbar) = 0 from every seed.

    Seeds that stop moving are frozen, seeds leaving |z| <= 2R are dropped,
    and every SEED_DEDUP_EVERY iterations seeds that agree to 1e-7 R are
    collapsed.
    """
    z = np.asarray(seeds, dtype=complex).reshape(-1).copy()
    active = np.ones(z.size, dtype=bool)
    for it in range(1, NEWTON_ITERATIONS + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        trial = _newton_step(p, z[idx])
        active[idx[np.abs(trial - z[idx]) <= 1e-15 * R]] = False
        z[idx] = trial

        keep = np.abs(z) <= 2 * R
        if it % SEED_DEDUP_EVERY == 0 and z.size:
            keys = np.round(np.column_stack([z.real, z.imag]) / (1e-7 * R))
            _, first = np.unique(keys, axis=0, return_index=True)
            unique = np.zeros(z.size, dtype=bool)
            unique[first] = True
            keep &= unique
        z, active = z[keep], active[keep]
    return z


def _accept(p: AnalyticPoly, z: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    res = np.abs(p.evaluate(z))
    good = res <= tol * np.maximum(1.0, np.abs(z)) ** p.k
    return z[good], res[good]


def _dedup(z: np.ndarray, res: np.ndarray, radius: float):
    """Collapse roots closer than radius, keeping the member with the smallest residual."""
    if z.size == 0:
        return z, res
    labels = cluster_points(np.column_stack([z.real, z.imag]), radius)
    keep = []
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        keep.append(members[int(np.argmin(res[members]))])
    keep = np.array(keep, dtype=int)
    return z[keep], res[keep]


def isolation_radii(p: AnalyticPoly, z, cap: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    (inner, outer) per approximate root: p has no zero at a distance in
    (inner, outer] from it.

    With sigma = ||p_z| - |p_zbar||, |p(z + h)| >= sigma |h| - |p(z)| - T2(|h|),
    T2 the second-order Taylor bound. outer is the largest rho <= cap with
    T2(rho) <= sigma rho / 2 and inner = 2 |p(z)| / sigma; outer is 0 when
    the annulus is empty (a singular or poorly resolved root).
    """
    z = np.asarray(z, dtype=complex).reshape(-1)
    f, a, b = p.derivatives(z)
    sigma = np.abs(np.abs(a) - np.abs(b))
    t = np.abs(z)

    def fits(rho):
        return p.taylor_bound(t, rho, 2) <= sigma * rho / 2

    lo = np.zeros(z.size)
    hi = np.full(z.size, float(cap))
    whole = fits(hi)
    for _ in range(BISECTIONS):
        mid = (lo + hi) / 2
        good = fits(mid)
        lo = np.where(good, mid, lo)
        hi = np.where(good, hi, mid)
    outer = np.where(whole, float(cap), lo)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(sigma > 0, 2 * np.abs(f) / sigma, np.inf)
    outer = np.where(inner < outer, outer, 0.0)
    return inner, outer


def _distinct(p: AnalyticPoly, z, res, R: float, Rs: float):
    """
    Distinct roots among accepted candidates, with their isolation radii.

    Candidates closer than DEDUP_FACTOR * R merge; a candidate inside the
    isolation disk of one with a smaller residual approximates the same zero
    and is dropped.
    """
    z, res = _dedup(z, res, DEDUP_FACTOR * R)
    _, outer = isolation_radii(p, z, 2 * max(Rs, DEDUP_FACTOR * R))
    kept: List[int] = []
    for idx in np.argsort(res, kind="stable"):
        if all(abs(z[idx] - z[j]) >= outer[j] for j in kept):
            kept.append(int(idx))
    kept.sort()
    return z[kept], res[kept], outer[kept]


def _audit(p: AnalyticPoly, roots, outer, centres, half: float, depth: int, Rs: float):
    """
    Subdivide the square cells of half-width `half` around `centres`.

    A cell closes when it lies outside |z| <= Rs, when Taylor bounds about
    its centre exceed |p| there, or when it sits inside a root's isolation
    disk. Returns (open centres, half, depth) at the depth where no cell is
    open, AUDIT_MAX_DEPTH is reached, or the next level would pass
    AUDIT_MAX_CELLS; the caller may resume from there.
    """
    while True:
        reach = half * np.sqrt(2.0)
        t = np.abs(centres)
        f, a, b = p.derivatives(centres)
        first = p.taylor_bound(t, reach, 1)
        second = (np.abs(a) + np.abs(b)) * reach + p.taylor_bound(t, reach, 2)
        closed = (t - reach > Rs) | (np.abs(f) > np.minimum(first, second))
        for zeta, rho in zip(roots, outer):
            if rho > 0:
                closed |= np.abs(centres - zeta) + reach < rho
        centres = centres[~closed]
        if centres.size == 0 or depth >= AUDIT_MAX_DEPTH or 4 * centres.size > AUDIT_MAX_CELLS:
            return centres, half, depth
        half /= 2
        depth += 1
        centres = (centres[:, None] + CELL_OFFSETS[None, :] * half).reshape(-1)


def find_roots(p: AnalyticPoly, tol: float = ROOT_TOL, audit: bool = True) -> RootSet:
    """
    Distinct zeros of p.

    Every returned z has |p(z)| <= tol * max(1, |z|)^k. More than k^2 roots
    means tol admits spurious near-zeros; they are all returned, with a
    warning, so the caller can see the surplus.
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    R = apriori_radius(p)
    Rs = max(search_radius(p) * (1 + 1e-9), 1e-3)
    pitch = Rs / (8 * p.k * p.k)
    axis = np.arange(-Rs, Rs + pitch / 2, pitch)
    gx, gy = np.meshgrid(axis, axis)
    seeds = (gx + 1j * gy).reshape(-1)
    seeds = seeds[np.abs(seeds) <= Rs]
    logger.debug(f"find_roots: k={p.k}, R={R}, search radius {Rs:.4g}, {seeds.size} seeds")

    z, res = _accept(p, _newton(p, seeds, Rs), tol)
    z, res, outer = _distinct(p, z, res, R, Rs)

    warnings: List[str] = []
    undecided = 0
    if audit:
        centres, half, depth = np.array([0j]), Rs, 0
        for round_ in range(AUDIT_ROUNDS + 1):
            centres, half, depth = _audit(p, z, outer, centres, half, depth, Rs)
            undecided = int(centres.size)
            if undecided == 0 or round_ == AUDIT_ROUNDS:
                break
            extra_z, extra_res = _accept(p, _newton(p, centres, Rs), tol)
            before = z.size
            z, res, outer = _distinct(
                p, np.concatenate([z, extra_z]), np.concatenate([res, extra_res]), R, Rs
            )
            logger.debug(
                f"Audit round {round_ + 1}: depth {depth}, {undecided} open cell(s), "
                f"{z.size - before} new root(s)"
            )
        if undecided:
            msg = f"coverage audit left {undecided} cell(s) undecided; root list may be incomplete"
            logger.warning(msg)
            warnings.append(msg)

    bound = root_count_bound(p.k)
    if z.size > bound:
        msg = (
            f"{z.size} roots exceed the bound {bound}; tol {tol:.1e} admits near-zeros "
            f"that are not roots"
        )
        logger.warning(msg)
        warnings.append(msg)

    order = np.lexsort((z.imag, z.real))
    z, res = z[order], res[order]
    logger.debug(f"find_roots: {z.size} root(s) for k={p.k}")
    return RootSet(
        roots=tuple(complex(v) for v in z),
        residuals=tuple(float(v) for v in res),
        box_radius=R,
        undecided_cells=undecided,
        warnings=tuple(warnings),
        search_radius=Rs,
    )


def rank_audit(p: AnalyticPoly, roots, rank_tol: Optional[float] = None) -> int:
    """
    Rank of M(2k-2) for unit weights on `roots`, computed through its
    Vandermonde factor. A correct root set gives card(roots), never above k^2.
    """
    z = np.asarray(roots, dtype=complex).reshape(-1)
    if z.size == 0:
        return 0
    z = z / max(1.0, float(np.max(np.abs(z))))
    W = complex_vandermonde(enumerate_complex(max(2 * p.k - 2, 0)), z)
    return numerical_rank(W, rtol=rank_tol)
