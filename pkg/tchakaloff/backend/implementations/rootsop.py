from typing import List

from tchakaloff.backend.implementations.baseop import BaseOp, OpResult
from tchakaloff.backend.variety import (
    ROOT_TOL,
    SHARP_EXAMPLES,
    find_roots,
    rank_audit,
    read_poly,
    root_count_bound,
)

EXAMPLE_PREFIX = "example:"


class RootsOp(BaseOp):
    """roots: distinct zeros of z^k - q(z, zbar) for each --poly file and --example name."""

    @property
    def name(self) -> str:
        return "roots"

    def sources(self) -> List[str]:
        cfg = self.config
        unknown = [e for e in cfg.examples if e not in SHARP_EXAMPLES]
        if unknown:
            raise ValueError(
                f"unknown example {unknown[0]!r}; choose from {', '.join(sorted(SHARP_EXAMPLES))}"
            )
        items = list(cfg.polys) + [EXAMPLE_PREFIX + e for e in cfg.examples]
        if not items:
            raise ValueError("roots needs --poly or --example")
        return items

    @staticmethod
    def stem(source: str) -> str:
        if source.startswith(EXAMPLE_PREFIX):
            return source[len(EXAMPLE_PREFIX) :]
        return BaseOp.stem(source)

    def run(self, source: str) -> OpResult:
        if source.startswith(EXAMPLE_PREFIX):
            p = SHARP_EXAMPLES[source[len(EXAMPLE_PREFIX) :]]
        else:
            p = read_poly(source)
        roots = find_roots(p, tol=max(self.config.tol, ROOT_TOL))
        bound = root_count_bound(p.k)
        doc = roots.to_dict()
        doc.update(
            {
                "input": str(source),
                "polynomial": p.to_dict(),
                "paper_bound": "Prop4.3",
                "size_bound": bound,
                "achieved_size": roots.count,
                "max_moment_residual": max(roots.residuals, default=0.0),
                "rank_audit": rank_audit(p, roots.roots, self.config.rank_tol),
            }
        )
        summary = f"{self.stem(source)}: {roots.count} root(s) for k={p.k} (bound {bound})"
        if roots.warnings:
            summary += f", {len(roots.warnings)} warning(s)"
        # more than k^2 roots means tol accepted points that are not zeros
        return OpResult(report=doc, summary=summary, exit_code=4 if roots.count > bound else 0)
