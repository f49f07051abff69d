from tchakaloff.backend.compress import CompressionProblem
from tchakaloff.backend.implementations.baseop import BaseOp, OpResult


class CompressOp(BaseOp):
    """
    compress: reduce a measure to a positive rule on its own support.

    Plain mode matches moments through --degree; --constrained matches them
    through degree n-1 and keeps the degree-n norm moment below that of the
    input (n = --norm-degree, default --degree + 1); --complex matches the
    complex moments through --degree.
    """

    @property
    def name(self) -> str:
        return "compress"

    def run(self, source: str) -> OpResult:
        cfg = self.config
        if cfg.degree is None:
            raise ValueError("compress needs --degree")
        mu = self.read_measure_file(source)
        problem = CompressionProblem(
            mu=mu,
            degree=cfg.degree,
            constrained=cfg.constrained,
            norm_degree=cfg.norm_degree,
            tol=cfg.tol,
            over_complex=cfg.over_complex,
            rank_tol=cfg.rank_tol,
        )
        report = problem.solve()
        doc = report.to_dict()
        doc.update({"input": str(source), "input_size": mu.size, "degree": cfg.degree})
        if problem.constrained:
            doc["norm_degree"] = problem.norm_degree
            doc["gamma_norm"] = problem.gamma
        summary = (
            f"{source}: {mu.size} -> {report.achieved_size} atoms "
            f"(bound {report.size_bound}, {report.paper_bound}), "
            f"max residual {report.max_moment_residual:.3e}"
        )
        return OpResult(report=doc, summary=summary, rule=report.rule)
