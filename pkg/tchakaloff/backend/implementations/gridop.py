from tchakaloff.backend.compress import represent_on_grid
from tchakaloff.backend.implementations.baseop import BaseOp, OpResult
from tchakaloff.backend.measure import MomentVector, read_moments, read_nodes


class GridOp(BaseOp):
    """represent-grid: write real moment data (--input) as a positive rule on --grid nodes."""

    @property
    def name(self) -> str:
        return "represent-grid"

    def run(self, source: str) -> OpResult:
        cfg = self.config
        if not cfg.grid:
            raise ValueError("represent-grid needs --grid")
        beta = read_moments(source)
        if not isinstance(beta, MomentVector):
            raise ValueError(f"{source}: represent-grid needs real moment data")
        nodes = read_nodes(cfg.grid)
        report = represent_on_grid(beta, nodes, cfg.tol, cfg.rank_tol)
        doc = report.to_dict()
        doc.update({"input": str(source), "grid": str(cfg.grid), "grid_size": int(nodes.shape[0])})
        summary = (
            f"{source}: {report.achieved_size} atoms on a {nodes.shape[0]}-node grid "
            f"(bound {report.size_bound}, {report.paper_bound}), "
            f"max residual {report.max_moment_residual:.3e}"
        )
        return OpResult(report=doc, summary=summary, rule=report.rule)
