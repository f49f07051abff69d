from tchakaloff.backend.implementations.baseop import BaseOp, OpResult
from tchakaloff.backend.measure import (
    complex_moments,
    moments,
    moments_to_dict,
    moments_with_norm,
)


class MomentsOp(BaseOp):
    """moments: real moments through --degree (plus the --norm-degree norm moment), or
    with --complex the complex moments gamma_ij, i + j <= --degree."""

    @property
    def name(self) -> str:
        return "moments"

    def run(self, source: str) -> OpResult:
        cfg = self.config
        if cfg.degree is None:
            raise ValueError("moments needs --degree")
        mu = self.read_measure_file(source)
        if cfg.over_complex:
            data = complex_moments(mu, cfg.degree)
            count = len(data.gamma)
        elif cfg.norm_degree is not None:
            data = moments_with_norm(mu, cfg.degree, cfg.norm_degree)
            count = len(data.values)
        else:
            data = moments(mu, cfg.degree)
            count = len(data.values)
        report = {"input": str(source), "input_size": mu.size, "moments": moments_to_dict(data)}
        summary = f"{source}: {count} moment(s) of degree <= {cfg.degree}, mass {data.mass:.17g}"
        return OpResult(report=report, summary=summary, moments=data)
