import logging

from tchakaloff.backend.implementations.baseop import BaseOp, OpResult
from tchakaloff.backend.measure import ComplexMomentSequence, complex_moments, read_moments
from tchakaloff.backend.tcmp import (
    CertificateKind,
    analyze,
    extract_atoms_flat,
    gamma_residual,
    uniqueness_certificate,
)

logger = logging.getLogger(__name__)

ACTIONS = ("analyze", "certify", "extract")


class MomentMatrixOp(BaseOp):
    """
    mm analyze|certify|extract on complex moment data of degree 2n.

    --input is complex moment JSON, or with --degree n a measure file whose
    complex moments through degree 2n are taken first.
    """

    @property
    def name(self) -> str:
        return "mm"

    def load_gamma(self, source: str) -> ComplexMomentSequence:
        if self.config.degree is not None:
            if self.config.degree < 1:
                raise ValueError(f"mm needs --degree n >= 1, got {self.config.degree}")
            mu = self.read_measure_file(source)
            return complex_moments(mu, 2 * self.config.degree)
        gamma = read_moments(source)
        if not isinstance(gamma, ComplexMomentSequence):
            raise ValueError(f"{source}: mm needs complex moment data (or --degree with a measure)")
        if gamma.n_total % 2:
            raise ValueError(f"{source}: mm needs even total degree, got {gamma.n_total}")
        return gamma

    def run(self, source: str) -> OpResult:
        cfg = self.config
        action = cfg.action or "analyze"
        if action not in ACTIONS:
            raise ValueError(f"unknown mm action {action!r}; expected one of {', '.join(ACTIONS)}")
        gamma = self.load_gamma(source)
        logger.debug(f"mm {action}: {source}, data of degree {gamma.n_total}")

        if action == "analyze":
            doc = analyze(gamma, cfg.tol, cfg.rank_tol)
            doc["input"] = str(source)
            summary = (
                f"{source}: M({doc['n']}) psd={doc['is_psd']} rank={doc['rank']} "
                f"flat={doc['flat']} recursive={doc['recursively_generated']}"
            )
            return OpResult(report=doc, summary=summary)

        if action == "certify":
            cert = uniqueness_certificate(gamma, cfg.tol, cfg.rank_tol)
            doc = cert.to_dict()
            doc["input"] = str(source)
            summary = f"{source}: certificate {cert.kind.value}, rank {cert.rank}"
            if cert.atom_bound is not None:
                summary += f", at most {cert.atom_bound} atoms ({cert.paper_bound})"
            code = 2 if cert.kind is CertificateKind.NONE else 0
            return OpResult(report=doc, summary=summary, exit_code=code, rule=cert.measure)

        mu = extract_atoms_flat(gamma, cfg.tol, cfg.rank_tol)
        doc = {
            "input": str(source),
            "paper_bound": "Prop4.1",
            "size_bound": mu.size,
            "achieved_size": mu.size,
            "max_moment_residual": gamma_residual(mu, gamma),
            "atoms": [{"re": z.real, "im": z.imag} for z in mu.points],
            "weights": mu.weights.tolist(),
        }
        summary = f"{source}: extracted {mu.size} atom(s) from flat data"
        return OpResult(report=doc, summary=summary, rule=mu)
