"""Small dense semidefinite programming: problem assembly and solvers."""

from .ipm import SdpSolution, SdpStatus, dump_problems, lmi_min_eigs, record_solves, solve_sdp, solve_sdp_relaxing
from .maxdet import maxdet_iterate
from .problem import CompiledSdp, LmiBlock, SdpProblem, Variable, embed

__all__ = [
    "CompiledSdp",
    "LmiBlock",
    "SdpProblem",
    "SdpSolution",
    "SdpStatus",
    "Variable",
    "dump_problems",
    "embed",
    "lmi_min_eigs",
    "maxdet_iterate",
    "record_solves",
    "solve_sdp",
    "solve_sdp_relaxing",
]
